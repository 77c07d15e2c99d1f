"""Run configuration: JSON documents validated into frozen dataclasses.

A config is a JSON object::

    {
      "model": {"id": "qubit", "epsilon": 1.0},
      "path": {"kind": "gate", "angle": 0.7, "slot": 0, "samples": 400},
      "noise": [{"op": "Z", "rate": 0.1}],
      "mode": "enumerate",
      "max_jumps": 2,
      "dt": 0.001,
      "total_time": 1.0,
      "seed": 0,
      "output": {"dir": "out", "formats": ["structured", "tabular"]}
    }

See README.md for every field and its default.
"""
from __future__ import annotations

import difflib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

from .errors import ConfigError

MODEL_IDS = ("spin_half", "qubit", "two_qubit")
PATH_KINDS = ("latitude", "gate", "waypoints")
RAMPS = ("uniform", "smooth")
MODES = ("nojump", "enumerate", "montecarlo", "master", "robustness")
FORMATS = ("structured", "tabular")

DEFAULT_DT = 1e-3
DEFAULT_SEED = 0
DEFAULT_TOTAL_TIME = 1.0


@dataclass(frozen=True)
class ModelSpec:
    id: str
    epsilon: float = 1.0
    axes: tuple[int, int] = (1, 1)


@dataclass(frozen=True)
class PathSpec:
    kind: str
    samples: int = 400
    theta: float | None = None
    angle: float | None = None
    slot: int = 0
    ramp: str = "uniform"
    points: tuple[tuple[float, ...], ...] = ()
    closed: bool = False


@dataclass(frozen=True)
class NoiseSpec:
    op: str
    rate: float


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "."
    formats: tuple[str, ...] = ("structured",)


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    path: PathSpec
    mode: str
    noise: tuple[NoiseSpec, ...] = ()
    max_jumps: int = 2
    n_traj: int = 1000
    dt: float = DEFAULT_DT
    total_time: float = DEFAULT_TOTAL_TIME
    seed: int = DEFAULT_SEED
    initial_state: tuple[tuple[float, float], ...] | None = None
    jumps: tuple[tuple[float, ...], ...] = ((), (0.5,))
    max_records: int = 10000
    output: OutputSpec = field(default_factory=OutputSpec)

    def to_dict(self) -> dict[str, Any]:
        return json.loads(json.dumps(asdict(self)))

    def replace(self, **changes) -> "RunConfig":
        data = self.to_dict()
        data.update(changes)
        return _build(data, "")


_TOP_KEYS = {"model", "path", "noise", "mode", "max_jumps", "n_traj", "dt", "total_time",
             "seed", "initial_state", "jumps", "max_records", "output"}
_REQUIRED = ("model", "path", "mode")
_MODEL_KEYS = {"id", "epsilon", "axes"}
_PATH_KEYS = {"kind", "samples", "theta", "angle", "slot", "ramp", "points", "closed"}
_NOISE_KEYS = {"op", "rate"}
_OUTPUT_KEYS = {"dir", "formats"}


def _where(ctx: str, key: str) -> str:
    return f"{ctx}.{key}" if ctx else key


def _check_keys(obj, allowed: set[str], ctx: str, required=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{ctx or 'config'}: expected an object")
    for key in obj:
        if key not in allowed:
            close = difflib.get_close_matches(key, sorted(allowed), n=2)
            hint = f"; did you mean {' or '.join(map(repr, close))}?" if close else ""
            raise ConfigError(f"{_where(ctx, key)}: unknown key {key!r}{hint}")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{_where(ctx, key)}: missing required field")


def _number(obj, key, ctx, default=None, *, positive=False, nonneg=False, integer=False):
    if key not in obj or obj[key] is None:
        if default is None and key in obj:
            return None
        return default
    v = obj[key]
    where = _where(ctx, key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    if integer and (not float(v).is_integer()):
        raise ConfigError(f"{where}: expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{where}: must be finite")
    if positive and v <= 0:
        raise ConfigError(f"{where}: must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(f"{where}: must be non-negative, got {v!r}")
    return int(v) if integer else float(v)


def _choice(obj, key, ctx, options, default=None):
    v = obj.get(key, default)
    if v not in options:
        close = difflib.get_close_matches(str(v), options, n=1)
        hint = f"; did you mean {close[0]!r}?" if close else ""
        raise ConfigError(f"{_where(ctx, key)}: {v!r} is not one of {list(options)}{hint}")
    return v


def _build_model(obj) -> ModelSpec:
    _check_keys(obj, _MODEL_KEYS, "model", required=("id",))
    model_id = _choice(obj, "id", "model", MODEL_IDS)
    eps = _number(obj, "epsilon", "model", 1.0, positive=True)
    axes = obj.get("axes", [1, 1])
    if (not isinstance(axes, (list, tuple)) or len(axes) != 2
            or any(isinstance(a, bool) or a not in (1, 2, 3) for a in axes)):
        raise ConfigError(f"model.axes: expected two Pauli axes in 1..3, got {axes!r}")
    return ModelSpec(model_id, eps, tuple(int(a) for a in axes))


def _build_path(obj) -> PathSpec:
    _check_keys(obj, _PATH_KEYS, "path", required=("kind",))
    kind = _choice(obj, "kind", "path", PATH_KINDS)
    samples = _number(obj, "samples", "path", 400, positive=True, integer=True)
    slot = _number(obj, "slot", "path", 0, nonneg=True, integer=True)
    ramp = _choice(obj, "ramp", "path", RAMPS, "uniform")
    theta = _number(obj, "theta", "path", None, positive=True)
    angle = _number(obj, "angle", "path", None, positive=True)
    closed = obj.get("closed", False)
    if not isinstance(closed, bool):
        raise ConfigError("path.closed: expected true or false")
    points: tuple = ()
    if kind == "latitude" and theta is None:
        raise ConfigError("path.theta: missing required field for a latitude path")
    if kind == "gate":
        if angle is None:
            raise ConfigError("path.angle: missing required field for a gate path")
        if angle > 2 * math.pi:
            raise ConfigError("path.angle: must be at most 2*pi")
    if kind == "waypoints":
        raw = obj.get("points")
        if not isinstance(raw, list) or len(raw) < 2:
            raise ConfigError("path.points: need a list of at least two points")
        rows = []
        for i, p in enumerate(raw):
            if not isinstance(p, list) or not p:
                raise ConfigError(f"path.points[{i}]: expected a list of numbers")
            rows.append(tuple(_number({"v": x}, "v", f"path.points[{i}]") for x in p))
        if len({len(r) for r in rows}) != 1:
            raise ConfigError("path.points: all points need the same length")
        points = tuple(rows)
    return PathSpec(kind, samples, theta, angle, slot, ramp, points, closed)


def _build_noise(raw) -> tuple[NoiseSpec, ...]:
    if not isinstance(raw, list):
        raise ConfigError("noise: expected a list")
    out = []
    for i, item in enumerate(raw):
        ctx = f"noise[{i}]"
        _check_keys(item, _NOISE_KEYS, ctx, required=("op", "rate"))
        op = item["op"]
        if not isinstance(op, str) or not op:
            raise ConfigError(f"{ctx}.op: expected an operator label")
        out.append(NoiseSpec(op, _number(item, "rate", ctx, nonneg=True)))
    return tuple(out)


def _build_output(raw) -> OutputSpec:
    _check_keys(raw, _OUTPUT_KEYS, "output")
    d = raw.get("dir", ".")
    if not isinstance(d, str) or not d:
        raise ConfigError("output.dir: expected a directory path")
    formats = raw.get("formats", ["structured"])
    if not isinstance(formats, list) or not formats:
        raise ConfigError("output.formats: expected a non-empty list")
    for i, f in enumerate(formats):
        if f not in FORMATS:
            raise ConfigError(f"output.formats[{i}]: {f!r} is not one of {list(FORMATS)}")
    return OutputSpec(d, tuple(formats))


def _build(data: dict, ctx: str) -> RunConfig:
    _check_keys(data, _TOP_KEYS, ctx, required=_REQUIRED)
    model = _build_model(data["model"])
    path = _build_path(data["path"])
    mode = _choice(data, "mode", ctx, MODES)
    noise = _build_noise(data.get("noise", []))
    state = data.get("initial_state")
    if state is not None:
        if not isinstance(state, list) or not state:
            raise ConfigError("initial_state: expected a list of [re, im] pairs")
        pairs = []
        for i, amp in enumerate(state):
            if not isinstance(amp, list) or len(amp) != 2:
                raise ConfigError(f"initial_state[{i}]: expected [re, im]")
            pairs.append((_number({"v": amp[0]}, "v", f"initial_state[{i}]"),
                          _number({"v": amp[1]}, "v", f"initial_state[{i}]")))
        if all(re == 0 and im == 0 for re, im in pairs):
            raise ConfigError("initial_state: must not be the zero vector")
        state = tuple(pairs)
    jumps = data.get("jumps", [[], [0.5]])
    if not isinstance(jumps, list):
        raise ConfigError("jumps: expected a list of fraction lists")
    patterns = []
    for i, pat in enumerate(jumps):
        if not isinstance(pat, list):
            raise ConfigError(f"jumps[{i}]: expected a list of fractions")
        fr = tuple(_number({"v": f}, "v", f"jumps[{i}]") for f in pat)
        if any(not 0.0 <= f <= 1.0 for f in fr):
            raise ConfigError(f"jumps[{i}]: fractions must lie in [0, 1]")
        patterns.append(fr)
    return RunConfig(
        model=model, path=path, mode=mode, noise=noise,
        max_jumps=_number(data, "max_jumps", ctx, 2, nonneg=True, integer=True),
        n_traj=_number(data, "n_traj", ctx, 1000, positive=True, integer=True),
        dt=_number(data, "dt", ctx, DEFAULT_DT, positive=True),
        total_time=_number(data, "total_time", ctx, DEFAULT_TOTAL_TIME, positive=True),
        seed=_number(data, "seed", ctx, DEFAULT_SEED, nonneg=True, integer=True),
        initial_state=state,
        jumps=tuple(patterns),
        max_records=_number(data, "max_records", ctx, 10000, nonneg=True, integer=True),
        output=_build_output(data.get("output", {})),
    )


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Raises ConfigError naming the first offending field (or the line and
    column of a syntax error).
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object at the top level")
    return _build(data, "")


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
