"""Experiment runner: RunConfig -> RunReport -> files.

Every report value is stored as JSON-compatible primitives, so a report read
back from disk compares equal to the in-memory one. Complex matrices are
``{"re": [[...]], "im": [[...]]}``. Reals are written with 17 significant
digits.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import core, gates, jumps, models
from .config import RunConfig
from .errors import ConfigError, DomainError
from .holonomy import IsospectralFamily, ParameterPath, holonomy
from .lindblad import LindbladModel, classify_kappa, evolve

REPORT_FILE = "report.json"
TABLE_FILE = "trajectories.csv"
TABLE_COLUMNS = ("trajectory", "jump_count", "jump_steps", "weight", "fidelity")

OP_CHARS = {
    "I": core.I2, "X": core.SIGMA1, "Y": core.SIGMA2, "Z": core.SIGMA3,
    "+": core.SIGMA_PLUS, "-": core.SIGMA_MINUS,
}


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_json(d) -> np.ndarray:
    return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)


@dataclass
class RunReport:
    config: dict
    mode: str
    results: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    trajectories: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"config": self.config, "mode": self.mode, "results": self.results,
                "diagnostics": self.diagnostics, "verdicts": self.verdicts,
                "trajectories": self.trajectories, "timing": self.timing}

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(**{k: d[k] for k in ("config", "mode", "results", "diagnostics",
                                         "verdicts", "trajectories", "timing")})


# -- serialization ---------------------------------------------------------

def _dump(obj, out: list, indent: int, level: int):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise DomainError(f"cannot serialize non-finite value {x}")
        out.append(format(x, ".17g") if x != int(x) or abs(x) >= 1e17 else f"{x:.1f}")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(pad + json.dumps(str(k)) + ": ")
            _dump(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            out.append("[")
            for i, v in enumerate(obj):
                if i:
                    out.append(", ")
                _dump(v, out, indent, level + 1)
            out.append("]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _dump(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_report(report: RunReport, include_timing: bool = True) -> str:
    """Deterministic JSON text; reals carry 17 significant digits."""
    d = report.to_dict()
    if not include_timing:
        d.pop("timing")
    out: list[str] = []
    _dump(d, out, 2, 0)
    return "".join(out) + "\n"


def loads_report(text: str) -> RunReport:
    return RunReport.from_dict(json.loads(text))


def emit(report: RunReport, out_dir, formats=("structured",)) -> list[str]:
    """Write the report in each requested format; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "structured":
            path = os.path.join(out_dir, REPORT_FILE)
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(dumps_report(report))
        elif fmt == "tabular":
            path = os.path.join(out_dir, TABLE_FILE)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(TABLE_COLUMNS)
                for row in report.trajectories:
                    writer.writerow([row["trajectory"], row["jump_count"],
                                     " ".join(str(s) for s in row["jump_steps"]),
                                     format(row["weight"], ".17g"),
                                     format(row["fidelity"], ".17g")])
        else:
            raise ConfigError(f"unknown output format {fmt!r}")
        written.append(path)
    return written


# -- building engine inputs from a config -----------------------------------

def build_family(config: RunConfig) -> IsospectralFamily:
    m = config.model
    return models.FAMILIES[m.id](epsilon=m.epsilon, axes=m.axes)


def _slots(family: IsospectralFamily) -> int:
    return family.n_params // 2


def build_path(config: RunConfig, family: IsospectralFamily) -> ParameterPath:
    p = config.path
    reparam = models.smooth_ramp if p.ramp == "smooth" else None
    if p.kind in ("latitude", "gate"):
        if p.slot >= _slots(family):
            raise ConfigError(f"path.slot: {p.slot} out of range for model {config.model.id!r}"
                              f" ({_slots(family)} parameter pairs)")
    if p.kind == "latitude":
        if reparam is None:
            return models.latitude_loop(family, p.theta, p.samples, p.slot)

        def func(s):
            return models.sphere_point(family, p.slot, p.theta, models.TWO_PI * reparam(s))
        return ParameterPath.from_function(func, p.samples, closed=True, period=family.period)
    if p.kind == "gate":
        if family.degeneracy == 1:
            raise ConfigError("path.kind: gate paths need a gate model (qubit or two_qubit)")
        return models.gate_loop(family, p.angle, p.samples, p.slot, reparam=reparam)
    pts = np.asarray(p.points, dtype=float)
    if pts.shape[1] != family.n_params:
        raise ConfigError(f"path.points: model {config.model.id!r} takes {family.n_params}"
                          f" coordinates per point, got {pts.shape[1]}")
    knots = np.linspace(0.0, 1.0, len(pts))

    def poly(s):
        s = reparam(s) if reparam is not None else s
        return np.array([np.interp(s, knots, pts[:, i]) for i in range(pts.shape[1])])
    try:
        return ParameterPath.from_function(poly, p.samples, closed=p.closed, period=family.period)
    except DomainError as exc:
        raise ConfigError(f"path.points: {exc}") from None


def parse_op(label: str, n_code: int) -> np.ndarray:
    """'XZ' -> sigma1 (x) sigma3 on ``n_code`` code levels; '+', '-' are sigma_plus/minus."""
    qubits = int(round(math.log2(n_code))) if n_code > 1 else 1
    if len(label) != qubits or any(c not in OP_CHARS for c in label.upper()):
        raise ConfigError(f"noise op {label!r}: expected {qubits} characters from "
                          f"{''.join(OP_CHARS)}")
    return core.tensor(*(OP_CHARS[c] for c in label.upper()))


def code_ops(config: RunConfig, family: IsospectralFamily) -> list[np.ndarray]:
    """Noise operators on the code space (or the full space for spin_half)."""
    n = family.degeneracy if family.degeneracy > 1 else family.dim
    out = []
    for i, spec in enumerate(config.noise):
        try:
            out.append(parse_op(spec.op, n))
        except ConfigError as exc:
            raise ConfigError(f"noise[{i}].op: {exc}") from None
    return out


def lab_ops(config: RunConfig, family: IsospectralFamily) -> list[np.ndarray]:
    ops = code_ops(config, family)
    return [math.sqrt(s.rate) * (models.lift_code_operator(family, o) if family.degeneracy > 1
                                 else o)
            for s, o in zip(config.noise, ops)]


def initial_state(config: RunConfig, family: IsospectralFamily, path: ParameterPath):
    """(full-space state, code coordinates) at the start of the path."""
    n = family.degeneracy
    if config.initial_state is None:
        c = np.ones(n, dtype=complex)
    else:
        if len(config.initial_state) != n:
            raise ConfigError(f"initial_state: model {config.model.id!r} has {n} code levels")
        c = np.array([complex(re, im) for re, im in config.initial_state])
    c = core.normalized(c)
    frame = family.frame_unitary(path.at(0.0)) @ family.basis
    return frame @ c, c


# -- modes -----------------------------------------------------------------

@dataclass
class _Setup:
    family: IsospectralFamily
    path: ParameterPath
    psi0: np.ndarray
    model: LindbladModel
    scheme: jumps.JumpScheme
    reference: np.ndarray  # noise-free final state


def _setup(config: RunConfig) -> _Setup:
    family = build_family(config)
    path = build_path(config, family)
    psi0, _ = initial_state(config, family, path)
    model = LindbladModel(lab_ops(config, family), family=family, path=path,
                          total_time=config.total_time)
    if config.dt > config.total_time:
        raise ConfigError("dt: must not exceed total_time")
    scheme = jumps.build_scheme(model, config.dt, config.total_time)
    clean = jumps.build_scheme(model.with_ops([]), config.dt, config.total_time)
    ref = core.normalized(jumps.nojump_propagate(clean, psi0))
    return _Setup(family, path, psi0, model, scheme, ref)


def _state_fidelity(ref: np.ndarray, psi: np.ndarray) -> float:
    nrm = float(np.real(np.vdot(psi, psi)))
    if nrm == 0.0:
        return 0.0
    return float(abs(np.vdot(ref, psi)) ** 2 / nrm)


def _row(index: int, record: jumps.TrajectoryRecord, ref: np.ndarray) -> dict:
    return {"trajectory": index, "jump_count": record.jump_count,
            "jump_steps": [int(m) for m, _ in record.jump_sequence],
            "jump_channels": [int(k) for _, k in record.jump_sequence],
            "weight": float(record.weight),
            "fidelity": _state_fidelity(ref, record.final_state)}


def _scheme_diagnostics(scheme: jumps.JumpScheme) -> dict:
    return {"steps": scheme.steps, "dt": scheme.dt,
            "completeness_defect": scheme.completeness_defect(),
            "completeness_bound": scheme.completeness_bound()}


def _oracle(s: _Setup, config: RunConfig) -> np.ndarray:
    return evolve(s.model, core.projector(s.psi0), config.total_time, config.dt)


def _closed_holonomy(s: _Setup) -> tuple[dict, np.ndarray]:
    u = holonomy(s.family, s.path).u
    return {"holonomy": matrix_to_json(u)}, u


def _run_nojump(config: RunConfig, report: RunReport):
    s = _setup(config)
    res, u = _closed_holonomy(s)
    nj = jumps.nojump_holonomy(s.scheme, u)
    n = s.family.degeneracy
    sub = nj.subspace_map
    mag = nj.visibility.magnitude
    fid = float(min(1.0, abs(np.trace(u.conj().T @ sub)) / (n * mag))) if mag > 0 else 0.0
    res.update({
        "subspace_map": matrix_to_json(sub),
        "fidelity": fid,
        "distance_to_scaled_holonomy": nj.distance,
    })
    final = jumps.nojump_propagate(s.scheme, s.psi0)
    record = jumps.TrajectoryRecord((), final, float(np.real(np.vdot(final, final))))
    report.trajectories.append(_row(0, record, s.reference))
    report.diagnostics.update(_scheme_diagnostics(s.scheme))
    report.diagnostics.update({
        "leakage": nj.leakage,
        "visibility": {"magnitude": mag, "kappa_class": nj.visibility.model_class.value,
                       "predicted": nj.visibility.predicted,
                       "literal_magnitude": nj.visibility.literal_magnitude,
                       "exponent_sign": nj.visibility.exponent_sign},
    })
    report.results.update(res)


def _run_enumerate(config: RunConfig, report: RunReport):
    s = _setup(config)
    rho, weights = jumps.enumerated_density(s.scheme, s.psi0, config.max_jumps)
    oracle = _oracle(s, config)
    report.results.update({
        "density": matrix_to_json(rho), "oracle_density": matrix_to_json(oracle),
        "trace_distance_vs_oracle": core.trace_distance(rho, oracle),
        "weights_by_jump_count": weights, "captured_weight": float(sum(weights)),
    })
    count = jumps.trajectory_count(s.scheme.steps, s.scheme.channels, config.max_jumps)
    listed = count <= config.max_records
    if listed:
        records = jumps.enumerate_trajectories(s.scheme, s.psi0, config.max_jumps,
                                               budget=config.max_records)
        report.trajectories.extend(_row(i, r, s.reference) for i, r in enumerate(records))
    report.diagnostics.update(_scheme_diagnostics(s.scheme))
    report.diagnostics.update({"trajectory_count": count, "trajectories_listed": listed})


def _run_montecarlo(config: RunConfig, report: RunReport):
    s = _setup(config)
    records = jumps.sample_trajectories(s.scheme, s.psi0, config.n_traj, config.seed)
    rho = jumps.reconstruct_density(records)
    oracle = _oracle(s, config)
    counts = [r.jump_count for r in records]
    report.results.update({
        "density": matrix_to_json(rho), "oracle_density": matrix_to_json(oracle),
        "trace_distance_vs_oracle": core.trace_distance(rho, oracle),
        "mean_jump_count": float(np.mean(counts)),
    })
    report.trajectories.extend(_row(i, r, s.reference) for i, r in enumerate(records))
    report.diagnostics.update(_scheme_diagnostics(s.scheme))


def _run_master(config: RunConfig, report: RunReport):
    s = _setup(config)
    rho = _oracle(s, config)
    report.results.update({
        "density": matrix_to_json(rho),
        "purity": float(np.real(np.trace(rho @ rho))),
        "fidelity": float(np.real(np.vdot(s.reference, rho @ s.reference))),
    })
    kc = classify_kappa(s.model)
    report.diagnostics.update({"kappa_class": kc.kind.value, "kappa_alpha": kc.alpha})


def build_gate(config: RunConfig) -> gates.GateSpec:
    p = config.path
    if p.kind != "gate" or config.model.id == "spin_half":
        raise ConfigError("robustness mode needs a gate path on the qubit or two_qubit model")
    reparam = models.smooth_ramp if p.ramp == "smooth" else None
    if config.model.id == "qubit":
        if p.slot > 2:
            raise ConfigError("path.slot: qubit gates use slots 0, 1, 2")
        return gates.single_qubit_gate(p.slot + 1, p.angle, p.samples, config.model.epsilon,
                                       reparam=reparam)
    if p.slot != 0:
        raise ConfigError("path.slot: the two_qubit model has a single slot 0")
    return gates.two_qubit_gate(config.model.axes, p.angle, p.samples, config.model.epsilon,
                                reparam=reparam)


def _run_robustness(config: RunConfig, report: RunReport):
    if not config.noise:
        raise ConfigError("noise: robustness mode needs at least one noise entry")
    gate = build_gate(config)
    ops = code_ops(config, gate.family)
    report.results.update({"gate": gate.label, "ideal": matrix_to_json(gate.ideal()),
                           "holonomy": matrix_to_json(holonomy(gate.family, gate.loop).u),
                           "closed_system_error": gate.closed_system_error()})
    for spec, op in zip(config.noise, ops):
        channel = gates.ErrorChannel((op,), spec.rate, (spec.op,))
        for fractions in config.jumps:
            pattern = [(gate.index_at(f), 0) for f in fractions]
            r = gates.analyze_gate(gate, channel, pattern, total_time=config.total_time)
            entry = {
                "op": spec.op, "rate": spec.rate, "fractions": list(fractions),
                "jump_indices": [i for i, _ in r.jump_pattern],
                "verdict": r.verdict.value, "fidelity": r.fidelity,
                "effective_angle": r.effective_angle,
                "segment_angles": list(r.segment_angles),
                "actual": matrix_to_json(r.actual),
                "predicted": None if r.predicted is None else matrix_to_json(r.predicted),
                "singular_values": (None if r.singular_values is None
                                    else [float(x) for x in r.singular_values]),
                "kappa_class": r.kappa.kind.value,
                "visibility": r.visibility,
            }
            report.verdicts.append(entry)


_MODES = {
    "nojump": _run_nojump, "enumerate": _run_enumerate, "montecarlo": _run_montecarlo,
    "master": _run_master, "robustness": _run_robustness,
}


def run(config: RunConfig) -> RunReport:
    """Execute the configured mode. Deterministic given the config (and its seed)."""
    start = time.perf_counter()
    report = RunReport(config=config.to_dict(), mode=config.mode)
    _MODES[config.mode](config, report)
    report.timing["wall_clock_s"] = time.perf_counter() - start
    return report
