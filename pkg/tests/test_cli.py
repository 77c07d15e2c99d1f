import copy
import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from holojump import core
from holojump.cli import EXIT_CONFIG, EXIT_ENGINE, EXIT_OK, main
from holojump.config import DEFAULT_DT, DEFAULT_SEED, parse_config
from holojump.errors import ConfigError
from holojump.runner import (TABLE_COLUMNS, RunReport, dumps_report, emit, loads_report,
                             matrix_from_json, run)

BASE = {
    "model": {"id": "qubit", "epsilon": 1.0},
    "path": {"kind": "gate", "angle": 0.7, "samples": 200},
    "noise": [{"op": "Z", "rate": 0.1}],
    "mode": "enumerate",
    "max_jumps": 2,
    "total_time": 1.0,
}


def cfg(**overrides):
    d = copy.deepcopy(BASE)
    d.update(overrides)
    return json.dumps(d)


def test_minimal_config_defaults():
    c = parse_config('{"model": {"id": "spin_half"}, "path": {"kind": "latitude", "theta": 1.0},'
                     ' "mode": "nojump"}')
    assert c.dt == DEFAULT_DT == 1e-3
    assert c.seed == DEFAULT_SEED == 0
    assert c.noise == ()
    assert c.output.formats == ("structured",)
    assert c.path.samples == 400


def test_negative_rate_names_field():
    with pytest.raises(ConfigError, match=r"noise\[0\]\.rate"):
        parse_config(cfg(noise=[{"op": "Z", "rate": -0.1}]))


def test_unknown_key_suggestion():
    d = copy.deepcopy(BASE)
    d["modle"] = d.pop("model")
    with pytest.raises(ConfigError, match="did you mean.*'model'"):
        parse_config(json.dumps(d))


def test_unknown_model_suggestion():
    with pytest.raises(ConfigError, match="model.id.*did you mean 'qubit'"):
        parse_config(cfg(model={"id": "qbit"}))


def test_syntax_error_has_line_context():
    with pytest.raises(ConfigError, match="line 3, column"):
        parse_config('{\n"mode": "master",\n"dt": 1e-3e\n}')


@pytest.mark.parametrize("field", ["model", "path", "mode"])
def test_missing_required(field):
    d = copy.deepcopy(BASE)
    del d[field]
    with pytest.raises(ConfigError, match=f"{field}: missing required field"):
        parse_config(json.dumps(d))


# one rejecting case for every RunConfig field
REJECTS = [
    ({"model": {"id": "qubit", "epsilon": -1}}, "model.epsilon"),
    ({"model": {"id": "qubit", "epsilon": "big"}}, "model.epsilon"),
    ({"model": {"id": "two_qubit", "axes": [1, 4]}}, "model.axes"),
    ({"model": {"id": "qubit", "colour": 1}}, "model.colour"),
    ({"model": "qubit"}, "model"),
    ({"path": {"kind": "spiral"}}, "path.kind"),
    ({"path": {"kind": "gate", "angle": 0.7, "samples": 0}}, "path.samples"),
    ({"path": {"kind": "gate", "angle": 0.7, "samples": 2.5}}, "path.samples"),
    ({"path": {"kind": "latitude"}}, "path.theta"),
    ({"path": {"kind": "latitude", "theta": -1}}, "path.theta"),
    ({"path": {"kind": "gate"}}, "path.angle"),
    ({"path": {"kind": "gate", "angle": 7.0}}, "path.angle"),
    ({"path": {"kind": "gate", "angle": 0.7, "slot": -1}}, "path.slot"),
    ({"path": {"kind": "gate", "angle": 0.7, "ramp": "fast"}}, "path.ramp"),
    ({"path": {"kind": "waypoints", "points": [[0, 0]]}}, "path.points"),
    ({"path": {"kind": "waypoints", "points": [[0, 0], [1]]}}, "path.points"),
    ({"path": {"kind": "waypoints", "points": [[0, 0], [0, "a"]]}}, r"path.points\[1\]"),
    ({"path": {"kind": "waypoints", "points": [[0, 0], [1, 0]], "closed": "yes"}}, "path.closed"),
    ({"noise": {"op": "Z"}}, "noise"),
    ({"noise": [{"op": "", "rate": 0.1}]}, r"noise\[0\]\.op"),
    ({"noise": [{"op": "Z"}]}, r"noise\[0\]\.rate"),
    ({"noise": [{"op": "Z", "rate": float("nan")}]}, r"noise\[0\]\.rate"),
    ({"mode": "quantum"}, "mode"),
    ({"max_jumps": -1}, "max_jumps"),
    ({"n_traj": 0}, "n_traj"),
    ({"dt": 0}, "dt"),
    ({"dt": "1e-3"}, "dt"),
    ({"total_time": -2}, "total_time"),
    ({"seed": 1.5}, "seed"),
    ({"seed": True}, "seed"),
    ({"initial_state": [[0, 0], [0, 0]]}, "initial_state"),
    ({"initial_state": [[1]]}, r"initial_state\[0\]"),
    ({"jumps": [[1.5]]}, r"jumps\[0\]"),
    ({"jumps": "half"}, "jumps"),
    ({"max_records": -5}, "max_records"),
    ({"output": {"dir": ""}}, "output.dir"),
    ({"output": {"formats": ["xml"]}}, r"output.formats\[0\]"),
    ({"output": {"formats": []}}, "output.formats"),
]


@pytest.mark.parametrize("override,field", REJECTS)
def test_field_rejected(override, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(cfg(**override))


def test_top_level_must_be_object():
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")


def test_runtime_validation_errors():
    bad = [
        cfg(noise=[{"op": "ZZ", "rate": 0.1}]),
        cfg(noise=[{"op": "Q", "rate": 0.1}]),
        cfg(path={"kind": "gate", "angle": 0.7, "slot": 5}),
        cfg(model={"id": "spin_half"}, path={"kind": "gate", "angle": 0.7}),
        cfg(path={"kind": "waypoints", "points": [[0, 0], [1, 0]]}),
        cfg(initial_state=[[1, 0]]),
        cfg(dt=2.0),
        cfg(mode="robustness", noise=[]),
        cfg(mode="robustness", path={"kind": "latitude", "theta": 1.0}),
    ]
    for text in bad:
        with pytest.raises(ConfigError):
            run(parse_config(text))


def test_nojump_without_noise_reproduces_gate():
    c = parse_config(cfg(mode="nojump", noise=[], total_time=300.0, dt=0.01,
                         model={"id": "qubit", "epsilon": 2.0},
                         path={"kind": "gate", "angle": 0.7, "samples": 300, "ramp": "smooth"}))
    r = run(c)
    u = matrix_from_json(r.results["holonomy"])
    ideal = np.array([[math.cos(0.7), 1j * math.sin(0.7)], [1j * math.sin(0.7), math.cos(0.7)]])
    assert np.allclose(u, ideal, atol=1e-10)
    assert r.results["fidelity"] == pytest.approx(1.0, abs=1e-6)
    assert r.diagnostics["leakage"] < 1e-4
    assert r.diagnostics["visibility"]["magnitude"] == pytest.approx(1.0, abs=1e-9)
    assert len(r.trajectories) == 1 and r.trajectories[0]["jump_count"] == 0


def test_master_vs_enumerate():
    c = parse_config(cfg())
    enum = run(c)
    master = run(c.replace(mode="master"))
    rho_e = matrix_from_json(enum.results["density"])
    rho_m = matrix_from_json(master.results["density"])
    assert enum.results["trace_distance_vs_oracle"] <= 1e-3
    assert core.trace_distance(rho_e, rho_m) <= 1e-3
    d = enum.diagnostics
    assert d["completeness_defect"] <= d["completeness_bound"]


def test_montecarlo_mode():
    r = run(parse_config(cfg(mode="montecarlo", n_traj=400, seed=3)))
    assert len(r.trajectories) == 400
    assert r.results["trace_distance_vs_oracle"] < 0.05
    assert sum(t["weight"] for t in r.trajectories) == pytest.approx(1.0)


def test_enumerate_lists_records_within_budget():
    r = run(parse_config(cfg(path={"kind": "gate", "angle": 0.7, "samples": 20},
                             dt=0.05, max_records=1000)))
    assert r.diagnostics["trajectories_listed"]
    assert len(r.trajectories) == 1 + 20 + 190
    assert [t["jump_count"] for t in r.trajectories[:3]] == [0, 1, 2]


def test_robustness_mode_verdicts():
    r = run(parse_config(cfg(mode="robustness",
                             noise=[{"op": "Z", "rate": 0.1}, {"op": "X", "rate": 0.1},
                                    {"op": "-", "rate": 0.1}],
                             jumps=[[], [0.25]])))
    verdicts = [(v["op"], tuple(v["fractions"]), v["verdict"]) for v in r.verdicts]
    assert ("Z", (0.25,), "sign_flip_law") in verdicts
    assert ("X", (0.25,), "robust") in verdicts
    assert ("-", (0.25,), "gate_destroyed") in verdicts
    flip = next(v for v in r.verdicts if v["op"] == "Z" and v["fractions"])
    # theta_1 - theta_2 = 0.25*0.7 - 0.75*0.7
    assert flip["effective_angle"] == pytest.approx(-0.35, abs=1e-10)


def test_spin_half_and_two_qubit_runs():
    r = run(parse_config(cfg(model={"id": "spin_half"}, noise=[{"op": "X", "rate": 0.1}],
                             path={"kind": "latitude", "theta": 1.0, "samples": 100},
                             mode="master")))
    assert r.results["purity"] < 1
    r = run(parse_config(cfg(model={"id": "two_qubit", "axes": [1, 1]},
                             noise=[{"op": "YI", "rate": 0.1}], mode="robustness",
                             jumps=[[0.5]])))
    assert r.verdicts[0]["verdict"] == "sign_flip_law"


def test_waypoint_path_runs():
    r = run(parse_config(cfg(model={"id": "spin_half"}, mode="master", noise=[],
                             path={"kind": "waypoints", "samples": 50,
                                   "points": [[0.2, 0.0], [0.8, 1.0], [0.2, 2.0]]})))
    assert r.results["purity"] == pytest.approx(1.0)


def test_report_round_trip_bit_for_bit():
    r = run(parse_config(cfg(mode="montecarlo", n_traj=50)))
    text = dumps_report(r)
    back = loads_report(text)
    assert back.to_dict() == r.to_dict()
    assert dumps_report(back) == text


def test_seventeen_digit_floats():
    r = RunReport(config={}, mode="master", results={"x": 0.1, "y": 1.0, "z": 1 / 3})
    text = dumps_report(r)
    assert "0.10000000000000001" in text and "1.0" in text
    assert loads_report(text).results["z"] == 1 / 3


def test_determinism_identical_bytes():
    c = parse_config(cfg(mode="montecarlo", n_traj=100, seed=42))
    a = dumps_report(run(c), include_timing=False)
    b = dumps_report(run(c), include_timing=False)
    assert a == b
    other = dumps_report(run(c.replace(seed=43)), include_timing=False)
    assert other != a


def test_emit_tabular_header_only(tmp_path):
    r = RunReport(config={}, mode="master")
    (path,) = emit(r, tmp_path, ["tabular"])
    with open(path) as fh:
        assert fh.read() == ",".join(TABLE_COLUMNS) + "\n"


def test_emit_single_nojump_row(tmp_path):
    r = RunReport(config={}, mode="nojump", trajectories=[
        {"trajectory": 0, "jump_count": 0, "jump_steps": [], "jump_channels": [],
         "weight": 0.875, "fidelity": 1.0}])
    (path,) = emit(r, tmp_path, ["tabular"])
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 1
    assert rows[0]["jump_count"] == "0" and float(rows[0]["weight"]) == 0.875


def test_emit_structured_round_trip(tmp_path):
    r = run(parse_config(cfg(mode="master")))
    (path,) = emit(r, tmp_path / "sub", ["structured"])
    assert loads_report(open(path).read()).to_dict() == r.to_dict()


def test_emit_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit(RunReport(config={}, mode="master"), blocker, ["structured"])


def write(tmp_path, text, name="run.json"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_success_and_overrides(tmp_path, capsys):
    path = write(tmp_path, cfg(mode="master"))
    out = tmp_path / "out"
    assert main(["run", path, "--out", str(out), "--seed", "7", "--mode", "montecarlo"]) == EXIT_OK
    rep = loads_report((out / "report.json").read_text())
    assert rep.mode == "montecarlo" and rep.config["seed"] == 7
    assert rep.config["output"]["dir"] == str(out)


def test_cli_determinism_files(tmp_path):
    path = write(tmp_path, cfg(mode="montecarlo", n_traj=60,
                               output={"dir": str(tmp_path / "o"),
                                       "formats": ["structured", "tabular"]}))
    texts = []
    for _ in range(2):
        assert main(["run", path]) == EXIT_OK
        rep = loads_report((tmp_path / "o" / "report.json").read_text())
        texts.append((dumps_report(rep, include_timing=False),
                      (tmp_path / "o" / "trajectories.csv").read_bytes()))
    assert texts[0] == texts[1]


def test_cli_validation_exit_code(tmp_path, capsys):
    path = write(tmp_path, cfg(noise=[{"op": "Z", "rate": -1}]))
    assert main(["run", path]) == EXIT_CONFIG
    assert "noise[0].rate" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    path = write(tmp_path, cfg(path={"kind": "gate", "angle": 0.7, "slot": 9}), "slot.json")
    assert main(["run", path]) == EXIT_CONFIG


def test_cli_engine_error_exit_code(tmp_path, capsys):
    # RK4 step far outside its stability region: the oracle reports lost positivity
    path = write(tmp_path, cfg(mode="master", noise=[{"op": "Z", "rate": 200.0}], dt=0.02,
                               output={"dir": str(tmp_path / "o")}))
    assert main(["run", path]) == EXIT_ENGINE
    assert "engine error [lindblad]" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    path = write(tmp_path, cfg(mode="master", output={"dir": str(tmp_path / "m")}))
    proc = subprocess.run([sys.executable, "-m", "holojump", "run", path],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "m" / "report.json").exists()
