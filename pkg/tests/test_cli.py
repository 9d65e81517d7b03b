import json

import numpy as np
import pytest

from gsg.circuit import CircuitProgram, VoltageFrame, build_two_mode_chip
from gsg.cli import parse_grid, run
from gsg.compiler import BOUND_CONSTANTS
from gsg.gaussian import GaussianState, wigner
from gsg.io import dumps, fmt_float

from helpers import random_target


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def _err(capsys):
    return json.loads(capsys.readouterr().err.strip())


def test_simulate_empty_circuit(tmp_path):
    circ = _write(tmp_path / "c.json", {"n_modes": 1, "elements": []})
    out = tmp_path / "s.json"
    assert run(["simulate", circ, "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["mean"] == [0, 0] and data["cov"] == [[0.5, 0], [0, 0.5]]
    assert data["run_config"]["command"] == "simulate" and "version" in data["run_config"]


def test_simulate_oracle_and_target(tmp_path):
    prog = build_two_mode_chip(VoltageFrame(v1=0.3, v5=0.5, v9=0.3))
    circ = _write(tmp_path / "c.json", prog.to_dict())
    out = tmp_path / "s.json"
    assert run(["simulate", circ, "--oracle", "--cutoff", "20", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["oracle"]["max_cov_diff"] < 1e-5 and data["oracle"]["max_mean_diff"] < 1e-5
    assert data["full_state"]["n_modes"] == 3 and data["n_modes"] == 2


def test_compile_then_simulate(tmp_path):
    t = random_target(np.random.default_rng(17), 2)
    tgt = _write(tmp_path / "t.json", t.to_dict())
    prog = tmp_path / "p.json"
    assert run(["compile", tgt, "--out", str(prog)]) == 0
    data = json.loads(prog.read_text())
    assert data["fidelity"] >= 0.999
    assert set(data["voltages"]) >= {f"v{i}" for i in range(1, 12)}
    out = tmp_path / "s.json"
    assert run(["simulate", str(prog), "--target", tgt, "--out", str(out)]) == 0
    assert json.loads(out.read_text())["fidelity"] == pytest.approx(data["fidelity"], abs=1e-12)


def test_compile_from_moments(tmp_path):
    st = random_target(np.random.default_rng(2), 3).state()
    tgt = _write(tmp_path / "t.json", {"mean": st.mean.tolist(), "cov": st.cov.tolist()})
    out = tmp_path / "p.json"
    assert run(["compile", tgt, "--alpha0", "200", "--scheme", "reck", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["fidelity"] >= 0.999


def test_chip_with_loss(tmp_path):
    volts = _write(tmp_path / "v.json", VoltageFrame(v1=0.5, v5=0.5, v9=0.5, v11=0.5).to_dict())
    loss = _write(tmp_path / "l.json", {"mzi_loss_db": 2.2, "phase_shifter_loss_db": 0.7, "coupler_loss_db": 0.7})
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["chip", volts, "--loss", loss, "--out", str(a)]) == 0
    assert run(["chip", volts, "--loss", loss, "--mitigate", "--out", str(b)]) == 0
    lossless = tmp_path / "c.json"
    assert run(["chip", volts, "--out", str(lossless)]) == 0
    want = np.array(json.loads(lossless.read_text())["mean"])
    assert np.abs(np.array(json.loads(b.read_text())["mean"]) - want).max() < 1e-9
    assert np.abs(np.array(json.loads(a.read_text())["mean"]) - want).max() > 1e-3
    assert json.loads(a.read_text())["purity"] < 1


def test_wigner_csv(tmp_path):
    st = GaussianState(2, [0.3, 0.0, 0.0, 0.4], np.diag([0.2, 1.25, 0.5, 0.5]))
    sf = _write(tmp_path / "s.json", st.to_dict())
    out = tmp_path / "w.csv"
    assert run(["wigner", sf, "--axes", "x1,p2", "--fixed", "p1=0,x2=0", "--range", "-2:2", "--n", "5",
                "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# run_config: ") and lines[1].startswith("# fixed: ")
    assert lines[2] == "axes,x1,p2" and lines[3] == "grid,-2,2,5"
    rows = [[float(v) for v in line.split(",")] for line in lines[4:]]
    assert len(rows) == 5 and all(len(r) == 5 for r in rows)
    grid = np.linspace(-2, 2, 5)
    assert rows[1][3] == pytest.approx(wigner(st, [grid[1], 0, 0, grid[3]]), rel=1e-12)


def test_sweep_eta_csv(tmp_path):
    out = tmp_path / "e.csv"
    assert run(["sweep-eta", "--r", "1.73", "--grid", "1e-4:1e-1:7log", "--fock-checks", "0",
                "--cutoff", "10", "--out", str(out)]) == 4
    assert run(["sweep-eta", "--r", "0.5", "--grid", "1e-4:1e-1:7log", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert sum(line.startswith("#") for line in lines) == 3
    assert lines[3] == "eta,eta_db,fidelity"
    fids = [float(line.split(",")[2]) for line in lines[4:]]
    assert len(fids) == 7 and all(b <= a for a, b in zip(fids, fids[1:]))


def test_fit_bound(tmp_path):
    out = tmp_path / "f.json"
    assert run(["fit-bound", "--fidelity", "0.95", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["a"] * 1.73 ** d["b"] + d["c"] == pytest.approx(-21.5, abs=1.0)
    assert d["reference_constants"] == dict(zip("abc", BOUND_CONSTANTS[0.95]))
    assert d["run_config"]["fidelity"] == 0.95


def test_sweep_loss_csv(tmp_path):
    out = tmp_path / "l.csv"
    assert run(["sweep-loss", "--levels", "0,2.2", "--r-grid", "0:1:3", "--mitigate", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[3] == "mzi_loss_db,r,fidelity,mean_error,purity"
    rows = [[float(v) for v in line.split(",")] for line in lines[4:]]
    assert len(rows) == 6
    assert all(r[3] < 1e-9 for r in rows)
    assert rows[0][2] == 1.0


def test_determinism(tmp_path):
    outs = []
    out = tmp_path / "a.csv"
    for _ in range(2):
        assert run(["sweep-loss", "--levels", "0.1,1", "--r-grid", "0.2:0.8:4", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_stdout_when_no_out(capsys, tmp_path):
    circ = _write(tmp_path / "c.json", {"n_modes": 1, "elements": [{"kind": "Displace", "alpha": [0.5, 0], "mode": 0}]})
    assert run(["simulate", circ]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["mean"][0] == pytest.approx(0.5 * 2 ** 0.5)


def test_exit_codes(tmp_path, capsys):
    assert run(["frobnicate"]) == 2
    assert _err(capsys)["exit_code"] == 2
    assert run([]) == 2
    capsys.readouterr()
    assert run(["simulate", str(tmp_path / "missing.json")]) == 3
    assert "no such file" in _err(capsys)["message"]
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["simulate", str(bad)]) == 3
    capsys.readouterr()
    assert run(["simulate", _write(tmp_path / "x.json", {"elements": []})]) == 3
    capsys.readouterr()
    volts = _write(tmp_path / "v.json", {"v1": 2.0})
    assert run(["chip", volts]) == 4
    assert _err(capsys)["error"] == "ValueError"
    t = _write(tmp_path / "t.json", {"alpha": [[3, 0], [4, 0]], "zeta": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]], "r": [0, 0]})
    assert run(["compile", t, "--alpha0", "5"]) == 5
    assert "stage 2" in _err(capsys)["message"]
    assert run(["sweep-eta", "--r", "0.5", "--grid", "0:1:3log"]) == 4
    capsys.readouterr()
    assert run(["sweep-eta", "--r", "0.5", "--grid", "nonsense"]) == 2


def test_parse_grid():
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_grid("1e-4:1e-2:3log") == pytest.approx([1e-4, 1e-3, 1e-2])
    with pytest.raises(ValueError):
        parse_grid("1:2:0")


def test_float_format():
    assert fmt_float(0.1) == "0.10000000000000001"
    assert fmt_float(-0.0) == "0"
    assert fmt_float(float("nan")) == "null"
    assert dumps({"a": [1.5, 2], "b": None}, indent=None) == '{"a": [1.5, 2], "b": null}'
    prog = build_two_mode_chip(VoltageFrame(v1=0.1234567890123, v9=0.3))
    assert CircuitProgram.from_dict(json.loads(dumps(prog.to_dict()))) == prog
