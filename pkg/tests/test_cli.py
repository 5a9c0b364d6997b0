import json
import os

import numpy as np
import pytest

from adialab import cli, report
from adialab.errors import IoFailure


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


# ---------------------------------------------------------------- emission

def test_emit_plot_data_files(tmp_path):
    target = tmp_path / "series.csv"
    files = report.emit_plot_data(
        {"t": np.linspace(0, 1, 5), "value": np.linspace(1, 2, 5) ** 2},
        str(target), {"xlabel": "t", "ylabel": "value"})
    assert sorted(os.path.basename(f) for f in files) == [
        "series.csv", "series.json", "series.png"]
    lines = _read(target).decode().splitlines()
    assert lines[0] == "t,value"
    assert len(lines) == 6
    meta = json.loads(_read(tmp_path / "series.json"))
    assert meta["abscissa"] == "t"


def test_emit_rejects_empty_series(tmp_path):
    with pytest.raises(IoFailure):
        report.emit_plot_data({}, str(tmp_path / "x.csv"))
    with pytest.raises(IoFailure):
        report.emit_plot_data({"t": np.array([])}, str(tmp_path / "x.csv"))


def test_seventeen_digit_serialization():
    assert report.fmt(1 / 3) == "0.33333333333333331"
    assert report.fmt(np.float64(2.0)) == "2"


# ---------------------------------------------------------------- CLI runs

def _write_config(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def test_simulate_requires_epsilon(tmp_path):
    cfg = _write_config(tmp_path, {
        "kind": "simulate", "model": {"name": "two_level_flip"},
        "numeric": {"t_range": [0, 0.2]},
        "output": {"directory": str(tmp_path / "out")}})
    assert cli.main(["run", cfg]) == 2
    manifest = json.loads(_read(tmp_path / "out" / "manifest.json"))
    assert manifest["status"] == "failed"
    assert manifest["failure"]["stage"] == "ConfigInvalid"


def test_unknown_kind_rejected(tmp_path):
    cfg = _write_config(tmp_path, {"kind": "nonsense",
                                   "output": {"directory": str(tmp_path / "o")}})
    assert cli.main(["run", cfg]) == 2


def test_sweep_two_level_exact(tmp_path):
    out = tmp_path / "out"
    cfg = _write_config(tmp_path, {
        "kind": "sweep",
        "model": {"name": "two_level_flip",
                  "gamma": {"kind": "sinusoid", "c0": 1, "c1": 0.5, "c2": 1}},
        "numeric": {"t_range": [0, 1], "epsilon_list": [0.1, 0.05, 0.025],
                    "dt_factor": 320, "path_step": 0.005},
        "output": {"directory": str(out), "figures": False}})
    assert cli.main(["run", cfg]) == 0
    rows = _read(out / "adiabatic_error.csv").decode().splitlines()
    head = rows[0].split(",")
    idx = head.index("sup_error")
    sups = [float(r.split(",")[idx]) for r in rows[1:]]
    assert all(s <= 1e-8 for s in sups)
    manifest = json.loads(_read(out / "manifest.json"))
    assert manifest["status"] == "ok"


def test_bifurcate_emits_tau_and_counts(tmp_path):
    out = tmp_path / "out"
    cfg = _write_config(tmp_path, {
        "kind": "bifurcate", "model": {"name": "rotation_bifurcation"},
        "numeric": {"t_range": [0.05, 1.0], "grid_size": 100001,
                    "count_samples": 12},
        "output": {"directory": str(out), "figures": False}})
    assert cli.main(["run", cfg]) == 0
    payload = json.loads(_read(out / "tau.json"))
    assert 0 < payload["tau"] < 1
    counts = {c for _, c in payload["counts"]}
    assert counts == {1, 3}


def test_eigenpath_csv_columns(tmp_path):
    out = tmp_path / "out"
    cfg = _write_config(tmp_path, {
        "kind": "eigenpath",
        "model": {"name": "double_well_mcww", "kappa": 0.25, "Omega": 1.0,
                  "detuning": {"kind": "linear", "c0": 0.1, "c1": 0.1}},
        "numeric": {"t_range": [0, 0.5], "path_step": 0.01},
        "output": {"directory": str(out), "figures": False}})
    assert cli.main(["run", cfg]) == 0
    head = _read(out / "eigenpath.csv").decode().splitlines()[0].split(",")
    assert head == ["t", "re_w1", "im_w1", "re_w2", "im_w2", "lambda",
                    "phase", "residual", "phase_defect"]


def test_reproducibility_byte_identical(tmp_path):
    blobs = []
    for run_dir in ("a", "b"):
        out = tmp_path / run_dir
        cfg = _write_config(tmp_path, {
            "kind": "simulate",
            "model": {"name": "two_level_flip"},
            "v0": [[0.8, 0.0], [0.6, 0.0]],
            "numeric": {"t_range": [0, 0.3], "epsilon": 0.1},
            "output": {"directory": str(out), "figures": False}},
            name=f"cfg_{run_dir}.json")
        assert cli.main(["run", cfg, "--seed", "3"]) == 0
        blobs.append(_read(out / "propagation.csv"))
    assert blobs[0] == blobs[1]


def test_discriminant_kind_deterministic(tmp_path):
    out = tmp_path / "out"
    cfg = _write_config(tmp_path, {
        "kind": "discriminant", "numeric": {"dim": 5, "max_draws": 50000},
        "output": {"directory": str(out), "figures": False}})
    assert cli.main(["run", cfg, "--seed", "2026"]) == 0
    payload = json.loads(_read(out / "discriminant.json"))
    assert payload["discriminant"] < -0.1
    assert payload["max_imag"] > 1e-3


def test_jobs_fanout_matches_sequential(tmp_path):
    blobs = []
    for run_dir, jobs in (("seq", "1"), ("par", "3")):
        out = tmp_path / run_dir
        cfg = _write_config(tmp_path, {
            "kind": "sweep",
            "model": {"name": "double_well_mcww", "kappa": 0.25, "Omega": 1.0,
                      "detuning": {"kind": "linear", "c0": 0.1, "c1": 0.1}},
            "numeric": {"t_range": [0, 0.2], "epsilon_list": [0.1, 0.05],
                        "dt_factor": 40, "path_step": 0.01},
            "output": {"directory": str(out), "figures": False}},
            name=f"cfg_{run_dir}.json")
        assert cli.main(["run", cfg, "--jobs", jobs]) == 0
        blobs.append(_read(out / "adiabatic_error.csv"))
    assert blobs[0] == blobs[1]


def test_spectrum_kind_invariants(tmp_path):
    out = tmp_path / "out"
    cfg = _write_config(tmp_path, {
        "kind": "spectrum",
        "model": {"name": "double_well_mcww", "kappa": 0.25, "Omega": 1.0,
                  "detuning": {"kind": "linear", "c0": 0.1, "c1": 0.1}},
        "numeric": {"t_range": [0, 0.3], "path_step": 0.05},
        "output": {"directory": str(out), "figures": False}})
    assert cli.main(["run", cfg]) == 0
    head = _read(out / "spectrum.csv").decode().splitlines()[0].split(",")
    assert head == ["t", "re_ell", "im_ell", "condition", "nilpotent_norm",
                    "cluster"]
