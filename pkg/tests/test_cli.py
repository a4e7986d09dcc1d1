import json

import numpy as np
import pytest

from kpzlab import kpz
from kpzlab.cli import main, read_config
from kpzlab.grid import read_csv


def run(tmp_path, *args):
    return main([str(a) for a in args])


def test_simulate_contract(tmp_path):
    out = tmp_path / "run1"
    assert run(tmp_path, "simulate", "--n", 100, "--depth-k", 4, "--y-range", "-2:2", "--step", 0.01,
               "--seed", 7, "--out", out) == 0
    assert (out / "ensemble.csv").is_file() and (out / "meta.json").is_file()
    e = read_csv(out / "ensemble.csv")
    assert e.k == 6 and e.grid.left >= -2 and e.grid.right <= 2
    meta = json.loads((out / "meta.json").read_text())
    assert meta["config"]["seed"] == 7 and meta["sheet"]["depth_k"] == 4


def test_simulate_is_byte_deterministic(tmp_path):
    for d in ("a", "b"):
        assert run(tmp_path, "simulate", "--n", 20, "--step", 0.05, "--seed", 3, "--out", tmp_path / d) == 0
    for f in ("ensemble.csv", "meta.json", "sheet.npz"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_missing_out_and_bad_config(tmp_path, capsys):
    assert run(tmp_path, "simulate", "--n", 10) == 2
    assert "--out" in capsys.readouterr().err
    assert run(tmp_path, "simulate", "--y-range", "2:1", "--out", tmp_path / "x") == 2
    assert run(tmp_path, "simulate", "--config", tmp_path / "none.cfg", "--out", tmp_path / "x") == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 12\nstep = 0.05\nseed = 9\ny-range = -0.5:0.5\n")
    assert read_config(str(cfg))["y_range"] == "-0.5:0.5"
    assert run(tmp_path, "simulate", "--config", cfg, "--seed", 10, "--out", tmp_path / "c") == 0
    meta = json.loads((tmp_path / "c" / "meta.json").read_text())
    assert meta["config"]["n"] == 12 and meta["config"]["seed"] == 10
    cfg.write_text("bogus = 1\n")
    assert run(tmp_path, "simulate", "--config", cfg, "--out", tmp_path / "d") == 2


def test_resource_error_exit(tmp_path):
    assert run(tmp_path, "simulate", "--n", 200000, "--step", 0.001, "--out", tmp_path / "big") == 3


def test_evolve_narrow_wedge_validated(tmp_path):
    out = tmp_path / "ev"
    assert run(tmp_path, "evolve", "--ic", "narrow-wedge", "--t", 1, "--n", 30, "--step", 0.05,
               "--out", out) == 0
    info = json.loads((out / "window.json").read_text())
    assert info["narrow_wedge_top_line_check"] is True
    assert (out / "profile.csv").read_text().splitlines()[0] == "y,h"


def test_evolve_file_ic_scaled(tmp_path):
    x = np.linspace(-0.5, 0.5, 11)
    kpz.write_ic_csv(x, -x ** 2, tmp_path / "my_ic.csv")
    out = tmp_path / "ev"
    assert run(tmp_path, "evolve", "--ic", f"file:{tmp_path / 'my_ic.csv'}", "--t", 0.5, "--n", 30,
               "--step", 0.05, "--out", out) == 0
    info = json.loads((out / "window.json").read_text())
    assert info["window"] == [-0.5, 0.5]
    assert info["lattice_step"] == pytest.approx(0.5 ** (2 / 3) * info["sheet"]["delta"])


def test_evolve_non_finitary_exit(tmp_path, capsys):
    assert run(tmp_path, "evolve", "--ic", "parabola:1.0", "--t", 1, "--out", tmp_path / "e") == 4
    assert "-inf" in capsys.readouterr().err


def test_evolve_on_saved_sheet(tmp_path):
    assert run(tmp_path, "simulate", "--n", 20, "--step", 0.05, "--y-range", "-1:1", "--out", tmp_path / "s") == 0
    assert run(tmp_path, "evolve", "--sheet", tmp_path / "s", "--y-range", "-0.5:0.5", "--out", tmp_path / "e") == 0
    assert run(tmp_path, "evolve", "--sheet", tmp_path / "s", "--y-range", "-2:0.5", "--out", tmp_path / "f") == 2


def test_verify_and_worker_invariance(tmp_path):
    args = ["verify", "--suite", "algebraic", "--instances", 30, "--n", 20, "--step", 0.05]
    assert run(tmp_path, *args, "--workers", 1, "--out", tmp_path / "w1") == 0
    assert run(tmp_path, *args, "--workers", 2, "--out", tmp_path / "w2") == 0
    a = json.loads((tmp_path / "w1" / "report.json").read_text())
    b = json.loads((tmp_path / "w2" / "report.json").read_text())
    assert a.pop("timing")["workers"] == 1 and b.pop("timing")["workers"] == 2
    assert a == b and a["pass"] is True


def test_verify_failure_exit(tmp_path, capsys):
    # too coarse a lattice for the quadratic-variation band
    code = run(tmp_path, "verify", "--suite", "statistical", "--replicas", 50, "--two-step-replicas", 50,
               "--n", 48, "--step", 0.05, "--oversample", 1, "--depth-k", 6, "--out", tmp_path / "v")
    assert code == 1
    assert "FAIL qv_mean_flat" in capsys.readouterr().err
    assert run(tmp_path, "plotdata", tmp_path / "v") == 0
    assert (tmp_path / "v" / "qv_hist.csv").read_text().startswith("ic,bin_left,bin_right,count")
    assert (tmp_path / "v" / "qv_hist.png").is_file() and (tmp_path / "v" / "plot.py").is_file()


def test_plotdata(tmp_path):
    assert run(tmp_path, "simulate", "--n", 10, "--step", 0.05, "--out", tmp_path / "s") == 0
    assert run(tmp_path, "plotdata", tmp_path / "s") == 0
    head = (tmp_path / "s" / "lines.csv").read_text().splitlines()[0]
    assert head == "y,line_index,value" and (tmp_path / "s" / "lines.png").is_file()
    (tmp_path / "empty").mkdir()
    assert run(tmp_path, "plotdata", tmp_path / "empty") == 2
    assert run(tmp_path, "plotdata", tmp_path / "missing") == 2
