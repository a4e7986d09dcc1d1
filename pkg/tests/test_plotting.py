import numpy as np

from kpzlab import plotting
from kpzlab.grid import GridSpec, LineEnsemble, write_csv


def test_lines_tidy_and_figure(tmp_path):
    e = LineEnsemble(GridSpec.from_count(-1.0, 0.5, 5), np.arange(10.0).reshape(2, 5))
    write_csv(e, tmp_path / "ensemble.csv", label="y")
    out = plotting.lines_tidy(tmp_path / "ensemble.csv", tmp_path)
    header, data = plotting.read_columns(out)
    assert header == ["y", "line_index", "value"] and data.shape == (10, 3)
    assert data[5].tolist() == [-1.0, 2.0, 5.0]
    plotting.plot_lines(out, tmp_path / "lines.png")
    assert (tmp_path / "lines.png").read_bytes()[:4] == b"\x89PNG"


def test_qv_histogram(tmp_path):
    out = plotting.qv_histogram({"flat": [1.9, 2.0, 2.1], "rough": [2.0, 2.0, 2.2]}, tmp_path, bins=4)
    lines = out.read_text().splitlines()
    assert lines[0] == "ic,bin_left,bin_right,count" and len(lines) == 9
    plotting.plot_qv_hist(out, tmp_path / "qv.png", target=2.0)
    plotting.write_script(tmp_path)
    assert "qv_hist.csv" in (tmp_path / "plot.py").read_text()
