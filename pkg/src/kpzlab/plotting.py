"""Tidy plot data and matplotlib figures for run directories."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def read_columns(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


def lines_tidy(ensemble_csv: Path, out: Path) -> Path:
    """``(y, line_index, value)`` rows from an ensemble CSV."""
    header, data = read_columns(ensemble_csv)
    rows = ((data[r, 0], c, data[r, c]) for c in range(1, data.shape[1]) for r in range(data.shape[0]))
    target = out / "lines.csv"
    _write_rows(target, ["y", "line_index", "value"], rows)
    return target


def qv_histogram(samples: dict[str, list[float]], out: Path, bins: int = 20) -> Path:
    """``(ic, bin_left, bin_right, count)`` rows for each set of QV samples."""
    rows = []
    for name, vals in sorted(samples.items()):
        counts, edges = np.histogram(np.asarray(vals), bins=bins)
        rows.extend((name, edges[i], edges[i + 1], int(counts[i])) for i in range(bins))
    target = out / "qv_hist.csv"
    _write_rows(target, ["ic", "bin_left", "bin_right", "count"], rows)
    return target


def plot_lines(lines_csv: Path, png: Path) -> None:
    _, data = read_columns(lines_csv)
    fig, ax = plt.subplots(figsize=(7, 4))
    for idx in np.unique(data[:, 1]).astype(int):
        sel = data[:, 1] == idx
        ax.plot(data[sel, 0], data[sel, 2], lw=0.8, label=f"line {idx}")
    ax.set_xlabel("y")
    ax.set_ylabel("rescaled value")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(png, dpi=120)
    plt.close(fig)


def plot_profile(profile_csv: Path, png: Path) -> None:
    _, data = read_columns(profile_csv)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(data[:, 0], data[:, 1], lw=0.8)
    ax.set_xlabel("y")
    ax.set_ylabel("h(y)")
    fig.tight_layout()
    fig.savefig(png, dpi=120)
    plt.close(fig)


def plot_qv_hist(qv_csv: Path, png: Path, target: float | None = None) -> None:
    with open(qv_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    fig, ax = plt.subplots(figsize=(7, 4))
    for name in sorted({r["ic"] for r in rows}):
        sub = [r for r in rows if r["ic"] == name]
        left = np.array([float(r["bin_left"]) for r in sub])
        right = np.array([float(r["bin_right"]) for r in sub])
        counts = np.array([int(r["count"]) for r in sub])
        ax.stairs(counts, np.append(left, right[-1]), label=name)
    if target is not None:
        ax.axvline(target, color="k", ls="--", lw=0.8)
    ax.set_xlabel("quadratic variation")
    ax.set_ylabel("replicas")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(png, dpi=120)
    plt.close(fig)


SCRIPT = '''"""Regenerate the figures of this run directory from its tidy CSV files."""
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent


def rows(name):
    with open(here / name, newline="") as fh:
        return list(csv.DictReader(fh))


if (here / "lines.csv").exists():
    data = rows("lines.csv")
    fig, ax = plt.subplots()
    for idx in sorted({r["line_index"] for r in data}, key=int):
        sub = [r for r in data if r["line_index"] == idx]
        ax.plot([float(r["y"]) for r in sub], [float(r["value"]) for r in sub], lw=0.8, label="line " + idx)
    ax.legend()
    fig.savefig(here / "lines_script.png")

if (here / "qv_hist.csv").exists():
    data = rows("qv_hist.csv")
    fig, ax = plt.subplots()
    for ic in sorted({r["ic"] for r in data}):
        sub = [r for r in data if r["ic"] == ic]
        ax.stairs([int(r["count"]) for r in sub],
                  [float(r["bin_left"]) for r in sub] + [float(sub[-1]["bin_right"])], label=ic)
    ax.legend()
    fig.savefig(here / "qv_hist_script.png")
'''


def write_script(out: Path) -> Path:
    target = out / "plot.py"
    target.write_text(SCRIPT)
    return target
