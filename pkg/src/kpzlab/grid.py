"""Uniform grids, piecewise-linear functions, line ensembles and lattice paths."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, ParameterError, ValidationError

_DIVIDE_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid ``left, left + step, ..., right``."""

    left: float
    right: float
    step: float

    def __post_init__(self):
        if not (math.isfinite(self.left) and math.isfinite(self.right)):
            raise ParameterError("grid endpoints must be finite")
        if self.step <= 0 or not math.isfinite(self.step):
            raise ParameterError(f"grid step must be positive, got {self.step}")
        if not self.left < self.right:
            raise ParameterError(f"grid needs left < right, got [{self.left}, {self.right}]")
        ratio = (self.right - self.left) / self.step
        if abs(ratio - round(ratio)) > _DIVIDE_TOL * max(1.0, abs(ratio)):
            raise ParameterError("grid step does not divide the interval length")

    @classmethod
    def from_count(cls, left: float, step: float, count: int) -> "GridSpec":
        if count < 2:
            raise ParameterError("a grid needs at least two nodes")
        return cls(float(left), float(left + step * (count - 1)), float(step))

    @property
    def count(self) -> int:
        return int(round((self.right - self.left) / self.step)) + 1

    def nodes(self) -> np.ndarray:
        return self.left + self.step * np.arange(self.count)

    def node(self, i: int) -> float:
        return self.left + self.step * i

    def contains(self, x: float) -> bool:
        tol = 1e-9 * self.step
        return self.left - tol <= x <= self.right + tol

    def index_of(self, x: float, snap: bool = False) -> int:
        """Index of the node at ``x``; off-node points are an error unless ``snap``."""
        if not self.contains(x):
            raise DomainError(f"{x} outside grid [{self.left}, {self.right}]")
        r = (x - self.left) / self.step
        i = int(round(r))
        if not snap and abs(r - i) > 1e-6:
            raise DomainError(f"{x} is not a grid node (step {self.step})")
        return min(max(i, 0), self.count - 1)

    def sub(self, lo: float, hi: float) -> tuple["GridSpec", int, int]:
        """Sub-grid of nodes inside ``[lo, hi]`` with its index bounds (inclusive)."""
        i0 = self.index_of(lo, snap=True)
        i1 = self.index_of(hi, snap=True)
        if self.node(i0) < lo - 1e-9 * self.step:
            i0 += 1
        if self.node(i1) > hi + 1e-9 * self.step:
            i1 -= 1
        if i1 <= i0:
            raise DomainError(f"range [{lo}, {hi}] holds fewer than two nodes")
        return GridSpec.from_count(self.node(i0), self.step, i1 - i0 + 1), i0, i1

    def to_dict(self) -> dict:
        return {"left": self.left, "right": self.right, "step": self.step}


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Piecewise-linear function given by its node values."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != (self.grid.count,):
            raise ValidationError(f"expected {self.grid.count} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("grid function values must be finite")
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        return eval_at(self, x)

    def nodes(self) -> np.ndarray:
        return self.grid.nodes()


def eval_at(f: GridFunction, x):
    """Linear interpolation of ``f`` at ``x`` (scalar or array)."""
    xa = np.asarray(x, dtype=float)
    tol = 1e-9 * f.grid.step
    if np.any(xa < f.grid.left - tol) or np.any(xa > f.grid.right + tol):
        raise DomainError(f"evaluation point outside [{f.grid.left}, {f.grid.right}]")
    r = np.clip((xa - f.grid.left) / f.grid.step, 0, f.grid.count - 1)
    i = np.minimum(np.floor(r).astype(int), f.grid.count - 2)
    w = r - i
    out = f.values[i] * (1 - w) + f.values[i + 1] * w
    near = np.abs(r - np.round(r)) < 1e-12
    out = np.where(near, f.values[np.round(r).astype(int)], out)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class LineEnsemble:
    """Stack of functions on a shared grid; row 0 holds line 1 (the top line)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(np.atleast_2d(self.values))
        if v.ndim != 2 or v.shape[1] != self.grid.count or v.shape[0] < 1:
            raise ValidationError(f"ensemble values must have shape (k, {self.grid.count})")
        if not np.all(np.isfinite(v)):
            raise ValidationError("ensemble values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_lines(cls, lines: Sequence[GridFunction]) -> "LineEnsemble":
        if not lines:
            raise ValidationError("an ensemble needs at least one line")
        grid = lines[0].grid
        if any(g.grid != grid for g in lines):
            raise ValidationError("all lines must share one grid")
        return cls(grid, np.stack([g.values for g in lines]))

    @property
    def k(self) -> int:
        return self.values.shape[0]

    def line(self, i: int) -> GridFunction:
        """Line ``i`` with 1-based indexing."""
        if not 1 <= i <= self.k:
            raise DomainError(f"line {i} outside 1..{self.k}")
        return GridFunction(self.grid, self.values[i - 1])

    @property
    def lines(self) -> list[GridFunction]:
        return [self.line(i) for i in range(1, self.k + 1)]

    def top(self, m: int) -> "LineEnsemble":
        return LineEnsemble(self.grid, self.values[: min(m, self.k)])


@dataclass(frozen=True, eq=False)
class GapProcess:
    grid: GridSpec
    gaps: np.ndarray  # shape (k-1, count); may be empty

    def gap(self, i: int) -> GridFunction:
        return GridFunction(self.grid, self.gaps[i - 1])


def gap_process(f: LineEnsemble) -> GapProcess:
    """Nodewise gaps ``g_i = f_i - f_{i+1}``; empty for a single line."""
    g = f.values[:-1] - f.values[1:]
    g.setflags(write=False)
    return GapProcess(f.grid, g)


@dataclass(frozen=True)
class LatticePath:
    """Non-increasing cadlag path from ``(x, start_line)`` to ``(y, end_line)``.

    ``jumps`` lists ``t_{l-1}, t_{l-2}, ..., t_m`` where ``t_i`` is the time the
    path moves from line ``i+1`` to line ``i``.
    """

    x: float
    start_line: int
    y: float
    end_line: int
    jumps: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "jumps", tuple(float(t) for t in self.jumps))

    def jump_time(self, i: int) -> float:
        """``t_i``: time of the move from line ``i+1`` to line ``i``."""
        if not self.end_line <= i < self.start_line:
            raise DomainError(f"path has no jump into line {i}")
        return self.jumps[self.start_line - 1 - i]

    def line_at(self, s: float) -> int:
        """Line occupied at time ``s`` (right-continuous)."""
        if not self.x <= s <= self.y:
            raise DomainError(f"time {s} outside [{self.x}, {self.y}]")
        return self.end_line + sum(1 for t in self.jumps if t > s)

    def lines_on(self, times: np.ndarray) -> np.ndarray:
        t = np.asarray(self.jumps, dtype=float)
        return self.end_line + (t[None, :] > np.asarray(times)[:, None]).sum(axis=1)

    def to_dict(self) -> dict:
        return {"start": [self.x, self.start_line], "end": [self.y, self.end_line],
                "jumps": list(self.jumps)}


def validate_path(path: LatticePath, k: int | None = None, grid: GridSpec | None = None) -> bool:
    """True iff the jumps are ordered inside ``[x, y]`` and the line indices are valid."""
    if path.end_line < 1 or path.start_line < path.end_line:
        return False
    if k is not None and path.start_line > k:
        return False
    if len(path.jumps) != path.start_line - path.end_line:
        return False
    if path.x > path.y:
        return False
    prev = path.x
    for t in path.jumps:
        if not prev <= t <= path.y:
            return False
        prev = t
    if grid is not None and not (grid.contains(path.x) and grid.contains(path.y)):
        return False
    return True


def path_length(f: LineEnsemble, path: LatticePath, form: str = "telescoping") -> float:
    """Length of ``path`` in ``f``, by telescoping segments or by the gap formula."""
    if not validate_path(path, f.k, f.grid):
        raise ValidationError(f"invalid path {path}")
    lines = range(path.start_line, path.end_line - 1, -1)
    if form == "telescoping":
        bounds = (path.x,) + path.jumps + (path.y,)
        total = 0.0
        for seg, line in enumerate(lines):
            g = f.line(line)
            total += g(bounds[seg + 1]) - g(bounds[seg])
        return total
    if form == "gap":
        gaps = gap_process(f)
        total = f.line(path.end_line)(path.y) - f.line(path.start_line)(path.x)
        for i in range(path.end_line, path.start_line):
            total -= gaps.gap(i)(path.jump_time(i))
        return total
    raise ParameterError(f"unknown length form {form!r}")


def shift_ensemble(f: LineEnsemble, h: GridFunction) -> LineEnsemble:
    """Add the common function ``h`` to every line."""
    if h.grid != f.grid:
        raise DomainError("shift must live on the ensemble grid")
    return LineEnsemble(f.grid, f.values + h.values[None, :])


# -- serialization ---------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(obj: GridFunction | LineEnsemble, path: str | Path, label: str = "x") -> None:
    """Column 1 is the grid coordinate; the remaining columns hold the lines."""
    rows = np.atleast_2d(obj.values)
    nodes = obj.grid.nodes()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([label] + [f"line_{i}" for i in range(1, rows.shape[0] + 1)])
        for j, x in enumerate(nodes):
            w.writerow([_fmt(x)] + [_fmt(v) for v in rows[:, j]])


def read_csv(path: str | Path) -> LineEnsemble:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3:
        raise ValidationError(f"{path}: need a header and at least two rows")
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    x = data[:, 0]
    step = (x[-1] - x[0]) / (len(x) - 1)
    if not np.allclose(np.diff(x), step, rtol=1e-9, atol=1e-12):
        raise ValidationError(f"{path}: grid is not uniform")
    return LineEnsemble(GridSpec(float(x[0]), float(x[-1]), float(step)), data[:, 1:].T)


def write_path_csv(path: LatticePath, grid: GridSpec, target: str | Path) -> None:
    """Line index occupied by ``path`` at every grid node of ``[x, y]``."""
    i0, i1 = grid.index_of(path.x, snap=True), grid.index_of(path.y, snap=True)
    times = grid.nodes()[i0: i1 + 1]
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "line"])
        for t, line in zip(times, path.lines_on(times)):
            w.writerow([_fmt(t), int(line)])


def to_json(obj: GridFunction | LineEnsemble) -> str:
    rows = np.atleast_2d(obj.values)
    return json.dumps({"grid": obj.grid.to_dict(), "lines": rows.tolist()})


def from_json(text: str) -> LineEnsemble:
    d = json.loads(text)
    g = d["grid"]
    return LineEnsemble(GridSpec(g["left"], g["right"], g["step"]), np.array(d["lines"], dtype=float))
