"""Max-plus dynamic programming for last passage values and geodesics."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import DomainError, RefusalError
from .grid import GridFunction, LatticePath, LineEnsemble

ENUMERATION_LIMIT = 10**7


def _check_lines(f: LineEnsemble, start_line: int, end_line: int) -> None:
    if not 1 <= end_line <= start_line <= f.k:
        raise DomainError(f"need 1 <= end line <= start line <= {f.k}, got {start_line} -> {end_line}")


def _endpoints(f: LineEnsemble, start, end) -> tuple[int, int, int, int]:
    (x, l), (y, m) = start, end
    _check_lines(f, l, m)
    i0, i1 = f.grid.index_of(x), f.grid.index_of(y)
    if i0 > i1:
        raise DomainError(f"start {x} lies after end {y}")
    return i0, int(l), i1, int(m)


# -- raw array kernels (rows are lines, row 0 = line 1) -----------------------

def forward_tables(F: np.ndarray, i0: int, l: int, m: int) -> dict[int, np.ndarray]:
    """Values ``F[(x_{i0}, l) -> (x_i, j)]`` for every node ``i`` and line ``m <= j <= l``."""
    V = np.full(F.shape[1], -np.inf)
    V[i0:] = F[l - 1, i0:] - F[l - 1, i0]
    tables = {l: V}
    for j in range(l - 1, m - 1, -1):
        row = F[j - 1]
        V = row + np.maximum.accumulate(V - row)
        tables[j] = V
    return tables


def forward_profile(F: np.ndarray, i0: int, l: int, m: int = 1) -> np.ndarray:
    return forward_tables(F, i0, l, m)[m]


def boundary_profile(F: np.ndarray, boundary: np.ndarray, l: int, m: int = 1,
                     track: bool = False):
    """``max_s (boundary[s] + F[(x_s, l) -> (x_i, m)])`` for every node ``i``.

    With ``track`` the maximizing start index (rightmost among ties) is returned too.
    """
    row = F[l - 1]
    a = boundary - row
    V = row + np.maximum.accumulate(a)
    origin = _record_index(a) if track else None
    for j in range(l - 1, m - 1, -1):
        row = F[j - 1]
        a = V - row
        if track:
            origin = origin[_record_index(a)]
        V = row + np.maximum.accumulate(a)
    return (V, origin) if track else V


def _record_index(a: np.ndarray) -> np.ndarray:
    """Index of the last running-maximum record at or before each position."""
    run = np.maximum.accumulate(a)
    idx = np.where(a == run, np.arange(a.size), 0)
    return np.maximum.accumulate(idx)


def backward_profile(F: np.ndarray, i1: int, l: int, m: int = 1) -> np.ndarray:
    """Values ``F[(x_i, l) -> (x_{i1}, m)]`` for every start node ``i``."""
    R = np.full(F.shape[1], -np.inf)
    R[: i1 + 1] = F[m - 1, i1] - F[m - 1, : i1 + 1]
    for j in range(m + 1, l + 1):
        row = F[j - 1]
        R = np.maximum.accumulate((row + R)[::-1])[::-1] - row
    return R


def geodesic_nodes(F: np.ndarray, i0: int, l: int, i1: int, m: int, side: str = "right") -> list[int]:
    """Jump node indices ``[t_{l-1}, ..., t_m]`` of the right- or leftmost geodesic."""
    tables = forward_tables(F, i0, l, m)
    cur = i1
    rev = []
    for j in range(m, l):
        h = tables[j + 1][: cur + 1] - F[j - 1, : cur + 1]
        best = h.max()
        hits = np.flatnonzero(h == best)
        cur = int(hits[-1] if side == "right" else hits[0])
        rev.append(cur)
    return rev[::-1]


# -- public API on LineEnsemble ---------------------------------------------

def last_passage_value(f: LineEnsemble, start, end) -> float:
    """``f[(x, l) -> (y, m)]`` over node-jump paths."""
    i0, l, i1, m = _endpoints(f, start, end)
    return float(forward_profile(f.values, i0, l, m)[i1])


def last_passage_profile(f: LineEnsemble, start, m: int, y_range=None) -> GridFunction:
    """``y -> f[(x, l) -> (y, m)]`` on the nodes of ``y_range`` (default: ``[x, right]``)."""
    x, l = start
    _check_lines(f, l, m)
    i0 = f.grid.index_of(x)
    lo, hi = y_range if y_range is not None else (x, f.grid.right)
    if lo < x - 1e-9 * f.grid.step:
        raise DomainError("profile range starts before the start point")
    sub, j0, j1 = f.grid.sub(lo, hi)
    V = forward_profile(f.values, i0, l, m)
    return GridFunction(sub, V[j0: j1 + 1])


def _geodesic(f: LineEnsemble, start, end, side: str) -> LatticePath:
    i0, l, i1, m = _endpoints(f, start, end)
    nodes = geodesic_nodes(f.values, i0, l, i1, m, side)
    g = f.grid
    return LatticePath(g.node(i0), l, g.node(i1), m, tuple(g.node(i) for i in nodes))


def rightmost_geodesic(f: LineEnsemble, start, end) -> LatticePath:
    """Optimal path with nodewise maximal jump times."""
    return _geodesic(f, start, end, "right")


def leftmost_geodesic(f: LineEnsemble, start, end) -> LatticePath:
    """Optimal path with nodewise minimal jump times."""
    return _geodesic(f, start, end, "left")


def compose_values(f: LineEnsemble, start, mid, end) -> float:
    """``f[start -> (z, j)] + f[(z, j) -> end]``; never exceeds the direct value."""
    (x, l), (z, j), (y, m) = start, mid, end
    if not (x <= z <= y and m <= j <= l):
        raise DomainError("mid point must lie between the endpoints")
    return last_passage_value(f, start, mid) + last_passage_value(f, mid, end)


def multi_start_profile(f: LineEnsemble, g, x0: float = 0.0) -> np.ndarray:
    """``y -> max_l (g_l + f[(x0, l) -> (y, 1)])`` on all nodes (``-inf`` left of ``x0``)."""
    g = np.asarray(g, dtype=float)
    k = g.size
    _check_lines(f, k, 1)
    i0 = f.grid.index_of(x0)
    F = f.values
    n = F.shape[1]
    V = np.full(n, -np.inf)
    for j in range(k, 0, -1):
        row = F[j - 1]
        fresh = np.full(n, -np.inf)
        fresh[i0:] = g[j - 1] + (row[i0:] - row[i0])
        if j < k:
            V = np.maximum(fresh, row + np.maximum.accumulate(V - row))
        else:
            V = fresh
    return V


def multi_start_value(f: LineEnsemble, g, y: float, x0: float = 0.0) -> float:
    iy = f.grid.index_of(y)
    if iy < f.grid.index_of(x0):
        raise DomainError("y must not precede the start time")
    return float(multi_start_profile(f, g, x0)[iy])


def enumerate_oracle(f: LineEnsemble, start, end, limit: int = ENUMERATION_LIMIT):
    """Exhaustive search over node-jump vectors; returns (value, optimal jump vectors)."""
    i0, l, i1, m = _endpoints(f, start, end)
    r = l - m
    nodes = i1 - i0 + 1
    total = math.comb(nodes + r - 1, r) if r else 1
    if total > limit:
        raise RefusalError(f"{total} paths exceed the enumeration limit {limit}")
    g = f.grid
    F = f.values
    if r == 0:
        return float(F[m - 1, i1] - F[m - 1, i0]), [()]
    combos = np.array(list(itertools.combinations_with_replacement(range(i0, i1 + 1), r)))
    # combos[:, q] is the jump out of line l - q, i.e. t_{l-1-q}
    vals = F[m - 1, i1] - F[l - 1, i0]
    for q in range(r):
        i = l - 1 - q
        t = combos[:, q]
        vals = vals - (F[i - 1, t] - F[i, t])
    best = float(vals.max())
    opt = [tuple(g.node(int(t)) for t in row) for row in combos[vals == best]]
    return best, opt
