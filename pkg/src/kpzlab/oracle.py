"""Brute-force reference implementations.

Nothing here imports the engines it checks: paths are enumerated recursively,
the reflection is a scalar loop, and the variational formula is a plain scan.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, RefusalError

PATH_LIMIT = 10**7


def _rows(f):
    vals = getattr(f, "values", f)
    return np.atleast_2d(np.asarray(vals, dtype=float))


def oracle_lpp(f, start: tuple[int, int], end: tuple[int, int], limit: int = PATH_LIMIT) -> float:
    """Exhaustive maximum over node-jump paths.

    ``start = (i, l)`` and ``end = (j, m)`` use node indices and 1-based lines.
    """
    F = _rows(f)
    (i, l), (j, m) = start, end
    if not (1 <= m <= l <= F.shape[0]) or i > j:
        raise DomainError("endpoints out of order")
    r = l - m
    if math.comb(j - i + r, r) > limit:
        raise RefusalError("too many paths to enumerate")
    rows = [list(map(float, row)) for row in F]

    def best(line: int, t: int) -> float:
        # path currently on `line` since node t; finish at (j, m)
        if line == m:
            return rows[line - 1][j] - rows[line - 1][t]
        top = -math.inf
        for s in range(t, j + 1):
            seg = rows[line - 1][s] - rows[line - 1][t]
            top = max(top, seg + best(line - 1, s))
        return top

    return best(l, i)


def oracle_pitman(f1, f2, t: int, origin: int = 0) -> float:
    """Reflected top line at node ``t``: ``f1(t) + max(0, max_{s<=t} (f2(s) - f1(s)))``."""
    a = list(map(float, getattr(f1, "values", f1)))
    b = list(map(float, getattr(f2, "values", f2)))
    g = 0.0
    for s in range(origin, t + 1):
        g = max(g, b[s] - a[s])
    return a[t] + g


def oracle_evolve(h0, sheet_formula, y: float, x_nodes, t: float = 1.0) -> float:
    """``max_x (h0(x) + t^{1/3} S(x t^{-2/3}, y t^{-2/3}))`` over every supplied node."""
    best = -math.inf
    for x in np.asarray(x_nodes, dtype=float):
        h = float(np.asarray(h0(np.array([x])))[0])
        if h == -math.inf:
            continue
        v = h + t ** (1 / 3) * float(sheet_formula(x * t ** (-2 / 3), y * t ** (-2 / 3)))
        best = max(best, v)
    return best
