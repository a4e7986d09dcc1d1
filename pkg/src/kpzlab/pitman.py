"""Pitman (Skorokhod reflection) transform, melons and the KPZ rescaling."""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, ParameterError
from .grid import GridFunction, GridSpec, LineEnsemble
from .sampler import as_generator, brownian_paths


def pitman_pair(f1: GridFunction, f2: GridFunction, origin: int = 0) -> tuple[GridFunction, GridFunction]:
    """Reflect ``f1`` off ``f2``: returns ``(f1 + G, f2 - G)`` with ``G`` the running max gap."""
    if f1.grid != f2.grid:
        raise DomainError("pitman_pair needs both functions on one grid")
    if not 0 <= origin < f1.grid.count:
        raise DomainError(f"origin index {origin} outside the grid")
    d = f2.values[origin:] - f1.values[origin:]
    G = np.zeros(f1.grid.count)
    G[origin:] = np.maximum(np.maximum.accumulate(d), 0.0)
    return GridFunction(f1.grid, f1.values + G), GridFunction(f1.grid, f2.values - G)


def _reflect(W: np.ndarray, i: int) -> None:
    G = np.maximum(np.maximum.accumulate(W[i + 1] - W[i]), 0.0)
    W[i] += G
    W[i + 1] -= G


def melon_array(B: np.ndarray) -> np.ndarray:
    """Fold rows of ``B`` (all starting at 0) into an ordered melon.

    Lines are inserted from the bottom of the stack upward; each new top line
    is reflected down through the lines already folded. This schedule makes the
    top line equal the last passage value from the bottom line.
    """
    W = np.array(B, dtype=float, copy=True)
    n = W.shape[0]
    for j in range(n - 2, -1, -1):
        for i in range(j, n - 1):
            _reflect(W, i)
    return W


def melon(f: LineEnsemble) -> LineEnsemble:
    if np.any(f.values[:, 0] != 0.0):
        raise DomainError("melon needs every line to start at 0")
    return LineEnsemble(f.grid, melon_array(f.values))


# -- KPZ scaling -------------------------------------------------------------

def time_nodes_for(n: int, step: float) -> int:
    """Nodes per unit time so that the rescaled spatial step is at most ``step``."""
    if step <= 0:
        raise ParameterError("step must be positive")
    return max(1, math.ceil(n ** (1 / 3) / (2 * step) - 1e-9))


def spatial_step(n: int, time_nodes: int) -> float:
    return n ** (1 / 3) / (2 * time_nodes)


def airy_time(n: int, y):
    """Melon time ``1 + 2 y n^{-1/3}`` matching rescaled coordinate ``y``."""
    return 1 + 2 * np.asarray(y, dtype=float) * n ** (-1 / 3)


def rescale_rows(W: np.ndarray, n: int, time_nodes: int, first: int = 0) -> np.ndarray:
    """Rescale melon rows sampled at times ``(first + i) / N`` to Airy coordinates."""
    delta = spatial_step(n, time_nodes)
    y = (np.arange(W.shape[1]) + first - time_nodes) * delta
    return n ** (1 / 6) * (W - 2 * math.sqrt(n) - 2 * y * n ** (1 / 6))


def rescaled_grid(n: int, time_nodes: int, count: int) -> GridSpec:
    """Airy-coordinate grid of a melon sampled at times ``0, 1/N, ...``."""
    delta = spatial_step(n, time_nodes)
    return GridSpec.from_count(-time_nodes * delta, delta, count)


def rescaled_melon(n: int, y_grid: GridSpec, rng, m: int | None = None,
                   time_nodes: int | None = None) -> LineEnsemble:
    """Top ``m`` lines of the rescaled melon of ``n`` standard motions on ``y_grid``."""
    if n < 1:
        raise ParameterError("n must be at least 1")
    if y_grid.left < -0.5 * n ** (1 / 3) - 1e-12:
        raise DomainError(f"y = {y_grid.left} maps to negative melon time for n = {n}")
    N = time_nodes or time_nodes_for(n, y_grid.step)
    t_max = float(airy_time(n, y_grid.right))
    steps = math.ceil(t_max * N * 1.1 - 1e-9) + 1
    B = brownian_paths(n, steps, 1.0 / N, 1.0, as_generator(rng))
    W = melon_array(B)
    m = n if m is None else min(m, n)
    A = rescale_rows(W[:m], n, N)
    native = rescaled_grid(n, N, A.shape[1])
    ys = y_grid.nodes()
    out = np.empty((m, ys.size))
    r = (ys - native.left) / native.step
    aligned = np.allclose(r, np.round(r), atol=1e-9)
    for i in range(m):
        out[i] = A[i, np.round(r).astype(int)] if aligned else np.interp(ys, native.nodes(), A[i])
    return LineEnsemble(y_grid, out)
