"""Statistical checks of local Brownian behaviour and distributional identities."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import DomainError, ParameterError, RefusalError
from .grid import GridFunction

ALPHA = 0.01
MIN_SAMPLES = 50


@dataclass
class TestReport:
    test: str
    n: int
    statistic: float
    p_value: float
    alpha: float
    passed: bool
    seed: int | None = None
    config_hash: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def bonferroni(alpha: float, m: int) -> float:
    if m < 1:
        raise ParameterError("need at least one test")
    return alpha / m


def _nodes_in(f: GridFunction, interval) -> tuple[int, int]:
    # endpoints snap to the nearest node, so half a step of slack is allowed
    g = f.grid
    a, b = interval
    h = 0.5 * g.step
    if a >= b or a < g.left - h or b > g.right + h:
        raise DomainError(f"interval {interval} not inside the grid")
    i0 = min(max(int(round((a - g.left) / g.step)), 0), g.count - 1)
    i1 = min(max(int(round((b - g.left) / g.step)), 0), g.count - 1)
    if i1 <= i0:
        raise DomainError(f"interval {interval} covers fewer than two nodes")
    return i0, i1


def quadratic_variation(f: GridFunction, interval, mesh: float | None = None) -> float:
    """Sum of squared increments over the partition of ``interval`` with spacing ``mesh``."""
    g = f.grid
    mesh = g.step if mesh is None else mesh
    if mesh < g.step * (1 - 1e-9):
        raise ParameterError(f"mesh {mesh} is finer than the grid step {g.step}")
    i0, i1 = _nodes_in(f, interval)
    stride = max(1, int(round(mesh / g.step)))
    idx = np.arange(i0, i1 + 1, stride)
    if idx[-1] != i1:
        idx = np.append(idx, i1)
    return float(np.sum(np.diff(f.values[idx]) ** 2))


def scaled_increments(profiles: np.ndarray, step: float, y_index: int, eps: float) -> np.ndarray:
    """``(h(y + eps) - h(y)) / sqrt(2 eps)`` across replicas (rows of ``profiles``)."""
    r = int(round(eps / step))
    if r < 1:
        raise ParameterError("eps must be at least one grid step")
    return (profiles[:, y_index + r] - profiles[:, y_index]) / np.sqrt(2 * r * step)


def increment_gaussianity(samples, alpha: float = ALPHA) -> TestReport:
    """One-sample KS test of the samples against the standard normal."""
    x = np.asarray(samples, dtype=float)
    if x.size < MIN_SAMPLES:
        raise RefusalError(f"{x.size} samples is below the floor of {MIN_SAMPLES}")
    res = stats.kstest(x, "norm")
    return TestReport("increment_gaussianity", int(x.size), float(res.statistic),
                      float(res.pvalue), alpha, bool(res.pvalue > alpha))


def two_sample_test(a, b, alpha: float = ALPHA) -> TestReport:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if min(a.size, b.size) < MIN_SAMPLES:
        raise RefusalError(f"two-sample test needs {MIN_SAMPLES} samples per side")
    res = stats.ks_2samp(a, b)
    return TestReport("two_sample_ks", int(a.size + b.size), float(res.statistic),
                      float(res.pvalue), alpha, bool(res.pvalue > alpha))


def holder_modulus(f: GridFunction, interval, beta: float, max_points: int = 1025) -> float:
    """``max |f(s) - f(t)| / |s - t|^beta`` over a dyadic subsample of the nodes."""
    if not 0 < beta < 1:
        raise ParameterError("beta must lie in (0, 1)")
    i0, i1 = _nodes_in(f, interval)
    span = i1 - i0
    stride = 1
    while span // stride + 1 > max_points:
        stride *= 2
    idx = np.arange(i0, i1 + 1, stride)
    if idx[-1] != i1:
        idx = np.append(idx, i1)
    x = f.grid.left + f.grid.step * idx
    v = f.values[idx]
    dx = np.abs(x[:, None] - x[None, :])
    dv = np.abs(v[:, None] - v[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(dx > 0, dv / dx ** beta, 0.0)
    return float(r.max())


@dataclass(frozen=True)
class ArgmaxGap:
    location: float
    gap: float
    degenerate: bool


def argmax_gap(f: GridFunction, K, delta_steps: int = 10) -> ArgmaxGap:
    """Best value minus the best value further than ``delta_steps`` nodes from the argmax."""
    i0, i1 = _nodes_in(f, K)
    v = f.values[i0: i1 + 1]
    best = int(np.argmax(v))
    far = np.abs(np.arange(v.size) - best) > delta_steps
    gap = float(v[best] - v[far].max()) if far.any() else float("inf")
    return ArgmaxGap(float(f.grid.node(i0 + best)), gap, gap <= 0.0)
