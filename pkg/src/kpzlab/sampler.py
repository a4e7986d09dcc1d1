"""Seeded Brownian motions, bridges and conditioned non-intersecting bridges."""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, RejectionFailure
from .grid import GridFunction, GridSpec, LineEnsemble

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Reproducible stream keyed by a root seed, a replica index and a purpose label."""

    seed: int
    stream_id: int = 0
    purpose: str = "default"

    def generator(self) -> np.random.Generator:
        key = (zlib.crc32(self.purpose.encode()), self.stream_id & _MASK64)
        return np.random.default_rng(np.random.SeedSequence(self.seed & _MASK64, spawn_key=key))

    def child(self, purpose: str) -> "RngStream":
        return RngStream(self.seed, self.stream_id, f"{self.purpose}/{purpose}")


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise ParameterError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def _check_diffusion(diffusion: float) -> None:
    if not diffusion > 0:
        raise ParameterError(f"diffusion must be positive, got {diffusion}")


def brownian_paths(count: int, steps: int, dt: float, diffusion: float,
                   gen: np.random.Generator) -> np.ndarray:
    """``count`` motions from 0 sampled at ``steps + 1`` nodes spaced ``dt``."""
    out = np.zeros((count, steps + 1))
    inc = gen.standard_normal((count, steps)) * np.sqrt(diffusion * dt)
    np.cumsum(inc, axis=1, out=out[:, 1:])
    return out


def sample_brownian(grid: GridSpec, start: float, diffusion: float, rng) -> GridFunction:
    _check_diffusion(diffusion)
    path = brownian_paths(1, grid.count - 1, grid.step, diffusion, as_generator(rng))[0]
    return GridFunction(grid, start + path)


def _bridges(count: int, grid: GridSpec, a, b, diffusion: float, gen) -> np.ndarray:
    w = brownian_paths(count, grid.count - 1, grid.step, diffusion, gen)
    frac = np.linspace(0.0, 1.0, grid.count)
    a = np.asarray(a, dtype=float).reshape(-1, 1)
    b = np.asarray(b, dtype=float).reshape(-1, 1)
    out = w - frac * w[:, -1:] + a + frac * (b - a)
    out[:, 0] = a[:, 0]
    out[:, -1] = b[:, 0]
    return out


def sample_bridge(grid: GridSpec, a: float, b: float, diffusion: float, rng) -> GridFunction:
    """Bridge from ``a`` at ``grid.left`` to ``b`` at ``grid.right``."""
    _check_diffusion(diffusion)
    return GridFunction(grid, _bridges(1, grid, a, b, diffusion, as_generator(rng))[0])


def sample_independent_ensemble(k: int, grid: GridSpec, starts, diffusion: float, rng) -> LineEnsemble:
    _check_diffusion(diffusion)
    starts = np.asarray(starts, dtype=float)
    if starts.shape != (k,):
        raise ParameterError(f"need {k} start values, got {starts.shape}")
    paths = brownian_paths(k, grid.count - 1, grid.step, diffusion, as_generator(rng))
    return LineEnsemble(grid, paths + starts[:, None])


def sample_nonintersecting_bridges(k: int, grid: GridSpec, starts, ends, diffusion: float, rng,
                                   upper: GridFunction | None = None,
                                   lower: GridFunction | None = None,
                                   max_attempts: int = 100_000,
                                   batch: int = 256) -> LineEnsemble:
    """Bridges conditioned on ``upper > B_1 > ... > B_k > lower`` at every node.

    Plain rejection: batches of independent bridges are drawn until one batch
    member satisfies the ordering.
    """
    _check_diffusion(diffusion)
    starts = np.asarray(starts, dtype=float)
    ends = np.asarray(ends, dtype=float)
    if starts.shape != (k,) or ends.shape != (k,):
        raise ParameterError(f"need {k} start and end values")
    for vals, idx in ((starts, 0), (ends, -1)):
        if np.any(np.diff(vals) >= 0):
            raise ParameterError("boundary values must be strictly decreasing")
        if upper is not None and not upper.values[idx] > vals[0]:
            raise ParameterError("boundary values must lie strictly below the upper barrier")
        if lower is not None and not vals[-1] > lower.values[idx]:
            raise ParameterError("boundary values must lie strictly above the lower barrier")
    gen = as_generator(rng)
    attempts = 0
    while attempts < max_attempts:
        size = min(batch, max_attempts - attempts)
        cand = _bridges(size * k, grid, np.tile(starts, size), np.tile(ends, size), diffusion, gen)
        cand = cand.reshape(size, k, grid.count)
        ok = np.all(cand[:, :-1, :] > cand[:, 1:, :], axis=(1, 2))
        if upper is not None:
            ok &= np.all(cand[:, 0, :] < upper.values, axis=1)
        if lower is not None:
            ok &= np.all(cand[:, -1, :] > lower.values, axis=1)
        hits = np.flatnonzero(ok)
        if hits.size:
            attempts += int(hits[0]) + 1
            return LineEnsemble(grid, cand[hits[0]])
        attempts += size
    raise RejectionFailure(f"no ordered sample after {attempts} attempts", attempts, 0)


def estimate_acceptance(k: int, grid: GridSpec, starts, ends, diffusion: float, rng,
                        trials: int = 2000, upper=None, lower=None) -> float:
    """Fraction of unconditioned bridge systems that satisfy the ordering."""
    gen = as_generator(rng)
    starts = np.asarray(starts, dtype=float)
    ends = np.asarray(ends, dtype=float)
    cand = _bridges(trials * k, grid, np.tile(starts, trials), np.tile(ends, trials), diffusion, gen)
    cand = cand.reshape(trials, k, grid.count)
    ok = np.all(cand[:, :-1, :] > cand[:, 1:, :], axis=(1, 2))
    if upper is not None:
        ok &= np.all(cand[:, 0, :] < upper.values, axis=1)
    if lower is not None:
        ok &= np.all(cand[:, -1, :] > lower.values, axis=1)
    return float(ok.mean())
