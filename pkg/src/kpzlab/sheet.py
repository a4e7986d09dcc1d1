"""Finite-n Airy line ensemble and Airy sheet approximation.

A :class:`SheetApprox` carries the rescaled melon ``A^n`` (top lines) and the
data needed to answer sheet queries ``S_n(x, y)``. Two backends are offered:

``environment``
    last passage values across the Brownian environment itself, two-sided in
    time so that negative ``x`` is available. Values are exactly consistent
    with metric composition across independent environments, which is what
    distributional identities between sheets need.
``melon``
    last passage values inside the folded melon, so that every identity that
    only involves the ensemble (anchored geodesics, decompositions) is exact.

Both agree exactly at ``x = 0``, where the value is the melon's top line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError, ResourceError, UnavailableError
from .grid import GridSpec, LatticePath, LineEnsemble
from .lpp import (backward_profile, boundary_profile, forward_profile, forward_tables,
                  geodesic_nodes, rightmost_geodesic)
from .pitman import melon_array, rescale_rows, rescaled_grid, spatial_step, time_nodes_for
from .sampler import as_generator, brownian_paths

BACKENDS = ("environment", "melon")
STABILITY_TOL = 1e-9
DEFAULT_MEMORY_BUDGET = 2 * 1024**3


@dataclass(frozen=True, eq=False)
class SheetApprox:
    ensemble: LineEnsemble          # top lines of A^n; column i is melon time i / N
    n: int
    depth_k: int
    time_nodes: int                 # N, nodes per unit melon time
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    backend: str = "environment"
    environment: np.ndarray | None = None   # rows = lines, column c is time (env_first + c) / N
    env_first: int = 0
    melon: np.ndarray | None = None         # full unscaled melon, column i is time i / N
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ParameterError(f"unknown backend {self.backend!r}")
        if not 1 <= self.depth_k <= self.ensemble.k <= self.n:
            raise ParameterError("need 1 <= depth_k <= retained lines <= n")
        if self.backend == "environment" and self.environment is None:
            raise ParameterError("environment backend needs the environment")
        if self.backend == "melon" and self.melon is None:
            raise ParameterError("melon backend needs the full melon")

    @property
    def delta(self) -> float:
        return spatial_step(self.n, self.time_nodes)

    @property
    def m(self) -> int:
        return self.ensemble.k

    @property
    def scale(self) -> float:
        return self.n ** (1 / 6)

    def node(self, v: float) -> int:
        """Index ``j`` of the lattice point ``j * delta`` nearest to ``v``."""
        return int(round(v / self.delta))

    def _check(self, v: float, rng: tuple[float, float], name: str) -> int:
        h = 0.5 * self.delta
        if not rng[0] - h <= v <= rng[1] + h:
            raise DomainError(f"{name} = {v} outside the declared range [{rng[0]}, {rng[1]}]")
        return self.node(v)

    def x_nodes(self, lo: float | None = None, hi: float | None = None) -> np.ndarray:
        lo = self.x_range[0] if lo is None else lo
        hi = self.x_range[1] if hi is None else hi
        return np.arange(math.ceil(lo / self.delta - 1e-9), math.floor(hi / self.delta + 1e-9) + 1)

    def y_nodes(self, lo: float | None = None, hi: float | None = None) -> np.ndarray:
        lo = self.y_range[0] if lo is None else lo
        hi = self.y_range[1] if hi is None else hi
        return np.arange(math.ceil(lo / self.delta - 1e-9), math.floor(hi / self.delta + 1e-9) + 1)

    def _lpp_source(self, min_time: int) -> tuple[np.ndarray, int]:
        if self.backend == "melon":
            if min_time < 0:
                raise DomainError("the melon backend only answers x >= 0")
            return self.melon, 0
        if min_time < self.env_first:
            raise DomainError("query precedes the simulated environment")
        return self.environment, self.env_first

    def _center(self, L, xj, yj):
        xs = np.asarray(xj) * self.delta
        ys = np.asarray(yj) * self.delta
        return self.scale * (L - 2 * math.sqrt(self.n) - 2 * (ys - xs) * self.scale)

    def top_line_at(self, yj) -> np.ndarray:
        """``S_n(0, y)``; ``-inf`` for ``y`` before melon time 0."""
        cols = np.asarray(yj) + self.time_nodes
        top = self.ensemble.values[0]
        return np.where(cols >= 0, top[np.maximum(cols, 0)], -np.inf)

    def to_meta(self) -> dict:
        return {"n": self.n, "depth_k": self.depth_k, "time_nodes": self.time_nodes,
                "delta": self.delta, "x_range": list(self.x_range), "y_range": list(self.y_range),
                "backend": self.backend, "lines_kept": self.m, "env_first": self.env_first,
                **self.meta}


# -- construction --------------------------------------------------------------

def _window(n: int, N: int, x_range, y_range, two_sided: bool = False) -> tuple[int, int]:
    delta = spatial_step(n, N)
    t_lo = min(0, math.floor(x_range[0] / delta + 1e-9))
    t_hi = N + math.ceil(y_range[1] / delta - 1e-9)
    y_first = N + math.ceil(y_range[0] / delta - 1e-9)
    if y_first < 0:
        if not two_sided:
            raise DomainError(f"y = {y_range[0]} lies before melon time 0 for n = {n}")
        t_lo = min(t_lo, y_first)
    t_hi = max(t_hi, N + 1)
    return t_lo, math.ceil(1.1 * t_hi)


def _assemble(n, depth_k, N, x_range, y_range, backend, env, env_first, W, m, meta) -> SheetApprox:
    if x_range[0] > x_range[1] or y_range[0] > y_range[1]:
        raise ParameterError("ranges must satisfy lo <= hi")
    m = min(n, depth_k + 2) if m is None else min(m, n)
    if W is None:
        top = forward_profile(env[:, -env_first:], 0, n, 1)[None, :]
        A = rescale_rows(top, n, N)
        m = 1
    else:
        A = rescale_rows(W[:m], n, N)
    ens = LineEnsemble(rescaled_grid(n, N, A.shape[1]), A)
    s = SheetApprox(ens, n, depth_k, N, tuple(map(float, x_range)), tuple(map(float, y_range)),
                    backend, env, env_first, W, meta)
    if x_range[0] > 0 and W is not None:
        a = -math.sqrt(depth_k / (2 * x_range[0]))
        if a < ens.grid.left:
            raise DomainError(f"anchor {a:.3f} for x = {x_range[0]} precedes melon time 0; raise n")
    return s


def build_sheet_approx(n: int, depth_k: int, x_range, y_range, step: float, rng,
                       m: int | None = None, backend: str = "environment",
                       time_nodes: int | None = None, with_melon: bool = True,
                       oversample: int = 1,
                       memory_budget: int = DEFAULT_MEMORY_BUDGET) -> SheetApprox:
    """Simulate ``n`` standard motions and assemble a sheet approximation.

    ``oversample`` refines the simulation lattice by an integer factor below
    ``step``; node-restricted jumps bias local fluctuations downward by an
    amount of order the square root of the time step, so observables measured
    at mesh ``step`` converge as the factor grows.

    The positive-time half of the environment is drawn first so that the melon
    does not depend on how far the x-range extends to the left.
    """
    if n < 1 or depth_k < 1:
        raise ParameterError("n and depth_k must be positive")
    if depth_k > n:
        raise ParameterError(f"depth_k = {depth_k} exceeds n = {n}")
    if backend not in BACKENDS:
        raise ParameterError(f"unknown backend {backend!r}")
    if backend == "melon" and x_range[0] < 0:
        raise DomainError("the melon backend needs x >= 0")
    if not with_melon and (backend == "melon" or depth_k > 1):
        raise ParameterError("without the melon only depth_k = 1 and the environment backend work")
    if oversample < 1:
        raise ParameterError("oversample must be a positive integer")
    N = time_nodes or oversample * time_nodes_for(n, step)
    t_lo, t_hi = _window(n, N, x_range, y_range, two_sided=backend == "environment")
    cells = n * (t_hi - t_lo + 1) * (2 if with_melon else 1)
    if cells * 8 > memory_budget:
        suggest = max(1, int(n * memory_budget / (cells * 8)))
        raise ResourceError(f"sheet needs {cells * 8 / 2**20:.0f} MiB; try n <= {suggest}")
    gen = as_generator(rng)
    pos = brownian_paths(n, t_hi, 1.0 / N, 1.0, gen)
    if t_lo < 0:
        neg = brownian_paths(n, -t_lo, 1.0 / N, 1.0, gen)[:, :0:-1]
        env = np.concatenate([neg, pos], axis=1)
    else:
        env = pos
    W = melon_array(pos) if with_melon else None
    meta = {"t_min": t_lo / N, "t_max": t_hi / N, "oversample": int(oversample)}
    return _assemble(n, depth_k, N, x_range, y_range, backend, env, t_lo, W, m, meta)


def sheet_from_melon(W: LineEnsemble, depth_k: int, x_range, y_range, m: int | None = None) -> SheetApprox:
    """Sheet on a given (possibly deterministic) melon sampled at times ``i / N``."""
    N = round(1 / W.grid.step)
    if W.grid.left != 0 or abs(N * W.grid.step - 1) > 1e-9:
        raise DomainError("melon grid must start at time 0 with step 1/N")
    n = W.k
    if x_range[0] < 0:
        raise DomainError("the melon backend needs x >= 0")
    _window(n, N, x_range, y_range)
    t_hi = N + math.ceil(y_range[1] / spatial_step(n, N) - 1e-9)
    if t_hi >= W.grid.count:
        raise DomainError("melon grid too short for the y-range")
    vals = np.array(W.values)
    return _assemble(n, depth_k, N, x_range, y_range, "melon", None, 0, vals, m, {"source": "given melon"})


def sheet_from_rescaled(A: np.ndarray, n: int, time_nodes: int, depth_k: int, x_range, y_range,
                        m: int | None = None) -> SheetApprox:
    """Melon-backend sheet whose ensemble is given directly in Airy coordinates.

    Column ``i`` of ``A`` sits at ``y = (i - N) * delta``; all ``n`` rows are needed.
    """
    A = np.asarray(A, dtype=float)
    if A.shape[0] != n:
        raise DomainError("need all n lines")
    y = (np.arange(A.shape[1]) - time_nodes) * spatial_step(n, time_nodes)
    W = A / n ** (1 / 6) + 2 * math.sqrt(n) + 2 * y * n ** (1 / 6)
    fake = LineEnsemble(GridSpec.from_count(0.0, 1.0 / time_nodes, A.shape[1]), W)
    return sheet_from_melon(fake, depth_k, x_range, y_range, m)


def fan_stub(n: int = 64, time_nodes: int = 50, depth_k: int = 6, corner: float = -1.0,
             slope: float = 100.0, y_max: float = 2.0) -> SheetApprox:
    """Deterministic sheet: lines tied left of ``corner``, then ``A_i = -slope (i-1)(y - corner)``.

    Gaps grow to the right of the corner, so every anchored geodesic starting left
    of it climbs straight to its target line at the corner and
    ``D_k = -(l - 1) * slope * (0 - corner)`` for every depth ``k``.
    """
    delta = spatial_step(n, time_nodes)
    count = time_nodes + math.ceil(y_max / delta) + 1
    y = (np.arange(count) - time_nodes) * delta
    c = y[int(round(corner / delta)) + time_nodes]      # corner snapped to a node
    A = -slope * np.arange(n)[:, None] * np.maximum(y - c, 0.0)[None, :]
    return sheet_from_rescaled(A, n, time_nodes, depth_k, (1.0, 2.0), (-1.0, y_max - 2 * delta))


def sheet_from_environment(B: LineEnsemble, depth_k: int, x_range, y_range,
                           backend: str = "environment", m: int | None = None) -> SheetApprox:
    """Sheet on a given environment whose grid contains time 0 with ``B(0) = 0``."""
    N = round(1 / B.grid.step)
    if abs(N * B.grid.step - 1) > 1e-9:
        raise DomainError("environment step must be 1/N")
    first = round(B.grid.left * N)
    if first > 0 or abs(first - B.grid.left * N) > 1e-6:
        raise DomainError("environment grid must contain time 0 as a node")
    env = np.array(B.values)
    if np.any(env[:, -first] != 0):
        raise DomainError("environment lines must vanish at time 0")
    W = melon_array(env[:, -first:])
    return _assemble(B.k, depth_k, N, x_range, y_range, backend, env, first, W, m,
                     {"source": "given environment"})


# -- sheet queries -----------------------------------------------------------

def sheet_value(s: SheetApprox, x: float, y: float) -> float:
    """``S_n(x, y)``; ``-inf`` when the start time comes after the end time."""
    xj = s._check(x, s.x_range, "x")
    yj = s._check(y, s.y_range, "y")
    if xj == 0:
        return float(s.top_line_at(yj))
    return float(sheet_row(s, x, (yj * s.delta, yj * s.delta))[1][0])


def sheet_row(s: SheetApprox, x: float, y_range=None) -> tuple[np.ndarray, np.ndarray]:
    """``(y nodes, S_n(x, y))`` along the y-range for one ``x``."""
    xj = s._check(x, s.x_range, "x")
    lo, hi = y_range if y_range is not None else s.y_range
    s._check(lo, s.y_range, "y")
    s._check(hi, s.y_range, "y")
    yj = s.y_nodes(lo, hi)
    if xj == 0:
        return yj * s.delta, s.top_line_at(yj).copy()
    F, first = s._lpp_source(xj)
    if xj - first >= F.shape[1]:
        return yj * s.delta, np.full(yj.size, -np.inf)
    V = forward_profile(F, xj - first, s.n, 1)
    L = V[yj + s.time_nodes - first]
    return yj * s.delta, s._center(L, xj, yj)


def sheet_column(s: SheetApprox, y: float, x_range=None) -> tuple[np.ndarray, np.ndarray]:
    """``(x nodes, S_n(x, y))`` along the x-range for one ``y`` (one backward sweep)."""
    yj = s._check(y, s.y_range, "y")
    lo, hi = x_range if x_range is not None else s.x_range
    xj = s.x_nodes(lo, hi)
    F, first = s._lpp_source(int(xj.min()))
    R = backward_profile(F, yj + s.time_nodes - first, s.n, 1)
    cols = xj - first
    inside = cols < R.size
    out = np.full(xj.size, -np.inf)
    out[inside] = s._center(R[cols[inside]], xj[inside], yj)
    out = np.where(xj == 0, s.top_line_at(yj), out)
    return xj * s.delta, out


def sup_over_starts(s: SheetApprox, xj: np.ndarray, offsets: np.ndarray, yj: np.ndarray,
                    track: bool = False):
    """``max_j (offsets_j + S_n(xj_j * delta, y))`` for every ``y`` node in ``yj``.

    All starts are handled in one sweep by injecting them on the bottom line.
    """
    xj = np.asarray(xj, dtype=int)
    offsets = np.asarray(offsets, dtype=float)
    yj = np.asarray(yj, dtype=int)
    if xj.size == 1:
        _, row = sheet_row(s, xj[0] * s.delta, (yj.min() * s.delta, yj.max() * s.delta))
        sel = yj - yj.min() if np.all(np.diff(yj) == 1) else None
        vals = offsets[0] + (row if sel is None else row[sel])
        return (vals, np.full(yj.size, xj[0])) if track else vals
    F, first = s._lpp_source(int(xj.min()))
    live = xj - first < F.shape[1]      # later starts cannot reach any y
    if not live.any():
        out = np.full(yj.size, -np.inf)
        return (out, np.full(yj.size, -1)) if track else out
    xj, offsets = xj[live], offsets[live]
    b = np.full(F.shape[1], -np.inf)
    b[xj - first] = offsets / s.scale + 2 * (xj * s.delta) * s.scale
    res = boundary_profile(F, b, s.n, 1, track=track)
    V, origin = res if track else (res, None)
    cols = yj + s.time_nodes - first
    out = s._center(V[cols], 0, yj)
    if track:
        return out, origin[cols] + first
    return out


# -- anchored geodesics --------------------------------------------------------

def anchor_point(x: float, k: int) -> float:
    if x <= 0:
        raise DomainError("anchors need x > 0")
    return -math.sqrt(k / (2 * x))


def _anchor_index(s: SheetApprox, x: float, k: int) -> int:
    if not 1 <= k <= min(s.depth_k, s.m):
        raise DomainError(f"anchor depth {k} outside 1..{min(s.depth_k, s.m)}")
    a = anchor_point(x, k)
    g = s.ensemble.grid
    if a < g.left - 0.5 * g.step:
        raise DomainError(f"anchor {a:.4f} lies before the ensemble grid start {g.left:.4f}")
    return g.index_of(a, snap=True)


def anchored_geodesic(s: SheetApprox, x: float, k: int, y: float) -> LatticePath:
    """Rightmost geodesic from ``(-sqrt(k / 2x), k)`` to ``(y, 1)`` in ``A^n``."""
    g = s.ensemble.grid
    i0 = _anchor_index(s, x, k)
    i1 = g.index_of(y, snap=True)
    if i1 < i0:
        raise DomainError("target lies before the anchor")
    return rightmost_geodesic(s.ensemble, (g.node(i0), k), (g.node(i1), 1))


def z_level(path: LatticePath, line: int) -> float:
    """Last time the path occupies ``line``: its exit time, or ``y`` on the final line."""
    if not path.end_line <= line <= path.start_line:
        raise DomainError(f"line {line} outside the path range {path.end_line}..{path.start_line}")
    if line == path.end_line:
        return path.y
    return path.jump_time(line - 1)


def anchored_difference(s: SheetApprox, x: float, k: int, line: int, at: float = 0.0) -> float:
    """``A[x_k -> (at, line)] - A[x_k -> (at, 1)]``."""
    if not 1 <= line <= k:
        raise DomainError("need 1 <= line <= k")
    i0 = _anchor_index(s, x, k)
    i1 = s.ensemble.grid.index_of(at, snap=True)
    if i1 < i0:
        raise DomainError("evaluation point lies before the anchor")
    t = forward_tables(s.ensemble.values, i0, k, 1)
    return float(t[line][i1] - t[1][i1])


def deep_difference(s: SheetApprox, x: float, line: int) -> float:
    """Same difference started from the bottom melon line at time ``2 x n^{-1/3}``."""
    if s.melon is None:
        raise UnavailableError("deep differences need the full melon")
    xj = s.node(x)
    if xj < 0:
        raise DomainError("deep start needs x >= 0")
    t = forward_tables(s.melon, xj, s.n, 1)
    return float(s.scale * (t[line][s.time_nodes] - t[1][s.time_nodes]))


@dataclass(frozen=True)
class Stabilization:
    stabilized: bool
    k_prime: int | None
    value: float | None
    diffs: dict


def stabilization_check(s: SheetApprox, x: float, line: int, k_range, tol: float = STABILITY_TOL) -> Stabilization:
    """Scan ``D_k`` over ``k_range``; stable iff constant on the trailing half."""
    ks = sorted(k for k in k_range if k >= line)
    if not ks:
        raise ParameterError("k_range has no depth at or below the requested line")
    if max(ks) > s.depth_k:
        raise ParameterError(f"k_range exceeds depth_k = {s.depth_k}")
    if line == 1:
        return Stabilization(True, ks[0], 0.0, {k: 0.0 for k in ks})
    diffs = {k: anchored_difference(s, x, k, line) for k in ks}
    vals = np.array([diffs[k] for k in ks])
    tail = vals[len(vals) // 2:]
    if tail.max() - tail.min() > tol:
        return Stabilization(False, None, None, diffs)
    last = vals[-1]
    start = len(vals) - 1
    while start > 0 and abs(vals[start - 1] - last) <= tol:
        start -= 1
    return Stabilization(True, ks[start], float(last), diffs)


def default_k_range(s: SheetApprox, line: int) -> range:
    return range(max(line, 1), s.depth_k + 1)


def line_to_point_value(s: SheetApprox, x: float, line: int, k_range=None) -> float:
    """Stabilized ``D_line(x) + S_n(x, 0)``; ``S_n(x, 0)`` itself when ``line == 1``."""
    base = sheet_value(s, x, 0.0)
    if line == 1:
        return base
    st = stabilization_check(s, x, line, k_range or default_k_range(s, line))
    if not st.stabilized:
        raise UnavailableError(f"no stabilization for x = {x}, line {line}")
    return st.value + base


@dataclass(frozen=True)
class Coalescence:
    coalesced: bool
    T: float | None             # where the shared stretch ending at T_last begins
    d: int | None               # line occupied there
    T_last: float | None = None


def coalescence_check(s: SheetApprox, x: float, y: float, z: float, k_range) -> Coalescence:
    """Shared point of the anchored geodesics to ``y`` and ``z``, common to every trailing ``k``.

    ``T_last`` is the latest shared time at or before ``y``; ``T`` walks back to
    the start of that shared stretch, i.e. the point where the paths merge.
    """
    if y > z:
        raise DomainError("need y <= z")
    g = s.ensemble.grid
    i_y = g.index_of(y, snap=True)
    if i_y == g.index_of(z, snap=True):
        return Coalescence(True, g.node(i_y), 1, g.node(i_y))
    ks = sorted(k_range)
    ks = ks[len(ks) // 2:]
    lo = max(_anchor_index(s, x, k) for k in ks)
    times = g.nodes()[lo: i_y + 1]
    common = np.ones(times.size, dtype=bool)
    level = None
    for k in ks:
        py = anchored_geodesic(s, x, k, y).lines_on(times)
        pz = anchored_geodesic(s, x, k, z).lines_on(times)
        common &= py == pz
        if level is None:
            level = py
        else:
            common &= py == level
    hits = np.flatnonzero(common)
    if hits.size == 0:
        return Coalescence(False, None, None, None)
    last = hits[-1]
    first = last
    while first > 0 and common[first - 1] and level[first - 1] == level[first]:
        first -= 1
    return Coalescence(True, float(times[first]), int(level[first]), float(times[last]))


@dataclass
class DecompositionReport:
    max_deviation: float
    L0: int
    available: bool
    unavailable: list
    points: int
    deviations: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {"max_deviation": self.max_deviation, "L0": self.L0, "available": self.available,
                "unavailable": [list(u) for u in self.unavailable], "points": self.points}


def profile_from(s: SheetApprox, line: int, at: float = 0.0) -> np.ndarray:
    """``y -> A[(at, line) -> (y, 1)]`` on the ensemble grid."""
    if line > s.m:
        raise DomainError(f"line {line} not retained (only {s.m})")
    return forward_profile(s.ensemble.values, s.ensemble.grid.index_of(at, snap=True), line, 1)


def split_line(s: SheetApprox, x0p: float, y0p: float) -> int:
    """Line at ``y = 0`` of the geodesic for ``S_n(x0', y0')``, capped at the retained lines.

    With the melon backend this is the geodesic of the deep start itself, the
    deepest anchor available at finite ``n``; otherwise the depth-``k`` anchored
    geodesic is used.
    """
    if s.backend == "melon":
        xj = s.node(x0p)
        yc = s.node(y0p) + s.time_nodes
        if not 0 <= xj <= yc:
            raise DomainError("reference point outside the melon window")
        jumps = geodesic_nodes(s.melon, xj, s.n, yc, 1, "right")
        line = 1 + sum(1 for t in jumps if t > s.time_nodes)
    else:
        line = anchored_geodesic(s, x0p, s.depth_k, y0p).line_at(0.0)
    return min(line, s.m)


def decomposition_check(s: SheetApprox, x_range, y_range, x0p: float, y0p: float,
                        k_range=None, stride: int = 1) -> DecompositionReport:
    """Compare ``S(x, y)`` with ``max_{l <= L0} (A[x -> (0, l)] + A[(0, l) -> (y, 1)])``.

    ``stride`` keeps every ``stride``-th lattice node in both directions.
    """
    xj = s.x_nodes(*x_range)[::stride]
    yj = s.y_nodes(*y_range)[::stride]
    if xj.size == 0 or yj.size == 0:
        raise DomainError("empty query grid")
    if xj.min() * s.delta < 1 - 1e-9 or yj.min() * s.delta < 1 - 1e-9:
        raise DomainError("the decomposition needs x >= 1 and y >= 1")
    if xj.max() * s.delta > x0p + 1e-9 or yj.max() * s.delta > y0p + 1e-9:
        raise DomainError("query grid must lie below the reference point (x0', y0')")
    L0 = split_line(s, x0p, y0p)
    cols = yj + s.time_nodes
    profiles = {l: profile_from(s, l)[cols] for l in range(1, L0 + 1)}
    unavailable = []
    devs = np.full((xj.size, yj.size), np.nan)
    for a, j in enumerate(xj):
        x = j * s.delta
        base = sheet_value(s, x, 0.0)
        diffs = {}
        for l in range(1, L0 + 1):
            ks = k_range or default_k_range(s, l)
            if not any(k >= l for k in ks):
                unavailable.append((x, l))      # no depth at or below line l to scan
                break
            st = stabilization_check(s, x, l, ks)
            if not st.stabilized:
                unavailable.append((x, l))
                break
            diffs[l] = st.value
        if len(diffs) < L0:
            continue
        rhs = np.max([diffs[l] + base + profiles[l] for l in diffs], axis=0)
        _, lhs = sheet_row(s, x, (yj[0] * s.delta, yj[-1] * s.delta))
        devs[a] = np.abs(lhs[yj - yj[0]] - rhs)
    ok = ~np.isnan(devs)
    md = float(devs[ok].max()) if ok.any() else float("nan")
    return DecompositionReport(md, L0, not unavailable, unavailable, int(ok.sum()), devs)
