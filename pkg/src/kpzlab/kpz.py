"""Initial conditions and the variational KPZ fixed-point evolution."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import (DomainError, NonFinitaryError, ParameterError, UnavailableError,
                     ValidationError, WindowNotFoundError)
from .grid import GridFunction, GridSpec
from .sheet import (DecompositionReport, SheetApprox, default_k_range, profile_from,
                    sheet_column, stabilization_check, sup_over_starts)

NEG_INF = -np.inf


@dataclass(frozen=True, eq=False)
class InitialCondition:
    """``h0 : R -> R u {-inf}`` with a declared support (closed intervals)."""

    name: str
    support: tuple[tuple[float, float], ...]
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __post_init__(self):
        if not self.support:
            raise ValidationError("an initial condition must be finite somewhere")

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.asarray(self.fn(xa), dtype=float)
        inside = np.zeros(xa.shape, dtype=bool)
        for lo, hi in self.support:
            inside |= (xa >= lo - 1e-12) & (xa <= hi + 1e-12)
        return np.where(inside, out, NEG_INF)

    @property
    def compact(self) -> bool:
        return all(math.isfinite(lo) and math.isfinite(hi) for lo, hi in self.support)

    @property
    def hull(self) -> tuple[float, float]:
        return min(lo for lo, _ in self.support), max(hi for _, hi in self.support)

    def point_masses(self) -> list[float]:
        return [lo for lo, hi in self.support if lo == hi]

    def shifted(self, c: float) -> "InitialCondition":
        return InitialCondition(f"{self.name}+{c}", self.support, lambda x: self.fn(x) + c)


def narrow_wedge(a: float = 0.0) -> InitialCondition:
    return InitialCondition(f"narrow-wedge@{a}", ((a, a),), lambda x: np.zeros_like(x))


def flat() -> InitialCondition:
    return InitialCondition("flat", ((-math.inf, math.inf),), lambda x: np.zeros_like(x))


def parabola(c: float) -> InitialCondition:
    return InitialCondition(f"parabola:{c}", ((-math.inf, math.inf),), lambda x: c * x ** 2)


def from_grid(x, values, name: str = "grid") -> InitialCondition:
    """Piecewise-linear IC on uniform nodes; ``-inf`` entries mark points outside the support."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(values, dtype=float)
    if x.shape != v.shape or x.size < 1:
        raise ValidationError("x and values must have the same non-empty shape")
    if np.any(np.isnan(v)) or np.any(v == np.inf):
        raise ValidationError("IC values must be finite or -inf")
    if x.size > 1 and np.any(np.diff(x) <= 0):
        raise ValidationError("IC nodes must be increasing")
    fin = np.isfinite(v)
    if not fin.any():
        raise ValidationError("an initial condition must be finite somewhere")
    runs = []
    i = 0
    while i < x.size:
        if fin[i]:
            j = i
            while j + 1 < x.size and fin[j + 1]:
                j += 1
            runs.append((float(x[i]), float(x[j])))
            i = j + 1
        else:
            i += 1
    xf, vf = x.copy(), v.copy()

    def fn(q):
        q = np.asarray(q, dtype=float)
        out = np.full(q.shape, NEG_INF)
        for lo, hi in runs:
            sel = (q >= lo - 1e-12) & (q <= hi + 1e-12)
            seg = (xf >= lo) & (xf <= hi)
            if lo == hi:
                out[sel] = vf[seg][0]
            else:
                out[sel] = np.interp(q[sel], xf[seg], vf[seg])
        return out

    return InitialCondition(name, tuple(runs), fn)


def read_ic_csv(path: str | Path) -> InitialCondition:
    """Two-column CSV ``x,value``; ``-inf`` (or ``-Infinity``) marks excluded points."""
    xs, vs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() in ("x", "#"):
                continue
            xs.append(float(row[0]))
            vs.append(float(row[1].strip().replace("Infinity", "inf")))
    return from_grid(xs, vs, name=f"file:{Path(path).name}")


def write_ic_csv(ic_x, ic_v, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "value"])
        for a, b in zip(ic_x, ic_v):
            w.writerow([repr(float(a)), "-inf" if b == NEG_INF else repr(float(b))])


def parse_ic(spec: str) -> InitialCondition:
    """Parse ``narrow-wedge[@a]``, ``flat``, ``parabola:c`` (or ``parabola[c]``) and ``file:path``."""
    spec = spec.strip()
    if spec.startswith("narrow-wedge"):
        rest = spec[len("narrow-wedge"):]
        if not rest:
            return narrow_wedge(0.0)
        if rest.startswith("@"):
            return narrow_wedge(float(rest[1:]))
    elif spec == "flat":
        return flat()
    elif spec.startswith("parabola"):
        rest = spec[len("parabola"):].strip()
        if rest.startswith(":"):
            return parabola(float(rest[1:]))
        if rest.startswith("[") and rest.endswith("]"):
            return parabola(float(rest[1:-1]))
    elif spec.startswith("file:"):
        return read_ic_csv(spec[5:])
    raise ParameterError(f"cannot parse initial condition {spec!r}")


# -- finitary test and restriction window --------------------------------------

@dataclass(frozen=True)
class FinitaryReport:
    finitary: bool
    reason: str
    ratios: dict

    def __bool__(self) -> bool:
        return self.finitary


def is_finitary(h0: InitialCondition, t: float, probe: float = 1000.0,
                threshold: float = 10.0) -> FinitaryReport:
    """Grid-level growth test: ``(h0(x) - x^2/t) / |x|`` must fall below ``-threshold`` and keep falling."""
    if not t > 0:
        raise ParameterError("t must be positive")
    if h0.compact:
        return FinitaryReport(True, "compact support, bounded above", {})
    lo, hi = h0.hull
    ratios = {}
    ok = True
    for side, unbounded in ((-1.0, lo == -math.inf), (1.0, hi == math.inf)):
        if not unbounded:
            continue
        pts = np.array([side * probe / 2, side * probe])
        r = (h0(pts) - pts ** 2 / t) / np.abs(pts)
        ratios[side * probe / 2], ratios[side * probe] = float(r[0]), float(r[1])
        if not (r[1] < -threshold and r[1] <= r[0]):
            ok = False
    reason = ("growth ratio tends to -inf" if ok else
              f"(h0(x) - x^2/t)/|x| does not tend to -inf at t = {t} (ratios {ratios})")
    return FinitaryReport(ok, reason, ratios)


def restriction_window(h0: InitialCondition, t: float, y_range, C: float = 5.0,
                       margin: float = 0.2, max_extent: float = 1e6,
                       samples: int = 4001) -> tuple[float, float]:
    """Interval outside of which no start can beat the interior for any ``y`` in range.

    Uses the envelope ``h0(x) - x^2/t + 2xy/t +- C (1 + |x|^{1/5})`` and
    enlarges the active hull by ``margin`` about its centre.
    """
    if not t > 0:
        raise ParameterError("t must be positive")
    if h0.compact:
        return h0.hull
    ys = np.linspace(y_range[0], y_range[1], 41)
    X = 16.0
    while X <= max_extent:
        xs = np.linspace(-X, X, samples)
        base = h0(xs) - xs ** 2 / t
        wig = C * np.abs(xs) ** 0.2
        sup_lo = np.max(base[None, :] + 2 * xs[None, :] * ys[:, None] / t - wig[None, :], axis=1)

        def active(x):
            x = np.atleast_1d(x)
            b = h0(x) - x ** 2 / t
            up = b[None, :] + 2 * x[None, :] * ys[:, None] / t + C * np.abs(x)[None, :] ** 0.2
            return np.max(up - sup_lo[:, None], axis=0) + 2 * C

        F = active(xs)
        on = np.flatnonzero(F >= 0)
        if on.size and on[0] > 0 and on[-1] < xs.size - 1:
            a = _edge(active, xs[on[0] - 1], xs[on[0]])
            b = _edge(active, xs[on[-1]], xs[on[-1] + 1])
            c, half = 0.5 * (a + b), 0.5 * (b - a) * (1 + margin)
            lo, hi = h0.hull
            return max(c - half, lo), min(c + half, hi)
        X *= 4
    raise WindowNotFoundError(f"envelope still active at |x| = {max_extent}; enlarge the grid")


def _edge(F, a: float, b: float) -> float:
    fa, fb = float(F(a)[0]), float(F(b)[0])
    if not (np.isfinite(fa) and np.isfinite(fb)) or fa * fb > 0:
        return b if fb >= 0 else a
    return brentq(lambda x: float(F(x)[0]), a, b, xtol=1e-12)


# -- evolution -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StubSheet:
    """Deterministic closed-form sheet on the lattice ``delta * Z`` (for tests and oracles)."""

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    delta: float
    x_range: tuple[float, float]
    y_range: tuple[float, float]

    def sup_over_starts(self, xj, offsets, yj, track: bool = False):
        xs = np.asarray(xj) * self.delta
        ys = np.asarray(yj) * self.delta
        vals = np.asarray(offsets)[:, None] + self.func(xs[:, None], ys[None, :])
        best = vals.max(axis=0)
        if track:
            am = vals.shape[0] - 1 - np.argmax(vals[::-1], axis=0)
            return best, np.asarray(xj)[am]
        return best


def parabolic_stub(delta: float = 0.01, x_range=(-10.0, 10.0), y_range=(-10.0, 10.0)) -> StubSheet:
    return StubSheet(lambda x, y: -(x - y) ** 2, delta, tuple(x_range), tuple(y_range))


@dataclass
class Evolution:
    y: np.ndarray
    h: np.ndarray
    window: tuple[float, float]
    argmax_x: np.ndarray
    x: np.ndarray = field(repr=False)

    def profile(self) -> GridFunction:
        if self.y.size < 2:
            raise DomainError("profile needs at least two y nodes")
        if not np.all(np.isfinite(self.h)):
            raise DomainError("evolution is -inf somewhere in the y-range; no admissible start")
        step = self.y[1] - self.y[0]
        return GridFunction(GridSpec.from_count(self.y[0], step, self.y.size), self.h)


def _sup(s, xj, offsets, yj, track):
    if isinstance(s, SheetApprox):
        return sup_over_starts(s, xj, offsets, yj, track=track)
    return s.sup_over_starts(xj, offsets, yj, track=track)


def _lattice(lo: float, hi: float, step: float) -> np.ndarray:
    return np.arange(math.ceil(lo / step - 1e-9), math.floor(hi / step + 1e-9) + 1)


def _cover(rng, lo, hi, name):
    if lo < rng[0] - 1e-9 or hi > rng[1] + 1e-9:
        raise DomainError(f"sheet {name}-range [{rng[0]}, {rng[1]}] does not cover [{lo:.4f}, {hi:.4f}]")


def evolve_details(h0: InitialCondition, t: float, s, y_range, C: float = 5.0,
                   window: tuple[float, float] | None = None,
                   check_finitary: bool = True) -> Evolution:
    """``h_t(y) = max_x (h0(x) + t^{1/3} S(x t^{-2/3}, y t^{-2/3}))`` over the restriction window."""
    if not t > 0:
        raise ParameterError("t must be positive")
    if check_finitary:
        rep = is_finitary(h0, t)
        if not rep:
            raise NonFinitaryError(rep.reason)
    if window is None:
        window = restriction_window(h0, t, y_range, C)
    sx = t ** (2 / 3)
    st = t ** (1 / 3)
    step = sx * s.delta
    xj = _lattice(window[0], window[1], step)
    for p in h0.point_masses():
        if window[0] - 1e-12 <= p <= window[1] + 1e-12:
            xj = np.union1d(xj, [int(round(p / step))])
    vals = h0(xj * step)
    for p in h0.point_masses():
        j = int(round(p / step))
        vals[xj == j] = np.maximum(vals[xj == j], h0(np.array([p]))[0])
    keep = np.isfinite(vals)
    if not keep.any():
        raise DomainError("no finite initial value on the evolution lattice")
    xj, vals = xj[keep], vals[keep]
    yj = _lattice(y_range[0], y_range[1], step)
    if yj.size == 0:
        raise DomainError("y-range contains no lattice node")
    _cover(s.x_range, xj.min() * s.delta, xj.max() * s.delta, "x")
    _cover(s.y_range, yj.min() * s.delta, yj.max() * s.delta, "y")
    sup, origin = _sup(s, xj, vals / st, yj, True)
    return Evolution(yj * step, st * sup, tuple(window), origin * step, xj * step)


def evolve(h0: InitialCondition, t: float, s, y_range, C: float = 5.0) -> GridFunction:
    return evolve_details(h0, t, s, y_range, C).profile()


def midpoint_range(h0: InitialCondition, y_range, C: float = 5.0, pad: float = 1.5) -> tuple[float, float]:
    """Range of intermediate positions searched by the two-step evolution."""
    lo, hi = restriction_window(h0, 1.0, y_range, C)
    lo, hi = min(lo, y_range[0]), max(hi, y_range[1])
    p = max(pad, 0.25 * (hi - lo))
    return lo - p, hi + p


def evolve_two_step(h0: InitialCondition, s_a, s_b, y_range, C: float = 5.0,
                    z_range: tuple[float, float] | None = None) -> Evolution:
    """Evolve to time 1/2 on ``s_a``, then from the intermediate profile to time 1 on ``s_b``."""
    rep = is_finitary(h0, 1.0)
    if not rep:
        raise NonFinitaryError(rep.reason)
    z_range = z_range or midpoint_range(h0, y_range, C)
    first = evolve_details(h0, 0.5, s_a, z_range, C)
    # -inf entries are intermediate points no finite-n path reaches; they stay excluded
    if not np.isfinite(first.h).any():
        raise DomainError("intermediate profile is -inf everywhere; widen the sheets")
    U = from_grid(first.y, first.h, name="intermediate")
    return evolve_details(U, 0.5, s_b, y_range, C, check_finitary=False)


# -- G_l decomposition ---------------------------------------------------------

def _compact_nodes(h0: InitialCondition, s: SheetApprox) -> tuple[np.ndarray, np.ndarray]:
    if not h0.compact:
        raise DomainError("initial condition must be compactly supported")
    lo, hi = h0.hull
    if lo < 1 - 1e-9:
        raise DomainError("support must lie in [1, x0]")
    xj = s.x_nodes(lo, hi)
    for p in h0.point_masses():
        xj = np.union1d(xj, [s.node(p)])
    vals = h0(xj * s.delta)
    for p in h0.point_masses():
        vals[xj == s.node(p)] = h0(np.array([p]))[0]
    keep = np.isfinite(vals)
    return xj[keep], vals[keep]


def _sheet_at_zero(s: SheetApprox, xj: np.ndarray) -> np.ndarray:
    lo, hi = xj.min() * s.delta, xj.max() * s.delta
    _, col = sheet_column(s, 0.0, (lo, hi))
    return col[xj - s.x_nodes(lo, hi)[0]]


def _stabilized(s: SheetApprox, xj: np.ndarray, line: int, k_range) -> tuple[np.ndarray, list]:
    out = np.empty(xj.size)
    for a, j in enumerate(xj.tolist()):
        st = stabilization_check(s, j * s.delta, line, k_range or default_k_range(s, line))
        if not st.stabilized:
            return out, [(j * s.delta, line)]
        out[a] = st.value
    return out, []


def g_ell(h0: InitialCondition, s: SheetApprox, line: int, k_range=None) -> float:
    """``G_l = max_x (h0(x) + A[x -> (0, l)])`` over the support nodes."""
    xj, vals = _compact_nodes(h0, s)
    base = vals + _sheet_at_zero(s, xj)
    if line == 1:
        return float(base.max())
    d, missing = _stabilized(s, xj, line, k_range)
    if missing:
        raise UnavailableError(f"no stabilization for x = {missing[0][0]}, line {line}")
    return float((base + d).max())


def decompose_evolution(h0: InitialCondition, s: SheetApprox, y_range, L0: int,
                        k_range=None) -> DecompositionReport:
    """Compare the evolution at ``t = 1`` with ``max_{l <= L0} (G_l + A[(0, l) -> (y, 1)])``."""
    ev = evolve_details(h0, 1.0, s, y_range)
    yj = np.rint(ev.y / s.delta).astype(int)
    xj, vals = _compact_nodes(h0, s)
    base = vals + _sheet_at_zero(s, xj)
    G = {1: float(base.max())}
    for l in range(2, L0 + 1):
        d, missing = _stabilized(s, xj, l, k_range)
        if missing:
            return DecompositionReport(float("nan"), L0, False, missing, 0, None)
        G[l] = float((base + d).max())
    cols = yj + s.time_nodes
    rhs = np.max([G[l] + profile_from(s, l)[cols] for l in G], axis=0)
    dev = np.abs(ev.h - rhs)
    return DecompositionReport(float(dev.max()), L0, True, [], int(dev.size), dev)
