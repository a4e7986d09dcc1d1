import numpy as np
import pytest

from kpzlab import kpz, sheet
from kpzlab.errors import DomainError, NonFinitaryError, ParameterError, UnavailableError
from kpzlab.oracle import oracle_evolve
from kpzlab.sampler import RngStream


def test_finitary_examples():
    assert kpz.is_finitary(kpz.narrow_wedge(), 1.0)
    for t in (0.1, 1.0, 10.0):
        assert kpz.is_finitary(kpz.flat(), t)
    rep = kpz.is_finitary(kpz.parabola(1.0), 1.0)
    assert not rep and rep.ratios
    assert kpz.is_finitary(kpz.parabola(0.5), 1.0)
    with pytest.raises(ParameterError):
        kpz.is_finitary(kpz.flat(), 0.0)


def test_parse_ic():
    assert kpz.parse_ic("narrow-wedge").support == ((0.0, 0.0),)
    assert kpz.parse_ic("narrow-wedge@0.5").point_masses() == [0.5]
    assert kpz.parse_ic("parabola:-1")(np.array([2.0]))[0] == -4.0
    assert kpz.parse_ic("parabola[2]")(np.array([1.0]))[0] == 2.0
    with pytest.raises(ParameterError):
        kpz.parse_ic("wedge")


def test_ic_file_roundtrip(tmp_path):
    x = np.linspace(-1, 1, 5)
    v = np.array([-np.inf, 0.5, 1.0, 0.5, -np.inf])
    kpz.write_ic_csv(x, v, tmp_path / "ic.csv")
    ic = kpz.parse_ic(f"file:{tmp_path / 'ic.csv'}")
    assert ic.compact and ic.hull == (-0.5, 0.5)
    assert ic(np.array([0.25]))[0] == pytest.approx(0.75)
    assert ic(np.array([0.9]))[0] == -np.inf


def test_window_compact_support():
    ic = kpz.from_grid([1.0, 1.5, 2.0], [0.0, 1.0, 0.0])
    assert kpz.restriction_window(ic, 1.0, (-1, 1)) == (1.0, 2.0)


def test_flat_window_dominates_outside():
    lo, hi = kpz.restriction_window(kpz.flat(), 1.0, (-1.0, 1.0), C=5.0)
    assert lo == pytest.approx(-hi)
    ys = np.linspace(-1, 1, 41)
    xs = np.linspace(-30, 30, 60001)
    inner = np.max(-xs[None, :] ** 2 + 2 * xs[None, :] * ys[:, None] - 5 * np.abs(xs) ** 0.2, axis=1)
    out = xs[np.abs(xs) >= hi]
    up = -out[None, :] ** 2 + 2 * out[None, :] * ys[:, None] + 5 * np.abs(out) ** 0.2
    assert np.all(up - inner[:, None] + 10 < 0)


def test_stub_evolutions():
    st = kpz.parabolic_stub()
    ev = kpz.evolve_details(kpz.flat(), 1.0, st, (-1.0, 1.0))
    assert np.max(np.abs(ev.h)) <= 1e-12
    a = 0.5
    ev = kpz.evolve_details(kpz.narrow_wedge(a), 1.0, st, (-1.0, 1.0))
    np.testing.assert_allclose(ev.h, -(a - ev.y) ** 2, atol=1e-12)
    # scaled evolution: t^{1/3} S(x t^{-2/3}, y t^{-2/3}) = -(x - y)^2 / t on the stub
    t = 0.5
    ev = kpz.evolve_details(kpz.narrow_wedge(a), t, st, (-1.0, 1.0))
    snapped = ev.x[0]
    np.testing.assert_allclose(ev.h, -(snapped - ev.y) ** 2 / t, atol=1e-12)
    assert abs(snapped - a) <= t ** (2 / 3) * st.delta


def test_stub_window_matches_scan():
    st = kpz.parabolic_stub()
    ev = kpz.evolve_details(kpz.parabola(-0.5), 1.0, st, (-0.5, 0.5))
    xs = np.arange(-800, 801) * st.delta
    for i in (0, len(ev.y) // 2, len(ev.y) - 1):
        ref = oracle_evolve(kpz.parabola(-0.5), lambda x, y: -(x - y) ** 2, ev.y[i], xs)
        assert ev.h[i] == pytest.approx(ref, abs=1e-12)


def test_two_step_stub():
    st = kpz.parabolic_stub()
    ev = kpz.evolve_two_step(kpz.narrow_wedge(), st, st, (-1.0, 1.0))
    # each half step contributes -(x - y)^2 / (1/2); the optimum z = y / 2 gives -y^2,
    # up to the lattice: z lives on nodes spaced 2^{-2/3} delta
    step = 0.5 ** (2 / 3) * st.delta
    z = np.arange(-400, 401) * step
    lattice = np.max(-2 * z[None, :] ** 2 - 2 * (z[None, :] - ev.y[:, None]) ** 2, axis=1)
    np.testing.assert_allclose(ev.h, lattice, atol=1e-10)
    assert np.max(np.abs(ev.h + ev.y ** 2)) <= step ** 2 + 1e-12


def test_non_finitary_refused():
    with pytest.raises(NonFinitaryError):
        kpz.evolve_details(kpz.parabola(1.0), 1.0, kpz.parabolic_stub(), (0, 1))


def test_narrow_wedge_is_top_line():
    s = sheet.build_sheet_approx(50, 1, (0.0, 0.0), (-1.0, 1.0), 0.02, RngStream(6), with_melon=False)
    ev = kpz.evolve_details(kpz.narrow_wedge(), 1.0, s, (-1.0, 1.0))
    np.testing.assert_array_equal(ev.h, s.top_line_at(np.rint(ev.y / s.delta).astype(int)))


def test_window_choice_does_not_change_profile():
    s = sheet.build_sheet_approx(30, 1, (-6.0, 6.0), (-0.5, 0.5), 0.05, RngStream(2), with_melon=False)
    w = kpz.restriction_window(kpz.flat(), 1.0, (-0.5, 0.5))
    a = kpz.evolve_details(kpz.flat(), 1.0, s, (-0.5, 0.5), window=w)
    b = kpz.evolve_details(kpz.flat(), 1.0, s, (-0.5, 0.5), window=(-5.9, 5.9))
    np.testing.assert_array_equal(a.h, b.h)


def test_coverage_error_names_range():
    s = sheet.build_sheet_approx(30, 1, (-0.2, 0.2), (-0.5, 0.5), 0.05, RngStream(2), with_melon=False)
    with pytest.raises(DomainError, match="x-range"):
        kpz.evolve_details(kpz.flat(), 1.0, s, (-0.5, 0.5))


def test_g_ell_and_decomposition_on_stub():
    s = sheet.fan_stub()
    h0 = kpz.narrow_wedge(1.2)
    assert kpz.g_ell(h0, s, 1) == pytest.approx(sheet.sheet_value(s, 1.2, 0.0))
    assert kpz.g_ell(h0, s, 3, range(3, 7)) == pytest.approx(sheet.line_to_point_value(s, 1.2, 3, range(3, 7)))
    rep = kpz.decompose_evolution(h0, s, (1.0, 1.2), 3, k_range=range(3, 7))
    assert rep.available and rep.max_deviation <= 1e-9
    box = kpz.from_grid(np.array([1.0, 1.1, 1.2]), np.array([0.0, 0.3, -0.1]))
    rep = kpz.decompose_evolution(box, s, (1.0, 1.2), 2, k_range=range(2, 7))
    assert rep.available and rep.max_deviation <= 1e-9


def test_decomposition_reports_unavailable():
    s = sheet.build_sheet_approx(20, 3, (1.0, 1.2), (0.0, 1.2), 0.05, RngStream(0), backend="melon")
    try:
        kpz.g_ell(kpz.narrow_wedge(1.0), s, 3, range(3, 4))
    except UnavailableError:
        pass
    with pytest.raises(DomainError):
        kpz.decompose_evolution(kpz.narrow_wedge(0.5), s, (1.0, 1.2), 1)
