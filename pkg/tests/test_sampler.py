import numpy as np
import pytest

from kpzlab.errors import ParameterError, RejectionFailure
from kpzlab.grid import GridSpec
from kpzlab.sampler import (RngStream, estimate_acceptance, sample_bridge, sample_brownian,
                            sample_independent_ensemble, sample_nonintersecting_bridges)


def test_brownian_increment_variance():
    g = GridSpec.from_count(0.0, 0.01, 20001)
    f = sample_brownian(g, 1.5, 2.0, RngStream(1))
    assert f.values[0] == 1.5
    assert np.var(np.diff(f.values)) == pytest.approx(0.02, rel=0.05)


def test_brownian_determinism_and_streams():
    g = GridSpec.from_count(0.0, 0.1, 11)
    a = sample_brownian(g, 0.0, 1.0, RngStream(5, 2, "x")).values
    b = sample_brownian(g, 0.0, 1.0, RngStream(5, 2, "x")).values
    c = sample_brownian(g, 0.0, 1.0, RngStream(5, 3, "x")).values
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_bad_diffusion():
    with pytest.raises(ParameterError):
        sample_brownian(GridSpec(0, 1, 0.5), 0.0, 0.0, RngStream(0))


def test_brownian_quadratic_variation():
    g = GridSpec.from_count(0.0, 1e-4, 10001)
    qv = [np.sum(np.diff(sample_brownian(g, 0.0, 2.0, RngStream(0, r)).values) ** 2) for r in range(100)]
    assert 1.9 <= np.mean(qv) <= 2.1


def test_bridge_endpoints_and_variance():
    g = GridSpec.from_count(0.0, 0.5, 3)
    b = sample_bridge(g, 0.0, 0.0, 2.0, RngStream(0))
    assert b.values[0] == 0.0 and b.values[-1] == 0.0
    gen = np.random.default_rng(3)
    mids = [sample_bridge(g, 0.0, 0.0, 2.0, gen).values[1] for _ in range(10000)]
    assert np.var(mids) == pytest.approx(0.5, rel=0.1)


def test_nonintersecting_bridges():
    g = GridSpec.from_count(0.0, 0.05, 21)
    one = sample_nonintersecting_bridges(1, g, [0.0], [1.0], 1.0, RngStream(0))
    assert one.k == 1 and one.values[0, -1] == 1.0
    e = sample_nonintersecting_bridges(2, g, [2.0, -2.0], [2.0, -2.0], 1.0, RngStream(0))
    assert np.all(e.values[0] > e.values[1])
    assert estimate_acceptance(2, g, [2.0, -2.0], [2.0, -2.0], 1.0, RngStream(1)) > 0


def test_rejection_failure_as_gap_closes():
    g = GridSpec.from_count(0.0, 0.01, 101)
    rates = [estimate_acceptance(2, g, [d, 0.0], [d, 0.0], 1.0, RngStream(2), trials=500) for d in (1.0, 0.1, 0.001)]
    assert rates[0] > rates[1] >= rates[2]
    fine = GridSpec.from_count(0.0, 0.0005, 2001)
    with pytest.raises(RejectionFailure) as err:
        sample_nonintersecting_bridges(2, fine, [1e-6, 0.0], [1e-6, 0.0], 1.0, RngStream(0), max_attempts=20)
    assert err.value.attempts == 20 and err.value.acceptance_rate == 0.0


def test_independent_ensemble_starts():
    g = GridSpec.from_count(0.0, 0.1, 11)
    e = sample_independent_ensemble(2, g, [1.0, -1.0], 1.0, RngStream(0))
    np.testing.assert_array_equal(e.values[:, 0], [1.0, -1.0])
    with pytest.raises(ParameterError):
        sample_independent_ensemble(3, g, [1.0, -1.0], 1.0, RngStream(0))
