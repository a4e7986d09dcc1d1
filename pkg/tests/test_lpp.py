import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kpzlab.errors import DomainError, RefusalError
from kpzlab.grid import GridSpec, LineEnsemble, path_length
from kpzlab.lpp import (compose_values, enumerate_oracle, last_passage_profile, last_passage_value,
                        leftmost_geodesic, multi_start_profile, multi_start_value, rightmost_geodesic)
from kpzlab.oracle import oracle_lpp
from kpzlab.pitman import pitman_pair

G3 = GridSpec(0.0, 2.0, 1.0)
TOY = LineEnsemble(G3, np.array([[0.0, 1.0, 1.0], [0.0, 2.0, 0.0]]))


def test_toy_value():
    assert last_passage_value(TOY, (0, 2), (2, 1)) == 2.0
    assert last_passage_value(LineEnsemble(G3, [[0, 3, 1]]), (0, 1), (2, 1)) == 1.0
    assert last_passage_value(LineEnsemble(G3, np.zeros((3, 3))), (0, 3), (1, 1)) == 0.0


def test_endpoint_errors():
    with pytest.raises(DomainError):
        last_passage_value(TOY, (2, 2), (0, 1))
    with pytest.raises(DomainError):
        last_passage_value(TOY, (0.5, 2), (2, 1))
    with pytest.raises(DomainError):
        last_passage_value(TOY, (0, 1), (2, 2))


def test_profile_matches_pointwise():
    f = LineEnsemble(GridSpec.from_count(0.0, 1.0, 9), np.random.default_rng(2).normal(size=(3, 9)))
    prof = last_passage_profile(f, (2.0, 3), 1)
    for i, y in enumerate(prof.nodes()):
        assert prof.values[i] == last_passage_value(f, (2.0, 3), (y, 1))
    assert last_passage_profile(f, (2.0, 1), 1).values[0] == 0.0


def test_tie_breaking():
    z = LineEnsemble(G3, np.zeros((2, 3)))
    assert rightmost_geodesic(z, (0, 2), (2, 1)).jumps == (2.0,)
    assert leftmost_geodesic(z, (0, 2), (2, 1)).jumps == (0.0,)


def test_geodesic_attains_value():
    f = LineEnsemble(GridSpec.from_count(0.0, 1.0, 12), np.random.default_rng(4).normal(size=(4, 12)))
    for geo in (rightmost_geodesic, leftmost_geodesic):
        p = geo(f, (0.0, 4), (11.0, 1))
        assert path_length(f, p) == pytest.approx(last_passage_value(f, (0.0, 4), (11.0, 1)), abs=1e-12)


def test_composition_examples():
    assert compose_values(TOY, (0, 2), (0, 1), (2, 1)) == 1.0
    p = rightmost_geodesic(TOY, (0, 2), (2, 1))
    assert compose_values(TOY, (0, 2), (p.jump_time(1), 1), (2, 1)) == 2.0


def test_multi_start_examples():
    f = LineEnsemble(GridSpec.from_count(0.0, 1.0, 6), np.random.default_rng(1).normal(size=(2, 6)))
    f = LineEnsemble(f.grid, f.values - f.values[:, :1])
    V = multi_start_profile(f, [0.7])
    np.testing.assert_allclose(V, 0.7 + f.values[0] - f.values[0, 0], atol=1e-12)
    assert multi_start_value(f, [0.3, 1.2], 0.0) == 1.2
    # two lines: top line of the Pitman transform of f1 + g1 off f2 + g2
    g = [0.4, 0.9]
    w1, _ = pitman_pair(type(f.line(1))(f.grid, f.values[0] + g[0]), type(f.line(1))(f.grid, f.values[1] + g[1]))
    np.testing.assert_allclose(multi_start_profile(f, g), w1.values, atol=1e-12)


def test_enumeration_examples():
    v, opt = enumerate_oracle(TOY, (0, 2), (2, 1))
    assert v == 2.0 and opt == [(1.0,)]
    v, opt = enumerate_oracle(LineEnsemble(G3, np.zeros((2, 3))), (0, 2), (2, 1))
    assert v == 0.0 and len(opt) == 3
    big = LineEnsemble(GridSpec.from_count(0.0, 1.0, 200), np.zeros((6, 200)))
    with pytest.raises(RefusalError):
        enumerate_oracle(big, (0, 6), (199, 1))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(2, 20))
def test_dp_matches_oracles(seed, k, nodes):
    gen = np.random.default_rng(seed)
    f = LineEnsemble(GridSpec.from_count(0.0, 1.0, nodes), gen.normal(size=(k, nodes)))
    i, j = sorted(gen.integers(0, nodes, size=2))
    m, l = sorted(gen.integers(1, k + 1, size=2))
    v = last_passage_value(f, (float(i), int(l)), (float(j), int(m)))
    assert v == pytest.approx(enumerate_oracle(f, (float(i), int(l)), (float(j), int(m)))[0], abs=1e-9)
    assert v == pytest.approx(oracle_lpp(f, (int(i), int(l)), (int(j), int(m))), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reverse_triangle(seed):
    gen = np.random.default_rng(seed)
    f = LineEnsemble(GridSpec.from_count(0.0, 1.0, 10), gen.normal(size=(4, 10)))
    direct = last_passage_value(f, (0.0, 4), (9.0, 1))
    best = -math.inf
    for z in range(10):
        for j in range(1, 5):
            c = compose_values(f, (0.0, 4), (float(z), j), (9.0, 1))
            assert c <= direct + 1e-12
            best = max(best, c)
    assert best == pytest.approx(direct, abs=1e-12)
