import math

import numpy as np
import pytest

from kpzlab import kpz
from kpzlab.errors import DomainError, RefusalError
from kpzlab.oracle import oracle_evolve, oracle_lpp, oracle_pitman


def test_lpp_examples():
    toy = np.array([[0.0, 1.0, 1.0], [0.0, 2.0, 0.0]])
    assert oracle_lpp(toy, (0, 2), (2, 1)) == 2.0
    assert oracle_lpp([[0.0, 3.0, 1.0]], (0, 1), (2, 1)) == 1.0
    with pytest.raises(DomainError):
        oracle_lpp(toy, (2, 2), (0, 1))
    with pytest.raises(RefusalError):
        oracle_lpp(np.zeros((6, 300)), (0, 6), (299, 1))


def test_pitman_examples():
    assert oracle_pitman([0, 1, 1], [0, 2, 0], 2) == 2.0
    assert oracle_pitman([0, 1, 3], [0, -1, 0], 2) == 3.0


def test_evolve_examples():
    xs = np.linspace(-3, 3, 601)
    sh = lambda x, y: -(x - y) ** 2
    assert oracle_evolve(kpz.flat(), sh, 0.4, xs) == pytest.approx(0.0, abs=1e-12)
    assert oracle_evolve(kpz.narrow_wedge(0.5), sh, 0.1, xs) == pytest.approx(-0.16)
    assert oracle_evolve(kpz.narrow_wedge(10.0), sh, 0.1, xs) == -math.inf
