import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dicebench.errors import DimensionMismatch
from dicebench.grid import HardSegmentation, LogitField, MarginalMap
from dicebench.metrics import cross_entropy, dice, error_pair, soft_dice, soft_dice_extension

unit = st.floats(0.0, 1.0, allow_nan=False)
bits = st.sampled_from([0.0, 1.0])


def test_dice_examples():
    s = HardSegmentation.from_array([1, 0, 1, 1])
    assert dice(s.as_role(MarginalMap), s) == 1.0
    assert dice(MarginalMap.from_array([0.7, 0.4, 0, 0]), HardSegmentation.from_array([0, 0, 1, 1])) == 0.0
    m = MarginalMap.full((5, 5), 0.5)
    ones = HardSegmentation.full((5, 5), 1.0)
    assert dice(m, ones) == pytest.approx(2 / 3, abs=1e-15)
    # direct summation cross-check
    assert dice(m, ones) == pytest.approx(2 * sum([0.5] * 25) / 25 / (1 + 0.5), abs=1e-15)


def test_dice_zero_over_zero():
    assert dice(MarginalMap.full((3,), 0.0), HardSegmentation.full((3,), 0.0)) == 0.0
    assert soft_dice(MarginalMap.full((3,), 0.0), MarginalMap.full((3,), 0.0)) == 1.0


def test_soft_dice_examples():
    m = MarginalMap.from_array([1, 0, 1, 0])
    assert soft_dice(m, m) == 0.0
    assert soft_dice(m, MarginalMap.from_array([0, 0.3, 0, 1])) == 1.0
    assert soft_dice(MarginalMap.from_array([1, 0]), MarginalMap.from_array([0.5, 0.5])) == pytest.approx(0.5)


@given(arrays(float, 10, elements=unit), arrays(float, 10, elements=unit))
def test_extension_complements_soft_dice(m, c):
    mm, cc = MarginalMap((10,), m), MarginalMap((10,), c)
    assert soft_dice_extension(mm, cc) + soft_dice(mm, cc) == pytest.approx(1.0, abs=1e-15)


@given(arrays(float, 10, elements=unit))
def test_extension_vanishes_for_zero_marginal(c):
    assert soft_dice_extension(MarginalMap.full((10,), 0.0), MarginalMap((10,), c)) == 0.0


@given(arrays(float, 10, elements=unit), arrays(float, 10, elements=bits))
def test_hard_predictions_reduce_to_dice(m, s):
    mm, ss = MarginalMap((10,), m), HardSegmentation((10,), s)
    assert soft_dice_extension(mm, ss) == dice(mm, ss)
    # 1 - (1 - x) can differ from x by one rounding
    assert 1.0 - soft_dice(mm, ss) == pytest.approx(dice(mm, ss), abs=np.finfo(float).eps)


@given(arrays(float, 16, elements=unit), arrays(float, 16, elements=bits))
def test_dice_numerator_is_order_symmetric(m, s):
    assert np.sum(s * m) == np.sum(m * s)


@given(arrays(float, 12, elements=unit), arrays(float, 12, elements=bits), st.integers(0, 11))
def test_adding_cell_above_half_dice_never_hurts(m, s, i):
    mm = MarginalMap((12,), m)
    s0 = HardSegmentation((12,), s)
    d0 = dice(mm, s0)
    if s[i] == 0 and m[i] > d0 / 2:
        s1 = s.copy()
        s1[i] = 1.0
        assert dice(mm, HardSegmentation((12,), s1)) >= d0 - 1e-15


def test_cross_entropy_examples():
    assert cross_entropy(MarginalMap.from_array([1.0]), MarginalMap.from_array([1.0])) == pytest.approx(0, abs=1e-11)
    assert cross_entropy(MarginalMap.from_array([0.5]), MarginalMap.from_array([0.5])) == pytest.approx(math.log(2))


@given(arrays(float, 8, elements=st.floats(0.01, 0.99)), arrays(float, 8, elements=st.floats(0.001, 0.999)))
def test_cross_entropy_minimized_at_marginal(m, c):
    mm = MarginalMap((8,), m)
    assert cross_entropy(mm, mm) <= cross_entropy(mm, MarginalMap((8,), c)) + 1e-12


@given(unit, st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_cross_entropy_midpoint_convex(m, a, b):
    mm = MarginalMap.from_array([m])

    def ce(x):
        return cross_entropy(mm, MarginalMap.from_array([x]))

    assert ce((a + b) / 2) <= (ce(a) + ce(b)) / 2 + 1e-12


def test_error_pair_examples():
    ones = HardSegmentation.full((4, 4), 1.0)
    sat = error_pair(LogitField.full((4, 4), 100.0), ones, 1)
    assert sat.e0 == pytest.approx(0, abs=1e-40) and sat.e1 == 0.0
    mid = error_pair(LogitField.full((4, 4), 0.0), ones, 3)
    assert (mid.e0, mid.e1, mid.iteration) == (0.5, 0.0, 3)


def test_error_pair_random_init_is_half(rng):
    n = 200 * 200
    s = HardSegmentation((200, 200), (rng.random(n) < 0.3).astype(float))
    ep = error_pair(LogitField((200, 200), rng.normal(size=n)), s, 1)
    assert ep.e0 == pytest.approx(0.5, abs=0.02)


@pytest.mark.parametrize("fn", [dice, soft_dice, soft_dice_extension, cross_entropy])
def test_dimension_mismatch(fn):
    with pytest.raises(DimensionMismatch):
        fn(MarginalMap.full((2, 2), 0.5), HardSegmentation.full((4,), 1.0))
