import itertools
from math import factorial
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dsfjrw.frobenius import frobenius_data
from dsfjrw.principal import calibrate, check_normalization, genus0_free_energy, genus0_two_point
from oracles.wk import corr


@pytest.mark.parametrize("model", ["d4", "b3", "g2", "a1", "dn:4"])
def test_normalization_through_z4(model):
    cal = calibrate(model, 5)
    assert check_normalization(cal, 4) == {k: True for k in range(5)}


@pytest.mark.parametrize("model", ["d4", "b3", "g2", "a1", "dn:4"])
def test_theta_1_is_gradient_of_potential(model):
    fd = frobenius_data(model)
    cal = calibrate(fd, 2)
    for a in fd.coords:
        assert cal.theta[(a, 1)] == fd.F.diff(("v", a))


def test_theta_0_is_lowered_coordinate():
    fd = frobenius_data("d4")
    cal = calibrate(fd, 1)
    for (a, b), e in fd.eta.items():
        assert cal.theta[(a, 0)].coefficient({("v", b): 1}) == e


cal_d4 = calibrate("d4", 3)


@given(st.sampled_from((1, 2, 3, 4)), st.sampled_from((1, 2, 3, 4)), st.integers(0, 1), st.integers(0, 1))
@settings(max_examples=30, deadline=None)
def test_two_point_symmetric(a, b, p, q):
    assert genus0_two_point(cal_d4, a, p, b, q) == genus0_two_point(cal_d4, b, q, a, p)


def test_a1_genus0_against_recursion():
    F0 = genus0_free_energy(calibrate("a1", 3), 3, pmax=1).poly
    seen = set()
    for mono, c in F0.items():
        ps = []
        mult = 1
        for (_, _, p), e in mono.items():
            ps += [p] * e
            mult *= factorial(e)
        want = corr(0, tuple(sorted(ps)))
        assert Fraction(int(c.numerator), int(c.denominator)) * mult == want
        seen.add(tuple(sorted(ps)))
    for n0, n1 in itertools.product(range(7), range(4)):
        ps = (0,) * n0 + (1,) * n1
        if n0 + n1 >= 3 and corr(0, ps):
            assert ps in seen
