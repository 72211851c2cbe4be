import itertools
from fractions import Fraction
from math import factorial

import pytest

from dsfjrw import taugen
from dsfjrw.corering import Poly, Q
from dsfjrw.frobenius import frobenius_data
from oracles.wk import corr


@pytest.fixture(scope="module")
def kdv():
    return taugen.assemble("a1", 4, 2)


def test_every_a1_coefficient_matches_recursion(kdv):
    seen = set()
    for g, F in kdv.strata.items():
        for mono, c in F.items():
            ps = []
            mult = 1
            for (_, _, p), e in mono.items():
                ps += [p] * e
                mult *= factorial(e)
            assert Fraction(int(c.numerator), int(c.denominator)) * mult == corr(g, tuple(sorted(ps))), (g, ps)
            seen.add((g, tuple(sorted(ps))))
    # and nothing the recursion predicts inside the window is missing
    for g in range(4):
        for pos in itertools.chain([()], ((p,) for p in range(1, 5)),
                                   itertools.combinations_with_replacement(range(1, 5), 2)):
            for n0 in range(9):
                ps = tuple(sorted((0,) * n0 + pos))
                if ps and corr(g, ps):
                    assert (g, ps) in seen, (g, ps)


def test_kdv_values(kdv):
    inv = taugen.extract_invariant
    assert inv(kdv, 0, [(1, 0)] * 3) == 1
    assert inv(kdv, 0, [(1, 0), (1, 0), (1, 1)]) == 0
    assert inv(kdv, 0, [(1, 0)] * 3 + [(1, 1)]) == 1
    assert inv(kdv, 1, [(1, 1)]) == Q(1, 24)
    assert inv(kdv, 2, [(1, 4)]) == Q(1, 1152)
    assert inv(kdv, 2, [(1, 2), (1, 3)]) == Q(29, 5760)


def test_out_of_truncation(kdv):
    with pytest.raises(taugen.OutOfTruncation):
        taugen.extract_invariant(kdv, 0, [(1, 5)])
    with pytest.raises(taugen.OutOfTruncation):
        taugen.extract_invariant(kdv, 2, [(1, 1)] * 3)
    with pytest.raises(taugen.OutOfTruncation):
        taugen.assemble("a1", 2, 3)


@pytest.mark.parametrize("model, pmax", [("a1", 4), ("b3", 2), ("g2", 3), ("d4", 1)])
def test_dimension_constraint(model, pmax):
    """sum (p_i + 1 - d_{a_i}) = (c_W - 3)(1 - g) + n for every nonzero correlator."""
    fd = frobenius_data(model)
    exp = taugen.assemble(model, pmax, 2)
    for g, F in exp.strata.items():
        for mono in (m for m, _ in F.items()):
            n = sum(mono.values())
            lhs = sum((p + 1 - fd.degrees[a]) * e for (_, a, p), e in mono.items())
            assert lhs == (fd.charge - 3) * (1 - g) + n


def test_top_genus(kdv):
    assert kdv.max_genus() == 3
    assert not kdv.genus(4)


@pytest.mark.parametrize("model, pmax", [("a1", 4), ("b3", 2), ("g2", 3), ("d4", 1)])
def test_higher_genus_vanishes_on_small_phase_space(model, pmax):
    exp = taugen.assemble(model, pmax, 2)
    for g, F in exp.strata.items():
        small = F.filter_terms(lambda mono: all(tok[2] == 0 for tok in mono))
        if g >= 1:
            assert not small
        else:
            fd = frobenius_data(model)
            assert small == fd.F.subs({("v", a): Poly.var(("t", a, 0)) for a in fd.coords})
