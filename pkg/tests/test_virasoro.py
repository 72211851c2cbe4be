from hypothesis import given, settings, strategies as st

import pytest

from dsfjrw import taugen
from dsfjrw.corering import Poly, Q
from dsfjrw.frobenius import frobenius_data
from dsfjrw.virasoro import act, apply, build_virasoro, commutator_defect


@st.composite
def time_polys(draw, coords):
    f = Poly()
    for _ in range(draw(st.integers(1, 4))):
        mono = {}
        for _ in range(draw(st.integers(0, 3))):
            tok = ("t", draw(st.sampled_from(coords)), draw(st.integers(0, 3)))
            mono[tok] = mono.get(tok, 0) + 1
        if draw(st.booleans()):
            mono["hbar"] = draw(st.sampled_from((-1, 1)))
        f = f + Poly.monomial(mono.items(), Q(draw(st.integers(-4, 4)), draw(st.integers(1, 3))))
    return f


PAIRS = [(i, j) for i in (-1, 0, 1, 2) for j in (-1, 0, 1, 2) if i < j and i + j <= 2]


@pytest.mark.parametrize("model", ["a1", "d4", "b3", "g2"])
@pytest.mark.parametrize("i, j", PAIRS)
@given(data=st.data())
@settings(max_examples=15, deadline=None)
def test_commutators(model, i, j, data):
    fd = frobenius_data(model)
    f = data.draw(time_polys(fd.coords))
    assert not commutator_defect(i, j, fd, f)


def test_folded_constant_breaks_algebra():
    fd = frobenius_data("b3")
    f = Poly.var(("t", 1, 0))
    Lm, L0, L1 = (build_virasoro(fd, k, folded=True) for k in (-1, 0, 1))
    defect = act(Lm, act(L1, f)) - act(L1, act(Lm, f)) - act(L0, f).scale(-2)
    assert defect == f.scale(Q(1, 8))


@pytest.mark.parametrize("model, pmax", [("a1", 3), ("b3", 2), ("g2", 3)])
def test_string_equation(model, pmax):
    r = apply(build_virasoro(model, -1), taugen.assemble(model, pmax, 2))
    assert r.passed, r.verified.to_text()[:300]


@pytest.mark.parametrize("m", [0, 1, 2])
def test_higher_constraints_a1(m):
    r = apply(build_virasoro("a1", m), taugen.assemble("a1", 3, 2))
    assert r.passed, r.verified.to_text()[:300]


@pytest.mark.parametrize("model", ["b3", "g2"])
def test_folded_dilaton(model):
    r = apply(build_virasoro(model, 0, folded=True), taugen.assemble(model, 2, 2))
    assert r.passed


def _perturbed(exp, tok, genus, delta):
    hF = exp.hF + Poly.monomial([(tok, 1), ("hbar", genus)], delta)
    return taugen.FreeEnergyExpansion(exp.model, exp.pmax, exp.K, hF, taugen.genus_strata(hF))


def test_mutation_is_caught():
    exp = taugen.assemble("a1", 3, 2)
    bad = _perturbed(exp, ("t", 1, 1), 1, Q(1, 100))
    assert not apply(build_virasoro("a1", 0), bad).passed
    bad = _perturbed(exp, ("t", 1, 2), 1, Q(1, 100))
    assert not apply(build_virasoro("a1", -1), bad).passed
