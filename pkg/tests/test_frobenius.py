import pytest

from dsfjrw import golden
from dsfjrw.corering import Q
from dsfjrw.frobenius import euler_data, frobenius_data, wdvv_defect


@pytest.mark.parametrize("model", ["d4", "b3", "g2", "a1", "dn:4", "dn:5"])
def test_wdvv(model):
    fd = frobenius_data(model)
    assert wdvv_defect(fd.c, fd.eta, fd.coords) == []


@pytest.mark.parametrize("model", ["d4", "b3", "g2"])
def test_potentials_match_tables(model):
    tab = golden.load("potentials")["tables"][model]
    checks = golden.compare_table(tab, frobenius_data(model).F, complete=True)
    assert all(c.ok for c in checks), [c.line() for c in checks if not c.ok]


@pytest.mark.parametrize("model", ["d4", "b3", "g2", "dn:4"])
def test_third_derivatives_are_structure_constants(model):
    fd = frobenius_data(model)
    for a in fd.coords:
        for b in fd.coords:
            for g in fd.coords:
                d3 = fd.F.diff(("v", a)).diff(("v", b)).diff(("v", g))
                assert d3 == fd.c.get(tuple(sorted((a, b, g))), d3 - d3)


@pytest.mark.parametrize("model", ["d4", "dn:4"])
def test_unit_gives_constant_metric(model):
    fd = frobenius_data(model)
    for (a, b), val in fd.eta.items():
        assert fd.F.diff(("v", fd.coords[0])).diff(("v", a)).diff(("v", b)).constant_term() == val


@pytest.mark.parametrize("model", ["d4", "b3", "g2", "a1"])
def test_quasi_homogeneity(model):
    fd = frobenius_data(model)
    for mono, _ in fd.F.items():
        deg = sum(fd.degrees[tok[1]] * e for tok, e in mono.items())
        assert deg == 3 - fd.charge


def test_charges():
    assert euler_data("d4")[2] == Q(2, 3)
    assert euler_data("a1")[2] == 0
    assert frobenius_data("d4").spectrum == {1: Q(-1, 3), 2: 0, 3: Q(1, 3), 4: 0}


def test_fjrw_sign_flips_even_powers_of_v4():
    plain, flipped = frobenius_data("d4"), frobenius_data("d4", fjrw_sign=True)
    for mono, c in plain.F.items():
        e = mono.get(("v", 4), 0)
        assert flipped.F.coefficient(mono) == c * (-1) ** (e // 2)
