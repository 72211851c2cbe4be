import pytest

from dsfjrw import golden, lax
from dsfjrw.corering import DiffPoly, Q


@pytest.fixture(scope="module")
def d4_q1():
    # beta = 4 with q >= 1 is slow in the full ring, so only its q = 0 flows
    table = lax.flows("d4", 1, betas=(1, 2, 3))
    table.update({(a, 4, 0): f for a, f in lax.flow("d4", 4, 0).items()})
    return table


def test_d4_flow_tables():
    for tab in golden.load("d4_flows")["tables"].values():
        got = lax.flow("d4", tab["beta"], tab["q"])[tab["alpha"]]
        bad = [c.line() for c in golden.compare_table(tab, got, complete=True) if not c.ok]
        assert not bad, bad


def test_kdv_flow():
    w = DiffPoly.w
    assert lax.flow("a1", 1, 0)[1] == w(1, 1)
    assert lax.flow("a1", 1, 1)[1] == w(1) * w(1, 1) + (DiffPoly.parse("hbar w1_3")).scale(Q(1, 12))


def test_first_flow_is_translation(d4_q1):
    for a in (1, 2, 3, 4):
        assert d4_q1[(a, 1, 0)] == DiffPoly.w(a, 1)


def test_sigma1_equivariance(d4_q1):
    sub = lax.sigma_substitution("sigma1")
    sign = {1: 1, 2: 1, 3: 1, 4: -1}
    for (a, b, q), f in d4_q1.items():
        assert lax.substitute_jets(f, sub) == f.scale(sign[a] * sign[b]), (a, b, q)


def test_only_even_hbar_powers(d4_q1):
    for f in d4_q1.values():
        assert all(p % 2 == 0 for p in f.eps_powers())


def test_gamma_reduction_low_order(d4_q1):
    b3 = lax.flows("b3", 1)
    assert lax.restrict_model({k: v for k, v in d4_q1.items() if k[1] != 4}, {4}) == b3
    d4 = {k: v for k, v in d4_q1.items() if k[1] in (1, 3)}
    assert lax.restrict_model(d4, {2, 4}, keep_betas=(1, 3)) == lax.flows("g2", 1)


def test_restriction_rejects_non_invariant(d4_q1):
    with pytest.raises(lax.NonInvariantFlow):
        lax.restrict_model(d4_q1, {3})


def test_unknown_model():
    with pytest.raises(lax.BadModel):
        lax.get_model("e8")
