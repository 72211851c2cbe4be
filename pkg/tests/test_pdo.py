from hypothesis import given, settings, strategies as st

from dsfjrw.corering import DiffPoly, Q
from dsfjrw.pdo import PDOperator, adjoint, commutator, compose, neg_part, pos_part, power, res, root

coef = st.builds(lambda n, a, k: DiffPoly.const(Q(n)) + DiffPoly.w(a, k).scale(Q(n + 1, 2)),
                 st.integers(-3, 3), st.integers(1, 2), st.integers(0, 2))


@st.composite
def operators(draw, top=2, floor=-3):
    terms = {m: draw(coef) for m in range(floor, top)}
    terms[top] = DiffPoly.const(1)
    return PDOperator(terms)


FLOOR = -6


@given(operators(), operators(), operators())
@settings(max_examples=25, deadline=None)
def test_compose_associative(A, B, C):
    lhs = compose(compose(A, B, FLOOR), C, FLOOR)
    rhs = compose(A, compose(B, C, FLOOR), FLOOR)
    assert lhs.agrees_with(rhs, FLOOR)


@given(operators(), operators())
@settings(max_examples=25, deadline=None)
def test_adjoint_is_antihomomorphism(A, B):
    lhs = adjoint(compose(A, B, FLOOR), FLOOR)
    rhs = compose(adjoint(B, FLOOR), adjoint(A, FLOOR), FLOOR)
    assert lhs.agrees_with(rhs, FLOOR)
    assert adjoint(adjoint(A, FLOOR), FLOOR).agrees_with(A, FLOOR)


def test_root_power():
    L = PDOperator({2: DiffPoly.const(1), 0: DiffPoly.w(1)})
    P = root(L, 2, -8)
    assert P.coeff(1) == DiffPoly.const(1)
    assert P.coeff(0) == DiffPoly()
    assert P.coeff(-1) == DiffPoly.w(1).scale(Q(1, 2))
    assert power(P, 2, -6).agrees_with(L, -6)


def test_d_commutes_past_functions():
    d = PDOperator.d(1)
    f = PDOperator.mult(DiffPoly.w(1))
    comm = commutator(d, f)
    assert comm == PDOperator.mult(DiffPoly.w(1, 1))


def test_parts_and_residue():
    A = PDOperator({1: DiffPoly.const(1), 0: DiffPoly.w(1), -1: DiffPoly.w(2)})
    assert (pos_part(A) + neg_part(A)) == A
    assert res(A) == DiffPoly.w(2)
