import pytest
from hypothesis import given, settings, strategies as st

from dsfjrw.corering import DiffPoly, NotExact, Poly, Q, fmt_q, parse_q

jets = st.tuples(st.integers(1, 3), st.integers(0, 3))


@st.composite
def diffpolys(draw, max_terms=4):
    f = DiffPoly()
    for _ in range(draw(st.integers(0, max_terms))):
        term = DiffPoly.const(Q(draw(st.integers(-6, 6)), draw(st.integers(1, 5))))
        for a, k in draw(st.lists(jets, max_size=3)):
            term = term * DiffPoly.w(a, k)
        if draw(st.booleans()):
            term = term * DiffPoly.eps(draw(st.integers(1, 2)))
        f = f + term
    return f


@given(diffpolys(), diffpolys(), diffpolys())
def test_ring_axioms(f, g, h):
    assert (f + g) + h == f + (g + h)
    assert f * g == g * f
    assert (f * g) * h == f * (g * h)
    assert f * (g + h) == f * g + f * h
    assert f - f == DiffPoly()
    assert not (f - f)


@given(diffpolys(), diffpolys())
def test_dx_leibniz(f, g):
    assert (f * g).dx() == f.dx() * g + f * g.dx()


@given(diffpolys(3))
def test_integrate_x_inverts_dx(f):
    df = f.dx()
    assert df.integrate_x().dx() == df


@given(diffpolys())
@settings(max_examples=50)
def test_text_roundtrip(f):
    assert DiffPoly.parse(f.to_text()) == f if f else True


@given(st.integers(-50, 50), st.integers(1, 50))
def test_rational_text_roundtrip(n, d):
    assert parse_q(fmt_q(Q(n, d))) == Q(n, d)


def test_exact_arithmetic():
    assert Q(1, 3) * 3 == 1
    assert Q(1, 1632960) + Q(1, 1632960) == Q(1, 816480)


def test_not_exact():
    with pytest.raises(NotExact):
        (DiffPoly.w(1) * DiffPoly.w(1)).integrate_x()


def test_poly_diff_and_subs():
    x, y = Poly.var("x"), Poly.var("y")
    f = x ** 3 * y + x * y
    assert f.diff("x") == (x ** 2 * y).scale(3) + y
    assert f.subs({"y": Poly.const(2)}) == (x ** 3 + x).scale(2)


def test_jet_truncation():
    f = DiffPoly.w(1) + DiffPoly.w(1, 2) * DiffPoly.w(2, 3)
    assert f.truncate_jet(4) == DiffPoly.w(1)
    assert f.max_jet_degree() == 5
