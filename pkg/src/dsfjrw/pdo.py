"""Pseudo-differential operators over a differential ring.

An operator is a finite map ``power -> coefficient`` read in normal order
``sum a_m d^m`` (coefficients on the left).  The coefficient ring only needs
``+``, ``*``, ``scale`` and a derivation ``dx``; both :class:`DiffPoly` and the
small-phase-space ring of :mod:`dsfjrw.taugen` qualify.

First-type operators carry a ``floor``: every power >= floor is exact.
Second-type operators (infinitely many positive powers, finitely many negative
powers per jet degree) carry a ``ceil`` and a ``jet_cap`` instead.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Callable

from .corering import DiffPoly, Q, poly_sum

__all__ = [
    "PDOperator",
    "NotMonic",
    "NotDivisible",
    "Inconsistent",
    "binom",
    "compose",
    "commutator",
    "pos_part",
    "neg_part",
    "res",
    "power",
    "root",
    "GradedSymbol",
    "adjoint",
    "res_potential",
    "sqrt_second_type",
    "power_second_type",
]


class NotMonic(ValueError):
    pass


class NotDivisible(ValueError):
    pass


class Inconsistent(ValueError):
    pass


@lru_cache(maxsize=None)
def binom(m: int, j: int) -> int:
    """Generalized binomial coefficient C(m, j) for integer m and j >= 0."""
    if j < 0:
        return 0
    num = 1
    den = 1
    for i in range(j):
        num *= m - i
        den *= i + 1
    return num // den


class PDOperator:
    __slots__ = ("terms", "ring", "floor", "ceil", "jet_cap")

    def __init__(self, terms, ring=DiffPoly, floor=None, ceil=None, jet_cap=None):
        self.terms = {m: c for m, c in terms.items() if c}
        self.ring = ring
        self.floor = floor
        self.ceil = ceil
        self.jet_cap = jet_cap

    # -- construction ------------------------------------------------------
    @classmethod
    def d(cls, m: int = 1, ring=DiffPoly):
        return cls({m: ring.const(1)}, ring)

    @classmethod
    def mult(cls, f, ring=None):
        ring = ring or f.__class__
        return cls({0: f}, ring)

    def _like(self, terms, floor=None, ceil=None, jet_cap=None):
        return PDOperator(terms, self.ring, floor, ceil, jet_cap)

    # -- inspection --------------------------------------------------------
    def coeff(self, m: int):
        c = self.terms.get(m)
        return c if c is not None else self.ring()

    def top(self) -> int:
        return max(self.terms) if self.terms else -(10**9)

    def bottom(self) -> int:
        return min(self.terms) if self.terms else 10**9

    def order(self) -> int:
        return self.top()

    def is_exact_at(self, m: int) -> bool:
        return (self.floor is None or m >= self.floor) and (self.ceil is None or m <= self.ceil)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PDOperator):
            return NotImplemented
        return self.terms == other.terms

    def agrees_with(self, other: "PDOperator", floor: int | None = None) -> bool:
        """Equality of all terms with power >= floor (default: both floors)."""
        f = max(x for x in (floor, self.floor, other.floor, -(10**9)) if x is not None)
        keys = {m for m in (*self.terms, *other.terms) if m >= f}
        return all(self.coeff(m) == other.coeff(m) for m in keys)

    def __repr__(self) -> str:
        return "PDOperator(" + self.to_text() + ")"

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, reverse=True):
            parts.append(f"({self.terms[m]}) d^{m}")
        tail = f"  [floor {self.floor}]" if self.floor is not None else ""
        return " + ".join(parts) + tail

    def to_json(self) -> dict:
        return {"floor": self.floor, "terms": {str(m): self.terms[m].to_json() for m in sorted(self.terms)}}

    # -- linear structure --------------------------------------------------
    def __add__(self, other: "PDOperator") -> "PDOperator":
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms[m] + c if m in terms else c
        return self._like(terms, _max_opt(self.floor, other.floor), _min_opt(self.ceil, other.ceil),
                          _min_opt(self.jet_cap, other.jet_cap))

    def __neg__(self) -> "PDOperator":
        return self._like({m: -c for m, c in self.terms.items()}, self.floor, self.ceil, self.jet_cap)

    def __sub__(self, other: "PDOperator") -> "PDOperator":
        return self + (-other)

    def scale(self, c) -> "PDOperator":
        return self._like({m: a.scale(c) for m, a in self.terms.items()}, self.floor, self.ceil, self.jet_cap)

    def map_coefficients(self, f: Callable, ring=None) -> "PDOperator":
        return PDOperator({m: f(a) for m, a in self.terms.items()}, ring or self.ring,
                          self.floor, self.ceil, self.jet_cap)

    def truncate(self, floor=None, ceil=None) -> "PDOperator":
        terms = {m: c for m, c in self.terms.items()
                 if (floor is None or m >= floor) and (ceil is None or m <= ceil)}
        return self._like(terms, _max_opt(self.floor, floor), _min_opt(self.ceil, ceil), self.jet_cap)

    def __matmul__(self, other: "PDOperator") -> "PDOperator":
        return compose(self, other)


def _max_opt(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return max(a, b)


def _min_opt(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _jet_truncate(c, cap):
    if cap is None:
        return c
    return c.truncate_jet(cap)


def compose(A: PDOperator, B: PDOperator, floor: int | None = None, ceil: int | None = None,
            jet_cap: int | None = None) -> PDOperator:
    """A o B via d^m o f = sum_j C(m,j) f^(j) d^(m-j).

    The result floor is raised to the exactness bound implied by the operand
    floors, so a result never claims terms it cannot know.
    """
    if not A.terms or not B.terms:
        return A._like({}, floor)
    tA, tB = A.top(), B.top()
    bound = None
    if A.floor is not None:
        bound = A.floor + tB
    if B.floor is not None:
        bound = _max_opt(bound, B.floor + tA)
    f = _max_opt(floor, bound)
    cap = _min_opt(jet_cap, _min_opt(A.jet_cap, B.jet_cap))
    c_eff = _min_opt(ceil, None)
    if A.ceil is not None or B.ceil is not None:
        c_eff = _min_opt(c_eff, _min_opt(A.ceil, B.ceil) + 0)
    # with second-type operands the caller states the ceiling explicitly
    if f is None and (A.bottom() < 0 and B.bottom() < 0) and cap is None:
        raise ValueError("compose of two non-differential operators needs a floor or jet cap")
    if cap is not None:
        mdA = {m: a.min_jet_degree() for m, a in A.terms.items()}
        mdB = {n: b.min_jet_degree() for n, b in B.terms.items()}
    acc: dict[int, list] = {}
    dcache: dict[int, list] = {}

    def deriv(n, j):
        lst = dcache.get(n)
        if lst is None:
            lst = [B.terms[n]]
            dcache[n] = lst
        while len(lst) <= j:
            lst.append(_jet_truncate(lst[-1].dx(), cap))
        return lst[j]

    for m, a in A.terms.items():
        for n, b in B.terms.items():
            j = 0
            while True:
                p = m + n - j
                if f is not None and p < f:
                    break
                if m >= 0 and j > m:
                    break
                if cap is not None and mdA[m] + mdB[n] + j > cap:
                    break
                if c_eff is None or p <= c_eff:
                    db = deriv(n, j)
                    if db:
                        c = binom(m, j)
                        term = a * db
                        if c != 1:
                            term = term.scale(c)
                        if cap is not None:
                            term = term.truncate_jet(cap)
                        acc.setdefault(p, []).append(term)
                j += 1
                if f is None and cap is None and m < 0:
                    raise ValueError("unbounded expansion: supply a floor")
    terms = {}
    for p, lst in acc.items():
        s = lst[0] if len(lst) == 1 else poly_sum(lst, A.ring)
        if s:
            terms[p] = s
    return PDOperator(terms, A.ring, f, c_eff, cap)


def commutator(A: PDOperator, B: PDOperator, floor: int | None = None) -> PDOperator:
    return compose(A, B, floor) - compose(B, A, floor)


def pos_part(A: PDOperator) -> PDOperator:
    if A.floor is not None and A.floor > 0:
        raise ValueError("positive part requested below the exactness floor")
    return A._like({m: c for m, c in A.terms.items() if m >= 0})


def neg_part(A: PDOperator) -> PDOperator:
    return A._like({m: c for m, c in A.terms.items() if m < 0}, A.floor, A.ceil, A.jet_cap)


def res(A: PDOperator):
    if not A.is_exact_at(-1):
        raise ValueError("residue requested outside the exact range")
    return A.coeff(-1)


def power(A: PDOperator, k: int, floor: int | None = None) -> PDOperator:
    """A^k by binary splitting, exact above ``floor``."""
    if k < 1:
        raise ValueError("k >= 1 required")
    if k == 1:
        return A if floor is None else A.truncate(floor)
    t = A.top()
    h = k // 2
    sub_floor = None if floor is None else floor - t * (k - h)
    X = power(A, h, sub_floor)
    if k - h == h:
        Y = X
    else:
        Y = power(A, k - h, None if floor is None else floor - t * h)
    return compose(X, Y, floor)


def root(L: PDOperator, h: int, floor: int, return_powers: bool = False):
    """The h-th root P = d^d + p_1 d^{d-1} + ... of a monic L, exact above ``floor``.

    Coefficients are found top-down from [P^h]_{N-a} = h p_a + (known); the
    known parts of all intermediate powers P^i = P o P^{i-1} are kept as well.
    """
    N = L.top()
    if L.coeff(N) != 1:
        raise NotMonic("leading coefficient must be 1")
    if N % h:
        raise NotDivisible("order not divisible by h")
    d = N // h
    ring = L.ring
    amax = d - floor
    if L.floor is not None and N - amax < L.floor:
        raise ValueError("L is not known to sufficient depth for this root")
    one = ring.const(1)
    # pw[i][power] for i = 1..h
    pw: list[dict[int, object]] = [dict() for _ in range(h + 1)]
    for i in range(1, h + 1):
        pw[i][i * d] = one
    dc: dict[tuple[int, int], list] = {}

    def deriv(i, pwr, j):
        key = (i, pwr)
        lst = dc.get(key)
        if lst is None:
            lst = [pw[i][pwr]]
            dc[key] = lst
        while len(lst) <= j:
            lst.append(lst[-1].dx())
        return lst[j]

    zero = ring()
    for a in range(1, amax + 1):
        K = [None] * (h + 1)
        for i in range(2, h + 1):
            pieces = []
            target = i * d - a
            for a1 in range(0, a):
                pa = pw[1].get(d - a1)
                if pa is None:
                    continue
                mpow = d - a1
                for b in range(0, a - a1 + 1):
                    j = a - a1 - b
                    src = (i - 1) * d - b
                    if src not in pw[i - 1]:
                        continue
                    c = binom(mpow, j)
                    if not c:
                        continue
                    db = deriv(i - 1, src, j) if j else pw[i - 1][src]
                    if not db:
                        continue
                    t = pa * db if a1 else db
                    if c != 1:
                        t = t.scale(c)
                    pieces.append(t)
            K[i] = poly_sum(pieces, ring) if pieces else zero
        # [P^i]_{id-a} = K_2 + ... + K_i + i p_a
        acc = [zero] * (h + 1)
        for i in range(2, h + 1):
            acc[i] = acc[i - 1] + K[i] if i > 2 else K[i]
        pa = (L.coeff(N - a) - acc[h]).scale(Q(1, h))
        if pa:
            pw[1][d - a] = pa
        for i in range(2, h + 1):
            v = acc[i] + pa.scale(i) if pa else acc[i]
            if v:
                pw[i][i * d - a] = v
            elif i * d - a in pw[i]:
                del pw[i][i * d - a]
            dc.pop((i, i * d - a), None)
    P = PDOperator(dict(pw[1]), ring, floor)
    if not return_powers:
        return P
    powers = {i: PDOperator(dict(pw[i]), ring, i * d - amax) for i in range(1, h + 1)}
    return P, powers


def adjoint(A: PDOperator, floor: int | None = None) -> PDOperator:
    """Formal adjoint sum (-d)^m o a_m."""
    f = A.floor if floor is None else floor
    pieces: dict[int, list] = {}
    for m, a in A.terms.items():
        sign = -1 if m % 2 else 1
        op = compose(PDOperator.d(m, A.ring), PDOperator({0: a}, A.ring), f)
        for p, c in op.terms.items():
            pieces.setdefault(p, []).append(c.scale(sign))
    terms = {p: poly_sum(lst, A.ring) for p, lst in pieces.items()}
    return PDOperator(terms, A.ring, f)


def res_potential(B: PDOperator, Y: PDOperator):
    """omega with res[B, Y] = d_x omega, for B a differential operator.

    Only the negative part of Y contributes:
    res[a d^m, b d^n] = C(m,s) d_x sum_{k<s} (-1)^k a^(k) b^(s-1-k), s = m+n+1 >= 1.
    """
    ring = B.ring
    pieces = []
    dA: dict[int, list] = {}
    dB: dict[int, list] = {}

    def der(cache, ops, m, k):
        lst = cache.get(m)
        if lst is None:
            lst = [ops[m]]
            cache[m] = lst
        while len(lst) <= k:
            lst.append(lst[-1].dx())
        return lst[k]

    for m, a in B.terms.items():
        if m < 0:
            raise ValueError("res_potential needs a differential operator as first argument")
        for n in range(-m, 0):
            if n not in Y.terms:
                continue
            if not Y.is_exact_at(n):
                raise ValueError(f"coefficient d^{n} of the second operator is not exact")
            s = m + n + 1
            c = binom(m, s)
            for k in range(s):
                t = der(dA, B.terms, m, k) * der(dB, Y.terms, n, s - 1 - k)
                if t:
                    pieces.append(t.scale(c if k % 2 == 0 else -c))
    return poly_sum(pieces, ring) if pieces else ring()


# ---------------------------------------------------------------------------
# operators of the second type


def _series_mul(a: dict, b: dict, ceil: int, ring) -> dict:
    """Commutative product of Laurent series in p truncated above ``ceil``."""
    acc: dict[int, list] = {}
    for m, x in a.items():
        for n, y in b.items():
            if m + n <= ceil:
                acc.setdefault(m + n, []).append(x * y)
    out = {}
    for p, lst in acc.items():
        s = poly_sum(lst, ring)
        if s:
            out[p] = s
    return out


def _star_j(a: dict, b: dict, j: int, ceil: int, ring) -> dict:
    """The j-th term of the symbol product: sum C(m,j) a_m d_x^j(b_n) p^{m+n-j}."""
    acc: dict[int, list] = {}
    db = {n: y.dx_n(j) if j else y for n, y in b.items()}
    for m, x in a.items():
        c = binom(m, j)
        if not c:
            continue
        for n, y in db.items():
            p = m + n - j
            if p <= ceil and y:
                t = x * y
                acc.setdefault(p, []).append(t.scale(c) if c != 1 else t)
    out = {}
    for p, lst in acc.items():
        s = poly_sum(lst, ring)
        if s:
            out[p] = s
    return out


def _add_into(target: dict, src: dict, sign=1):
    for p, c in src.items():
        c = c if sign == 1 else -c
        if p in target:
            v = target[p] + c
            if v:
                target[p] = v
            else:
                del target[p]
        else:
            target[p] = c


def _split_jet(op_terms: dict, cap: int) -> list[dict]:
    parts = [dict() for _ in range(cap + 1)]
    for m, c in op_terms.items():
        for d, part in c.jet_degree_parts().items():
            if d <= cap:
                parts[d][m] = part
    return parts


def _binomial_series(X: dict, alpha, ceil: int, ring) -> dict:
    """(1 + X)^alpha for a series X with only positive powers, truncated above ceil."""
    result = {0: ring.const(1)}
    term = {0: ring.const(1)}
    k = 0
    coef = Q(1)
    while True:
        k += 1
        term = _series_mul(term, X, ceil, ring)
        if not term:
            break
        coef = coef * (Q(alpha) - (k - 1)) / k
        _add_into(result, {p: c.scale(coef) for p, c in term.items()})
    return result


class GradedSymbol:
    """A second-type operator stored by jet degree: parts[d] = {power: coefficient}.

    Only terms with jet degree <= jet_cap and (power + jet degree) <= diag are
    kept; both cuts are closed under composition of operators whose terms
    satisfy power + jet degree >= -(a fixed bound), so kept terms are exact.
    """

    __slots__ = ("parts", "jet_cap", "diag", "ring")

    def __init__(self, parts, jet_cap: int, diag: int, ring=DiffPoly):
        self.parts = [{m: c for m, c in p.items() if c and m + d <= diag} for d, p in enumerate(parts)]
        self.jet_cap = jet_cap
        self.diag = diag
        self.ring = ring

    def to_operator(self) -> PDOperator:
        terms: dict[int, object] = {}
        for part in self.parts:
            _add_into(terms, part)
        return PDOperator(terms, self.ring, None, None, self.jet_cap)

    def cut(self, diag: int) -> "GradedSymbol":
        return GradedSymbol(self.parts, self.jet_cap, min(diag, self.diag), self.ring)

    def product(self, other: "GradedSymbol", diag: int) -> "GradedSymbol":
        J = self.jet_cap
        out = [dict() for _ in range(J + 1)]
        for d1, a in enumerate(self.parts):
            for d2, b in enumerate(other.parts):
                for j in range(0, J - d1 - d2 + 1):
                    d = d1 + d2 + j
                    _add_into(out[d], _star_j(a, b, j, diag - d, self.ring))
        return GradedSymbol(out, J, diag, self.ring)


def sqrt_second_type(L: PDOperator, rho, jet_cap: int, diag: int) -> GradedSymbol:
    """Square root Q = d^{-1} rho + sum_{i>=0} Q_i d^i of the second type.

    L must end in ... + d^{-1} rho d^{-1} rho and be exact down to power
    -2-jet_cap; rho must be invertible in the coefficient ring (Laurent in the
    tail field).  The symbol is solved order by order in the jet degree d:
    2 Q^(0) Q^(d) = L^(d) - (lower products), Q^(0) = (rho/p) (1+X)^{1/2}.
    Terms with jet degree <= jet_cap and power + jet degree <= diag are exact.
    """
    ring = L.ring
    need = -2 - jet_cap
    if L.floor is not None and L.floor > need:
        raise ValueError("L must be expanded to power -2 - jet_cap")
    Lp = _split_jet(L.terms, jet_cap)
    L0 = Lp[0]
    rho2 = rho * rho
    if L0.get(-2) != rho2:
        raise Inconsistent("the jet-free tail of L is not rho^2 d^-2")
    inv_rho = rho ** -1
    inv_rho2 = inv_rho * inv_rho
    # X = (L0 - rho^2 p^-2) p^2 / rho^2 has only positive powers
    X = {}
    for m, c in L0.items():
        if m == -2:
            continue
        if m < -2:
            raise Inconsistent("unexpected jet-free term below d^-2")
        X[m + 2] = c * inv_rho2
    # Q^(d) at p^n needs R at p^(n-1) and 1/(2 Q0) up to p^(n+2+d)
    sq = _binomial_series(X, Q(1, 2), diag + 1, ring)
    Q0 = {p - 1: c * rho for p, c in sq.items() if p - 1 <= diag}
    isq = _binomial_series(X, Q(-1, 2), diag + 1, ring)
    half_inv = inv_rho.scale(Q(1, 2))
    inv2Q0 = {p + 1: c * half_inv for p, c in isq.items() if p + 1 <= diag + 2}
    parts = [Q0]
    for d in range(1, jet_cap + 1):
        top = diag - d
        R = {m: c for m, c in Lp[d].items() if m <= top - 1}
        for d1 in range(0, d + 1):
            for d2 in range(0, d + 1 - d1):
                j = d - d1 - d2
                if j == 0 and (d1 == d or d2 == d):
                    continue
                _add_into(R, _star_j(parts[d1], parts[d2], j, top - 1, ring), -1)
        Qd = _series_mul(R, inv2Q0, top, ring)
        Qd = {p: c.truncate_jet(d) for p, c in Qd.items()}
        parts.append({p: c for p, c in Qd.items() if c})
    return GradedSymbol(parts, jet_cap, diag, ring)


def power_second_type(Qs: GradedSymbol, k: int, diag: int) -> GradedSymbol:
    """Q^k with terms of power + jet degree <= diag exact.

    Every term of Q^i has power + jet degree >= -i, so Q must be known up to
    diag + k - 1 and Q^i up to diag + k - i.
    """
    if Qs.diag < diag + k - 1:
        raise ValueError("the root is not known to a sufficient diagonal")
    result = Qs.cut(diag + k - 1)
    for i in range(2, k + 1):
        result = result.product(Qs, diag + k - i)
    return result
