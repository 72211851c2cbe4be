"""Tau-function expansion along the topological solution.

On the small phase space the topological solution has w^alpha = t^{alpha,0},
w^1_x = 1 and all other jets zero (in the hbar-rescaled variables).  Before
rescaling this is the map

    w^alpha -> T_alpha,   w^1_x -> e,   other jets -> 0,

with e = (hbar/2)^{1/2}.  The map is a differential homomorphism onto
Q[T, e] with derivation D = e d/dT_1, so operator calculus commutes with it:
two-point functions are computed directly in that small ring (``SmallPoly``)
from residue potentials, never expanding full differential polynomials.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Iterable, Mapping

from .corering import (DiffPoly, Poly, Q, Rational, _decode, _encode, _slot, _unit, _SLOT, EPS, S2,
                       poly_sum, substitute_hbar)
from .lax import (Hierarchy, ModelSpec, build_lax, density_factor, get_model, time_factor,
                  two_point as lax_two_point, prolong, flow as lax_flow)
from .pdo import PDOperator, res

__all__ = [
    "OutOfTruncation",
    "SmallPoly",
    "small_restrict",
    "restrict_small",
    "t_var",
    "HBAR",
    "small_hierarchy",
    "two_point_small",
    "multi_point",
    "FreeEnergyExpansion",
    "assemble",
    "extract_invariant",
    "genus_strata",
]

HBAR = "hbar"
E = "e"


class OutOfTruncation(ValueError):
    pass


def t_var(alpha: int, p: int) -> Poly:
    return Poly.var(("t", alpha, p))


def _T(alpha: int) -> tuple:
    return ("T", alpha)


class SmallPoly(Poly):
    """Polynomials in T_alpha (values of w^alpha) and e (value of w^1_x).

    The jet degree of a monomial is its e-degree; d_x acts as e d/dT_1.
    """

    __slots__ = ()

    @classmethod
    def T(cls, alpha: int):
        return cls.var(_T(alpha))

    @classmethod
    def e(cls, power: int = 1):
        return cls.var(E, power)

    @classmethod
    def w(cls, alpha: int, k: int = 0, coef: object = 1):
        if k == 0:
            return cls.var(_T(alpha), 1, coef)
        if (alpha, k) == (1, 1):
            return cls.var(E, 1, coef)
        return cls()

    def _e_degree(self, key: int) -> int:
        s = _SLOT.get(E)
        if s is None:
            return 0
        for slot, ex in _decode(key):
            if slot == s:
                return ex
        return 0

    def jet_degree_parts(self) -> dict[int, "SmallPoly"]:
        parts: dict[int, dict] = {}
        for k, c in self._t.items():
            parts.setdefault(self._e_degree(k), {})[k] = c
        return {d: self._new(t) for d, t in parts.items()}

    def truncate_jet(self, cap: int) -> "SmallPoly":
        return self._new({k: c for k, c in self._t.items() if self._e_degree(k) <= cap})

    def min_jet_degree(self) -> int:
        return min((self._e_degree(k) for k in self._t), default=0)

    def max_jet_degree(self) -> int:
        return max((self._e_degree(k) for k in self._t), default=0)

    def dx(self) -> "SmallPoly":
        s1 = _slot(_T(1))
        u1 = _unit(_T(1))
        ue = _unit(E)
        r: dict[int, Rational] = {}
        for k, c in self._t.items():
            for slot, ex in _decode(k):
                if slot == s1:
                    nk = k - u1 + ue
                    v = r.get(nk)
                    r[nk] = c * ex if v is None else v + c * ex
                    break
        return self._new({k: c for k, c in r.items() if c})

    def dx_n(self, n: int) -> "SmallPoly":
        f = self
        for _ in range(n):
            f = f.dx()
        return f


def small_restrict(f: DiffPoly) -> SmallPoly:
    """Unrescaled restriction: w^a -> T_a, w^1_x -> e, other jets -> 0."""
    out: dict[int, Rational] = {}
    for mono, c in f.items():
        pairs = []
        ok = True
        for tok, ex in mono.items():
            if isinstance(tok, tuple) and tok[0] == "w":
                a, k = tok[1], tok[2]
                if k == 0:
                    pairs.append((_T(a), ex))
                elif (a, k) == (1, 1):
                    pairs.append((E, ex))
                else:
                    ok = False
                    break
            else:
                pairs.append((tok, ex))
        if ok:
            key = _encode(pairs)
            out[key] = out.get(key, 0) + c
    return SmallPoly({k: Q(c) for k, c in out.items() if c})


def _small_to_t(f: SmallPoly, e_shift: int = 0) -> Poly:
    """T_a -> t^{a,0}, e^{2g} -> (hbar/2)^g.  ``e_shift`` is added to every e-degree."""
    out: dict[int, Rational] = {}
    for mono, c in f.items():
        pairs = []
        ee = e_shift
        for tok, ex in mono.items():
            if tok == E:
                ee += ex
            elif isinstance(tok, tuple) and tok[0] == "T":
                pairs.append((("t", tok[1], 0), ex))
            else:
                raise ValueError(f"unexpected token {tok!r}")
        if ee % 2 or ee < 0:
            raise ValueError("odd or negative power of (hbar/2)^(1/2) on the small phase space")
        g = ee // 2
        pairs.append((HBAR, g))
        key = _encode(pairs)
        out[key] = out.get(key, 0) + c / Q(2) ** g
    return Poly({k: Q(c) for k, c in out.items() if c})


def restrict_small(f: DiffPoly) -> Poly:
    """Restriction of an hbar-rescaled differential polynomial to the small phase space.

    d_x^k w^a -> t^{a,0} (k = 0), 1 for (a,k) = (1,1), 0 otherwise; eps^2 -> hbar.
    """
    out: dict[int, Rational] = {}
    for mono, c in f.items():
        pairs = []
        ok = True
        for tok, ex in mono.items():
            if isinstance(tok, tuple) and tok[0] == "w":
                a, k = tok[1], tok[2]
                if k == 0:
                    pairs.append((("t", a, 0), ex))
                elif (a, k) != (1, 1):
                    ok = False
                    break
            elif tok == EPS:
                if ex % 2:
                    raise ValueError("odd eps power")
                pairs.append((HBAR, ex // 2))
            elif tok == S2:
                raise ValueError("residual s2 factor")
            else:
                raise ValueError(f"unexpected token {tok!r}")
        if ok:
            key = _encode(pairs)
            out[key] = out.get(key, 0) + c
    return Poly({k: Q(c) for k, c in out.items() if c})


# ---------------------------------------------------------------------------
# small-ring hierarchy

_SMALL_CACHE: dict[str, Hierarchy] = {}


def small_hierarchy(model: ModelSpec | str) -> Hierarchy:
    m = get_model(model) if isinstance(model, str) else model
    h = _SMALL_CACHE.get(m.name)
    if h is None:
        def builder(floor, m=m):
            L = build_lax(m, "w", floor, DiffPoly)
            return L.map_coefficients(small_restrict, SmallPoly)

        rho = SmallPoly.T(4).scale(Q(1, 2)) if (m.family == "d" and 4 in m.coords) else None
        h = Hierarchy(m, ring=SmallPoly, lax_builder=builder, rho=rho)
        _SMALL_CACHE[m.name] = h
    return h


def two_point_small(model, alpha: int, p: int, beta: int, q: int) -> Poly:
    """Omega_{alpha,p;beta,q}(t_0): the two-point function on the small phase space."""
    H = small_hierarchy(model)
    return _small_to_t(H.two_point(alpha, p, beta, q))


def multi_point(model, indices: Iterable[tuple[int, int]], seed: tuple[int, int] = (0, 1)) -> Poly:
    """Omega_{a1,p1;...;ak,pk}(t_0) through the full jet space.

    The two indices at positions ``seed`` give the two-point function, the
    others act by prolongation along the hbar-rescaled flows.
    """
    idx = list(indices)
    if len(idx) < 2:
        raise ValueError("at least two indices are required")
    i, j = seed
    (a1, p1), (a2, p2) = idx[i], idx[j]
    rest = [x for n, x in enumerate(idx) if n not in (i, j)]
    om = lax_two_point(model, a1, p1, a2, p2)
    for (g, k) in rest:
        om = prolong(om, lax_flow(model, g, k))
    return restrict_small(om)


# ---------------------------------------------------------------------------
# free energy


def _scale_t0(f: Poly, s_token=("s",)) -> Poly:
    """t^{a,0} -> s t^{a,0}."""
    out = {}
    for mono, c in f.items():
        deg = sum(ex for tok, ex in mono.items() if isinstance(tok, tuple) and tok[0] == "t" and tok[2] == 0)
        pairs = list(mono.items()) + [(s_token, deg)]
        key = _encode(pairs)
        out[key] = out.get(key, 0) + c
    return Poly({k: Q(c) for k, c in out.items() if c})


def _integrate_s(f: Poly, s_token=("s",)) -> Poly:
    """int_0^1 ds of a polynomial in s."""
    out = {}
    for mono, c in f.items():
        n = mono.pop(s_token, 0)
        key = _encode(mono.items())
        out[key] = out.get(key, 0) + c / (n + 1)
    return Poly({k: Q(c) for k, c in out.items() if c})


@dataclass
class FreeEnergyExpansion:
    """hbar F truncated to p <= pmax and at most K insertions with p >= 1."""

    model: str
    pmax: int
    K: int
    hF: Poly
    strata: dict[int, Poly] = field(default_factory=dict)

    def genus(self, g: int) -> Poly:
        return self.strata.get(g, Poly())

    def max_genus(self) -> int:
        return max((g for g, f in self.strata.items() if f), default=0)

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "pmax": self.pmax,
            "insertions": self.K,
            "genera": {str(g): f.to_json() for g, f in sorted(self.strata.items())},
        }


def genus_strata(hF: Poly) -> dict[int, Poly]:
    out: dict[int, dict] = {}
    for mono, c in hF.items():
        g = mono.pop(HBAR, 0)
        key = _encode(mono.items())
        out.setdefault(g, {})[key] = c
    return {g: Poly(t) for g, t in sorted(out.items())}


def assemble(model, pmax: int, K: int) -> FreeEnergyExpansion:
    """hbar F = A(t_0) + sum_{k=1}^{K} (1/k!) sum A_{a1,p1;...} t^{a1,p1}...t^{ak,pk}, 1 <= p_i <= pmax.

    A(t_0) = int_0^1 sum_a t^{a,0} Omega_{1,0;a,1}(s t_0) ds, A_{a,p} = Omega_{a,p+1;1,0},
    and the k >= 2 coefficients are multi-point functions.
    """
    m = get_model(model) if isinstance(model, str) else model
    if pmax < 1 or K < 0:
        raise ValueError("pmax >= 1 and K >= 0 required")
    if K > 2:
        raise OutOfTruncation("the small-ring route assembles at most two insertions")
    coords = m.coords
    pieces = []
    # A(t_0)
    acc = []
    for a in coords:
        om = two_point_small(m, 1, 0, a, 1)
        acc.append(t_var(a, 0) * _scale_t0(om))
    pieces.append(_integrate_s(poly_sum(acc, Poly)))
    if K >= 1:
        for a in coords:
            for p in range(1, pmax + 1):
                pieces.append(two_point_small(m, a, p + 1, 1, 0) * t_var(a, p))
    if K >= 2:
        idx = [(a, p) for a in coords for p in range(1, pmax + 1)]
        for i, (a, p) in enumerate(idx):
            for j, (b, q) in enumerate(idx):
                if j < i:
                    continue
                om = two_point_small(m, a, p, b, q)
                # 1/2! sum over ordered pairs = sum over unordered pairs with weight 1/2 on the diagonal
                fac = Q(1, 2) if i == j else Q(1)
                pieces.append((om * t_var(a, p) * t_var(b, q)).scale(fac))
    hF = poly_sum(pieces, Poly)
    return FreeEnergyExpansion(m.name, pmax, K, hF, genus_strata(hF))


def extract_invariant(exp: FreeEnergyExpansion, genus: int, insertions: Iterable[tuple[int, int]]) -> Rational:
    """<tau_{a1,p1} ... tau_{ak,pk}>_g: the mixed partial derivative of F^g at t = 0."""
    ins = list(insertions)
    positive = [x for x in ins if x[1] >= 1]
    if any(p > exp.pmax for _, p in ins) or len(positive) > exp.K:
        raise OutOfTruncation("insertions outside the computed truncation")
    F = exp.genus(genus)
    counts: dict[tuple, int] = {}
    for a, p in ins:
        counts[("t", a, p)] = counts.get(("t", a, p), 0) + 1
    c = F.coefficient(counts)
    mult = 1
    for n in counts.values():
        mult *= factorial(n)
    return Q(c) * mult
