"""Virasoro operators of a Frobenius manifold acting on truncated tau functions.

Operators act on functions of the times t^{a,p} (tokens ("t", a, p)) with
hbar kept as a Laurent variable.  L_m for m >= -1:

    L_{-1} = sum t^{a,p} d/dt^{a,p-1} + eta_{ab} t^{a,0} t^{b,0} / (2 hbar)
    L_0    = sum (p + 1/2 + mu_a) t^{a,p} d/dt^{a,p} + 1/4 sum (1/4 - mu_a^2)
    L_m    = hbar/2 sum_{p+q=m-1} (-1)^{q+1} prod_j (mu_a + j - q - 1/2) eta^{ab} d^2/dt^{a,p}dt^{b,q}
             + sum prod_{j=0}^{m} (mu_a + p + 1/2 + j) t^{a,p} d/dt^{a,p+m}
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .corering import Poly, Q, Rational, fmt_q, poly_sum
from .frobenius import FrobeniusData, frobenius_data

__all__ = [
    "HBAR",
    "VirasoroOp",
    "Residual",
    "build_virasoro",
    "act",
    "apply",
    "commutator_defect",
]

HBAR = "hbar"


def _t(a: int, p: int) -> tuple:
    return ("t", a, p)


def _is_t(tok) -> bool:
    return isinstance(tok, tuple) and len(tok) == 3 and tok[0] == "t"


def _prod(xs) -> Rational:
    out = Q(1)
    for x in xs:
        out *= x
    return out


@dataclass
class VirasoroOp:
    m: int
    coords: tuple[int, ...]
    mu: dict[int, Rational]
    eta: dict[tuple[int, int], Rational]
    eta_up: dict[tuple[int, int], Rational]
    unit: int = 1
    const_mu: tuple = ()
    folded: bool = False

    def b(self, alpha: int, p: int) -> Rational:
        """Coefficient of t^{a,p} d/dt^{a,p+m}."""
        m = self.m
        if p < 0 or p + m < 0:
            return Q(0)
        if m == -1:
            return Q(1) if p >= 1 else Q(0)
        if m == 0:
            return p + Q(1, 2) + self.mu[alpha]
        return _prod(self.mu[alpha] + p + Q(1, 2) + j for j in range(m + 1))

    def a_pairs(self) -> dict[tuple[tuple[int, int], tuple[int, int]], Rational]:
        """hbar-coefficient of d^2/dt^{a,p} dt^{b,q} (ordered pairs, both orders present)."""
        m = self.m
        out = {}
        if m < 1:
            return out
        for p in range(m):
            q = m - 1 - p
            for (a, b), up in self.eta_up.items():
                coef = Q(1, 2) * (-1) ** (q + 1) * _prod(self.mu[a] + j - q - Q(1, 2) for j in range(m + 1)) * up
                if coef:
                    out[((a, p), (b, q))] = coef
        return out

    def c_pairs(self) -> dict[tuple[tuple[int, int], tuple[int, int]], Rational]:
        """hbar^{-1}-coefficient of t^{a,p} t^{b,q} (ordered pairs)."""
        if self.m != -1:
            return {}
        return {((a, 0), (b, 0)): Q(1, 2) * v for (a, b), v in self.eta.items() if v}

    def constant(self) -> Rational:
        if self.m != 0:
            return Q(0)
        mus = self.const_mu or tuple(self.mu[a] for a in self.coords)
        return Q(1, 4) * sum((Q(1, 4) - x ** 2 for x in mus), Q(0))

    def blocks(self, pmax: int) -> dict:
        b = {}
        for a in self.coords:
            for p in range(0, pmax + 1):
                if 0 <= p + self.m <= pmax and self.b(a, p):
                    b[((a, p), (a, p + self.m))] = self.b(a, p)
        return {"a": self.a_pairs(), "b": b, "c": self.c_pairs(), "const": self.constant()}

    def to_json(self, pmax: int) -> dict:
        bl = self.blocks(pmax)

        def enc(d):
            return [{"i": list(k[0]), "j": list(k[1]), "coef": fmt_q(v)} for k, v in sorted(d.items())]

        return {"m": self.m, "a": enc(bl["a"]), "b": enc(bl["b"]), "c": enc(bl["c"]),
                "const": fmt_q(bl["const"])}


def build_virasoro(frob: FrobeniusData | str, m: int, folded: bool = False) -> VirasoroOp:
    """L_m of the model's own Frobenius manifold.

    With ``folded`` (B3, G2 only) the operator is the one acting on the folded
    D4 tau function: L_0 then carries the constant of the whole D4 spectrum,
    which breaks [L_-1, L_1] = -2 L_0 inside the B3/G2 algebra itself.
    """
    if m < -1:
        raise ValueError("m >= -1")
    if isinstance(frob, str):
        frob = frobenius_data(frob)
    const_mu = ()
    if folded and frob.model in ("b3", "g2"):
        # a folded tau function is the D4 one on the invariant locus, so the
        # L_0 constant runs over the whole D4 spectrum
        const_mu = tuple(frobenius_data("d4").spectrum.values())
    return VirasoroOp(m, frob.coords, frob.spectrum, dict(frob.eta), frob.eta_up(), frob.coords[0], const_mu,
                       bool(const_mu))


def _t_vars(f: Poly) -> set:
    return {tok for tok in f.variables() if _is_t(tok)}


def _first_order(op: VirasoroOp, f: Poly, dilaton: bool) -> Poly:
    m = op.m
    pieces = []
    for tok in _t_vars(f):
        _, a, r = tok
        p = r - m
        coef = op.b(a, p)
        if not coef:
            continue
        df = f.diff(tok)
        pieces.append((df * Poly.var(_t(a, p))).scale(coef))
        if dilaton and (a, p) == (op.unit, 1):
            pieces.append(-df.scale(coef))
    return poly_sum(pieces, Poly)


def _quadratic(op: VirasoroOp) -> Poly:
    cp = op.c_pairs()
    quad = poly_sum((Poly.var(_t(a, p)) * Poly.var(_t(b, q)) * Poly.const(c)
                     for ((a, p), (b, q)), c in cp.items()), Poly)
    return quad * Poly.var(HBAR, -1) if quad else quad


def act(op: VirasoroOp, f: Poly, dilaton: bool = False) -> Poly:
    """L_m f, exact (f is a polynomial in times, Laurent in hbar)."""
    hbar = Poly.var(HBAR)
    pieces = [_first_order(op, f, dilaton)]
    for ((a, p), (b, q)), coef in op.a_pairs().items():
        d2 = f.diff(_t(a, p)).diff(_t(b, q))
        if d2:
            pieces.append((d2 * hbar).scale(coef))
    quad = _quadratic(op)
    if quad:
        pieces.append(quad * f)
    pieces.append(f.scale(op.constant()))
    return poly_sum(pieces, Poly)


def commutator_defect(i: int, j: int, frob: FrobeniusData | str, f: Poly) -> Poly:
    """[L_i, L_j] f - (i - j) L_{i+j} f."""
    if isinstance(frob, str):
        frob = frobenius_data(frob)
    Li, Lj, Lij = (build_virasoro(frob, k) for k in (i, j, i + j))
    return act(Li, act(Lj, f)) - act(Lj, act(Li, f)) - act(Lij, f).scale(i - j)


@dataclass
class Residual:
    m: int
    verified: Poly
    unverifiable: Poly
    pmax: int
    K: int

    @property
    def passed(self) -> bool:
        return not self.verified

    def summary(self) -> str:
        state = "pass" if self.passed else "FAIL"
        return (f"L_{self.m}: {state} ({len(self.verified)} nonzero verifiable terms, "
                f"{len(self.unverifiable)} terms unverifiable at this truncation)")


def _posdeg(mono: dict) -> int:
    return sum(e for tok, e in mono.items() if _is_t(tok) and tok[2] >= 1)


def _verifiable(op: VirasoroOp, mono: dict, pmax: int, K: int) -> bool:
    """Every F-monomial feeding this residual monomial lies inside the truncation window."""
    m = op.m
    if op.folded and op.a_pairs():
        # needs second derivatives along the folded-away directions
        return False
    k = _posdeg(mono)
    if any(_is_t(tok) and tok[2] > pmax for tok in mono):
        return False
    for tok in mono:
        if not _is_t(tok):
            continue
        _, a, p = tok
        if op.b(a, p) == 0:
            continue
        r = p + m
        if r > pmax or k - (p >= 1) + (r >= 1) > K:
            return False
    # dilaton term -b(1,1) d/dt^{1,1+m}
    if op.b(op.unit, 1):
        r = 1 + m
        if r > pmax or k + (r >= 1) > K:
            return False
    for ((a, p), (b, q)) in op.a_pairs():
        if max(p, q) > pmax or k + (p >= 1) + (q >= 1) > K:
            return False
    return True


def apply(op: VirasoroOp, logtau, pmax: int | None = None, K: int | None = None) -> Residual:
    """(L_m tau)/tau with the dilaton shift, split into verifiable and polluted parts.

    ``logtau`` is a FreeEnergyExpansion (hbar F with F = sum hbar^g F^g) or a
    Poly already equal to log tau.
    """
    from .taugen import FreeEnergyExpansion

    if isinstance(logtau, FreeEnergyExpansion):
        phi = logtau.hF * Poly.var(HBAR, -1)
        pmax = logtau.pmax if pmax is None else pmax
        K = logtau.K if K is None else K
    else:
        phi = logtau
    if pmax is None or K is None:
        raise ValueError("pmax and K are required for a raw series")
    hbar = Poly.var(HBAR)
    pieces = [_first_order(op, phi, dilaton=True), _quadratic(op), Poly.const(op.constant())]
    for ((a, p), (b, q)), coef in op.a_pairs().items():
        da = phi.diff(_t(a, p))
        db = phi.diff(_t(b, q))
        pieces.append((da.diff(_t(b, q)) + da * db) * hbar * Poly.const(coef))
    res = poly_sum(pieces, Poly)
    good = res.filter_terms(lambda mono: _verifiable(op, mono, pmax, K))
    return Residual(op.m, good, res - good, pmax, K)
