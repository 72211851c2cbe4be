"""Genus-zero Dubrovin-Zhang data: calibration, two-point functions, topological solution."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .corering import Poly, Q, Rational, fmt_q, poly_sum
from .frobenius import FrobeniusData, frobenius_data

__all__ = [
    "Resonance",
    "CalibrationTable",
    "TSeries",
    "calibrate",
    "check_normalization",
    "genus0_two_point",
    "topological_solution",
    "genus0_free_energy",
    "principal_flow",
    "t_var",
    "positive_degree",
    "truncate_positive",
    "subs_truncated",
]


class Resonance(ValueError):
    pass


def t_var(alpha: int, p: int) -> Poly:
    return Poly.var(("t", alpha, p))


def _v(alpha: int) -> tuple:
    return ("v", alpha)


def positive_degree(mono: dict) -> int:
    return sum(e for tok, e in mono.items() if isinstance(tok, tuple) and tok[0] == "t" and tok[2] >= 1)


def truncate_positive(f: Poly, D: int) -> Poly:
    return f.filter_terms(lambda mono: positive_degree(mono) <= D)


def subs_truncated(f: Poly, sub: dict, D: int) -> Poly:
    """f(v -> series) truncated at positive degree D.

    Each series is split as v = t_0 part + delta with delta of positive degree
    >= 1, and f is Taylor expanded: sum_{k<=D} (delta . grad)^k f / k! at the t_0 part.
    """
    base = {}
    delta = {}
    for tok, ser in sub.items():
        b = truncate_positive(ser, 0)
        base[tok] = b
        d = ser - b
        if d:
            delta[tok] = truncate_positive(d, D)
    acc = [f]
    g = f
    fact = 1
    for k in range(1, D + 1):
        if not delta:
            break
        nxt = []
        for tok, d in delta.items():
            dg = g.diff(tok)
            if dg:
                nxt.append(truncate_positive(dg * d, D))
        g = poly_sum(nxt, Poly)
        if not g:
            break
        fact *= k
        acc.append(g.scale(Q(1, fact)))
    return truncate_positive(poly_sum(acc, Poly).subs(base), D)


@dataclass
class CalibrationTable:
    frob: FrobeniusData
    pmax: int
    theta: dict[tuple[int, int], Poly]
    grad: dict[tuple[int, int, int], Poly] = field(default_factory=dict)

    def d(self, gamma: int, alpha: int, p: int) -> Poly:
        """d theta_{alpha,p} / d v^gamma."""
        return self.grad[(gamma, alpha, p)]

    def to_json(self) -> dict:
        return {
            "model": self.frob.model,
            "pmax": self.pmax,
            "theta": {f"{a},{p}": th.to_text() for (a, p), th in sorted(self.theta.items())},
        }


def _c_up(frob: FrobeniusData) -> dict:
    """c^d_{ab} = eta^{de} c_{abe}."""
    eta_up = frob.eta_up()
    cs = frob.coords
    out = {}
    for a in cs:
        for b in cs:
            for d in cs:
                acc = Poly()
                for e in cs:
                    up = eta_up.get((d, e))
                    if up:
                        acc = acc + frob.c.get(tuple(sorted((a, b, e))), Poly()).scale(up)
                if acc:
                    out[(d, a, b)] = acc
    return out


def calibrate(frob: FrobeniusData | str, pmax: int) -> CalibrationTable:
    """theta_{a,p} from d_a d_b theta_{g,p} = c^d_{ab} d_d theta_{g,p-1}.

    The gradient G_a = d_a theta_{g,p} has Euler degree mu_a + mu_g + p, so
    G_a = sum_b d_b v^b d_b G_a / (mu_a + mu_g + p), and then theta = E(theta)/deg.
    Both steps are checked exactly afterwards.
    """
    if isinstance(frob, str):
        frob = frobenius_data(frob)
    if pmax < 0:
        raise ValueError("pmax >= 0")
    cs = frob.coords
    mu = frob.spectrum
    deg = frob.degrees
    cup = _c_up(frob)
    theta: dict[tuple[int, int], Poly] = {}
    grad: dict[tuple[int, int, int], Poly] = {}
    for g in cs:
        th = poly_sum((Poly.var(_v(b)).scale(frob.eta[(g, b)]) for b in cs if frob.eta.get((g, b))), Poly)
        theta[(g, 0)] = th
        for a in cs:
            grad[(a, g, 0)] = th.diff(_v(a))
    for p in range(1, pmax + 1):
        for g in cs:
            G = {}
            for a in cs:
                weight = mu[a] + mu[g] + p
                acc = Poly()
                for b in cs:
                    hess = poly_sum((cup[(d, a, b)] * grad[(d, g, p - 1)] for d in cs if (d, a, b) in cup), Poly)
                    if hess:
                        acc = acc + (hess * Poly.var(_v(b))).scale(deg[b])
                if weight == 0:
                    raise Resonance(f"mu_{a} + mu_{g} + {p} = 0")
                G[a] = acc.scale(1 / weight)
            total = 1 - frob.charge / 2 + mu[g] + p
            if total == 0:
                raise Resonance(f"theta_{g},{p} has Euler degree zero")
            th = poly_sum(((G[a] * Poly.var(_v(a))).scale(deg[a]) for a in cs), Poly).scale(1 / total)
            for a in cs:
                if th.diff(_v(a)) != G[a]:
                    raise Resonance(f"homogeneity does not fix theta_{g},{p}")
            theta[(g, p)] = th
            for a in cs:
                grad[(a, g, p)] = G[a]
    return CalibrationTable(frob, pmax, theta, grad)


def check_normalization(cal: CalibrationTable, order: int | None = None) -> dict[int, bool]:
    """Coefficient of z^k in d theta_a(z) eta^{-1} d theta_b(-z) - eta_{ab}, k = 0..order."""
    order = cal.pmax if order is None else order
    frob = cal.frob
    cs = frob.coords
    eta_up = frob.eta_up()
    report = {}
    for k in range(order + 1):
        ok = True
        for a in cs:
            for b in cs:
                acc = Poly()
                for r in range(k + 1):
                    sign = (-1) ** (k - r)
                    for (x, y), up in eta_up.items():
                        acc = acc + (cal.d(x, a, r) * cal.d(y, b, k - r)).scale(up * sign)
                if k == 0:
                    acc = acc - Poly.const(frob.eta.get((a, b), 0))
                if acc:
                    ok = False
        report[k] = ok
    return report


def genus0_two_point(cal: CalibrationTable, alpha: int, p: int, beta: int, q: int) -> Poly:
    """Omega^0_{a,p;b,q} = sum_{r=0}^{q} (-1)^r <d theta_{a,p+r+1}, d theta_{b,q-r}>."""
    if p + q + 1 > cal.pmax:
        raise ValueError(f"calibration depth {cal.pmax} < {p + q + 1}")
    eta_up = cal.frob.eta_up()
    acc = []
    for r in range(q + 1):
        for (x, y), up in eta_up.items():
            acc.append((cal.d(x, alpha, p + r + 1) * cal.d(y, beta, q - r)).scale(up * (-1) ** r))
    return poly_sum(acc, Poly)


@dataclass
class TSeries:
    """Polynomial in t^{a,p}, truncated at total degree D in the p >= 1 times."""

    poly: Poly
    degree: int

    def to_text(self) -> str:
        return self.poly.to_text()

    def to_json(self) -> dict:
        return {"degree": self.degree, "terms": self.poly.to_json()}


def topological_solution(cal: CalibrationTable, D: int, pmax: int | None = None) -> dict[int, TSeries]:
    """Iterate v_[k+1] = eta^{-1} sum t^{a,p} grad theta_{a,p}(v_[k]) until stable at degree D."""
    if D < 0:
        raise ValueError("D >= 0")
    pmax = cal.pmax if pmax is None else pmax
    cs = cal.frob.coords
    eta_up = cal.frob.eta_up()
    vt = {b: t_var(b, 0) for b in cs}
    for _ in range(D + 1):
        sub = {_v(b): vt[b] for b in cs}
        new = {}
        for b in cs:
            acc = []
            for g in cs:
                up = eta_up.get((b, g))
                if not up:
                    continue
                for a in cs:
                    for p in range(pmax + 1):
                        gr = cal.d(g, a, p)
                        if gr:
                            acc.append((t_var(a, p) * subs_truncated(gr, sub, D - (p >= 1))).scale(up))
            new[b] = truncate_positive(poly_sum(acc, Poly), D)
        if new == vt:
            break
        vt = new
    return {b: TSeries(vt[b], D) for b in cs}


def genus0_free_energy(cal: CalibrationTable, D: int, pmax: int | None = None,
                       solution: dict[int, TSeries] | None = None) -> TSeries:
    """F^0 = 1/2 sum Omega_{a,p;b,q}(v(t)) tt^{a,p} tt^{b,q}, tt = t - delta_{(a,p),(1,1)}.

    Needs calibration depth 2 pmax + 1.
    """
    pmax = (cal.pmax - 1) // 2 if pmax is None else pmax
    if pmax < 1 or 2 * pmax + 1 > cal.pmax:
        raise ValueError("need pmax >= 1 and calibration depth >= 2 pmax + 1")
    cs = cal.frob.coords
    sol = solution or topological_solution(cal, D, pmax)
    sub = {_v(b): sol[b].poly for b in cs}
    unit = cs[0]

    def tt(a, p):
        x = t_var(a, p)
        return x - Poly.const(1) if (a, p) == (unit, 1) else x

    idx = [(a, p) for a in cs for p in range(pmax + 1)]
    acc = []
    for i, (a, p) in enumerate(idx):
        for j, (b, q) in enumerate(idx):
            if j < i:
                continue
            om = genus0_two_point(cal, a, p, b, q)
            if not om:
                continue
            mult = Q(1, 2) if i == j else Q(1)
            room = D - (p >= 1 and (a, p) != (unit, 1)) - (q >= 1 and (b, q) != (unit, 1))
            if room < 0:
                continue
            acc.append(subs_truncated(om, sub, room) * tt(a, p) * tt(b, q) * Poly.const(mult))
    return TSeries(truncate_positive(poly_sum(acc, Poly), D), D)


def principal_flow(cal: CalibrationTable, alpha: int, p: int) -> dict[int, Poly]:
    """Gradient form of the dispersionless flow: dv^b/dt^{a,p} = eta^{bg} d_x(d_g theta_{a,p+1}).

    Returned as eta^{bg} d_g theta_{a,p+1} (before d_x)."""
    eta_up = cal.frob.eta_up()
    cs = cal.frob.coords
    return {b: poly_sum((cal.d(g, alpha, p + 1).scale(eta_up[(b, g)]) for g in cs if eta_up.get((b, g))), Poly)
            for b in cs}
