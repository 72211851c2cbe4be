"""Frobenius manifolds from one-variable superpotentials.

A superpotential is a Laurent polynomial in p whose coefficients are
polynomials in the flat coordinates v^alpha (tokens ("v", alpha)).  The
structure constants are

    c_{ijk} = -scale (Res_{p=oo} + Res_{p=0}) d_i lam d_j lam d_k lam / lam'

and eta_{ij} = c_{1ij}.  The potential is recovered from c by the Euler
operator, which is exact for quasi-homogeneous data, and then checked.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .corering import Poly, Q, Rational, fmt_q

__all__ = [
    "PoleCollision",
    "NotIntegrable",
    "SuperPotential",
    "FrobeniusData",
    "v",
    "superpotential",
    "structure_constants",
    "potential",
    "euler_data",
    "frobenius_data",
    "d_type_superpotential",
    "d_type_flat_superpotential",
    "a_type_sigma",
    "a_type_superpotential",
    "d_type_sigma",
    "e6_sigma",
    "wdvv_defect",
]


class PoleCollision(ValueError):
    pass


class NotIntegrable(ValueError):
    pass


def v(alpha: int) -> Poly:
    return Poly.var(("v", alpha))


@dataclass
class SuperPotential:
    """lam(p) = sum_k coeffs[k] p^k over the coordinates ``coords``."""

    coeffs: dict[int, Poly]
    coords: tuple[int, ...]
    scale: Rational = Q(1)
    token: str = "v"

    def var(self, alpha: int) -> Poly:
        return Poly.var((self.token, alpha))

    def derivative_p(self) -> dict[int, Poly]:
        return {k - 1: c.scale(k) for k, c in self.coeffs.items() if k != 0 and c}

    def partial(self, alpha: int) -> dict[int, Poly]:
        tok = (self.token, alpha)
        out = {k: c.diff(tok) for k, c in self.coeffs.items()}
        return {k: c for k, c in out.items() if c}

    def substitute(self, mapping: Mapping[object, Poly], coords=None) -> "SuperPotential":
        new = {k: c.subs(mapping) for k, c in self.coeffs.items()}
        return SuperPotential({k: c for k, c in new.items() if c}, tuple(coords or self.coords),
                              self.scale, self.token)

    def poles(self) -> set:
        out = {"inf"}
        if min(self.coeffs) < 0:
            out.add(0)
        return out

    def to_text(self) -> str:
        parts = []
        for k in sorted(self.coeffs, reverse=True):
            parts.append(f"({self.coeffs[k].to_text()}) p^{k}")
        return " + ".join(parts)


# ---------------------------------------------------------------------------
# Laurent series helpers (dicts power -> Poly)


def _mul(a: dict, b: dict, lo=None, hi=None) -> dict:
    out: dict[int, list] = {}
    for i, x in a.items():
        for j, y in b.items():
            k = i + j
            if (lo is not None and k < lo) or (hi is not None and k > hi):
                continue
            out.setdefault(k, []).append(x * y)
    res = {}
    for k, lst in out.items():
        s = lst[0]
        for t in lst[1:]:
            s = s + t
        if s:
            res[k] = s
    return res


def _inverse_at_infinity(f: dict, depth: int) -> dict:
    """1/f as a series in 1/p down to p^(-top-depth), f with constant leading coefficient."""
    top = max(f)
    lead = f[top]
    if not lead.is_constant():
        raise PoleCollision("leading coefficient of lam' must be a nonzero constant")
    c = Q(lead.constant_term())
    if c == 0:
        raise PoleCollision("lam' vanishes at leading order")
    # 1/f = p^-top / c * sum_n (-g)^n, g = sum_{j>=1} f_{top-j}/c p^-j
    g = {-j: f[top - j].scale(1 / c) for j in range(1, top - min(f) + 1) if f.get(top - j)}
    result = {0: Poly.const(1)}
    term = {0: Poly.const(1)}
    for _ in range(depth):
        term = {k: -x for k, x in _mul(term, g, lo=-depth).items()}
        if not term:
            break
        for k, x in term.items():
            result[k] = result[k] + x if k in result else x
    return {k - top: x.scale(1 / c) for k, x in result.items() if x and k >= -depth}


def _inverse_at_zero(f: dict, depth: int) -> dict:
    """1/f as a series in p up to p^(-bottom+depth); the lowest coefficient must be a monomial."""
    bot = min(f)
    lead = f[bot]
    if len(lead) != 1:
        raise PoleCollision("lowest coefficient of lam' must be a monomial")
    inv = lead ** -1
    g = {j: f[bot + j] * inv for j in range(1, max(f) - bot + 1) if f.get(bot + j)}
    result = {0: Poly.const(1)}
    term = {0: Poly.const(1)}
    for _ in range(depth):
        term = {k: -x for k, x in _mul(term, g, hi=depth).items()}
        if not term:
            break
        for k, x in term.items():
            result[k] = result[k] + x if k in result else x
    return {k - bot: x * inv for k, x in result.items() if x and k <= depth}


def _residue_sum(lam: SuperPotential, num: dict) -> Poly:
    """-(Res_oo + Res_0) num / lam'."""
    dl = lam.derivative_p()
    total = Poly()
    # at infinity: Res_oo g = -[p^-1] g
    top_num = max(num)
    inv = _inverse_at_infinity(dl, top_num + max(dl) + 1)
    ser = _mul(num, inv, lo=-1, hi=-1)
    total = total + ser.get(-1, Poly())
    if 0 in lam.poles() and min(dl) < 0:
        bot_num = min(num)
        inv0 = _inverse_at_zero(dl, max(0, -1 - bot_num + min(dl)) + 1)
        ser0 = _mul(num, inv0, lo=-1, hi=-1)
        total = total - ser0.get(-1, Poly())
    return total


def structure_constants(lam: SuperPotential):
    """(c, eta) with c[(i,j,k)] polynomial (sorted index triples) and eta[(i,j)] rational."""
    parts = {a: lam.partial(a) for a in lam.coords}
    c: dict[tuple[int, int, int], Poly] = {}
    cs = lam.coords
    for x, i in enumerate(cs):
        for y, j in enumerate(cs[x:], x):
            pij = _mul(parts[i], parts[j])
            for k in cs[y:]:
                num = _mul(pij, parts[k])
                if not num:
                    continue
                val = _residue_sum(lam, num).scale(lam.scale)
                if val.has_negative_exponents():
                    raise PoleCollision("structure constant is not polynomial")
                if val:
                    c[(i, j, k)] = val
    unit = cs[0]
    eta = {}
    for i in cs:
        for j in cs:
            val = c.get(tuple(sorted((unit, i, j))), Poly())
            if val and not val.is_constant():
                raise PoleCollision("the first coordinate is not a unit direction")
            if val:
                eta[(i, j)] = Q(val.constant_term())
    return c, eta


def _c_get(c, i, j, k) -> Poly:
    return c.get(tuple(sorted((i, j, k))), Poly())


def potential(c, coords, degrees: Mapping[int, Rational], charge: Rational) -> Poly:
    """F with d_i d_j d_k F = c_{ijk}, via the Euler operator E = sum d_a v^a d_a.

    Every piece is quasi-homogeneous: d_i d_j F has degree 3 - c_W - d_i - d_j,
    so d_i d_j F = E(d_i d_j F)/deg = sum_k d_k v^k c_{ijk} / deg, and so on.
    """
    dF = 3 - Q(charge)
    second = {}
    for i in coords:
        for j in coords:
            deg = dF - degrees[i] - degrees[j]
            acc = Poly()
            for k in coords:
                acc = acc + (_c_get(c, i, j, k) * v(k)).scale(degrees[k])
            if acc and deg == 0:
                raise NotIntegrable("zero-degree second derivative")
            second[(i, j)] = acc.scale(1 / deg) if acc else Poly()
    first = {}
    for i in coords:
        deg = dF - degrees[i]
        acc = Poly()
        for j in coords:
            acc = acc + (second[(i, j)] * v(j)).scale(degrees[j])
        first[i] = acc.scale(1 / deg) if acc else Poly()
    F = Poly()
    for i in coords:
        F = F + (first[i] * v(i)).scale(degrees[i])
    F = F.scale(1 / dF)
    # integrability check
    for (i, j, k), val in c.items():
        if F.diff(("v", i)).diff(("v", j)).diff(("v", k)) != val:
            raise NotIntegrable(f"c_{i}{j}{k} is not a third derivative of a potential")
    for i in coords:
        for j in coords:
            for k in coords:
                if tuple(sorted((i, j, k))) not in c:
                    if F.diff(("v", i)).diff(("v", j)).diff(("v", k)):
                        raise NotIntegrable("potential has a spurious third derivative")
    return F


def wdvv_defect(c, eta, coords) -> list:
    """Nonzero entries of sum c_{ab d} eta^{de} c_{e g z} - (b <-> g)."""
    from .lax import _invert
    eta_up = _invert(coords, eta)
    bad = []
    for a in coords:
        for b in coords:
            for g in coords:
                for z in coords:
                    lhs = Poly()
                    rhs = Poly()
                    for d in coords:
                        for e in coords:
                            up = eta_up.get((d, e))
                            if not up:
                                continue
                            lhs = lhs + (_c_get(c, a, b, d) * _c_get(c, e, g, z)).scale(up)
                            rhs = rhs + (_c_get(c, a, g, d) * _c_get(c, e, b, z)).scale(up)
                    if lhs != rhs:
                        bad.append((a, b, g, z))
    return bad


# ---------------------------------------------------------------------------
# models


def _d4_coeffs(mask=()) -> dict[int, Poly]:
    z = {a: (Poly() if a in mask else v(a)) for a in (1, 2, 3, 4)}
    v1, v2, v3, v4 = z[1], z[2], z[3], z[4]
    out = {
        6: Poly.const(1),
        4: v3,
        2: v2 + (v3 * v3).scale(Q(1, 4)),
        0: v1 + (v2 * v3).scale(Q(1, 6)) + (v3 ** 3).scale(Q(1, 108)),
        -2: (v4 * v4).scale(Q(1, 4)),
    }
    return {k: c for k, c in out.items() if c}


def superpotential(model: str) -> SuperPotential:
    model = model.lower()
    if model == "d4":
        return SuperPotential(_d4_coeffs(), (1, 2, 3, 4))
    if model == "b3":
        return SuperPotential(_d4_coeffs((4,)), (1, 2, 3))
    if model == "g2":
        return SuperPotential(_d4_coeffs((2, 4)), (1, 3))
    if model == "a1":
        # the pairing scale 2 gives eta_11 = 1, F = v^3/6
        return SuperPotential({2: Poly.const(1), 0: v(1)}, (1,), Q(2))
    if model.startswith("dn:"):
        return d_type_flat_superpotential(int(model[3:]))
    from .lax import BadModel
    raise BadModel(f"no superpotential for {model!r}")


@dataclass
class FrobeniusData:
    model: str
    coords: tuple[int, ...]
    eta: dict
    c: dict
    F: Poly
    degrees: dict
    charge: Rational
    fjrw_sign: bool = False  # True: (v^4)^2 -> -(v^4)^2 applied (FJRW convention)

    @property
    def spectrum(self) -> dict:
        return {a: 1 - self.charge / 2 - self.degrees[a] for a in self.coords}

    def eta_up(self) -> dict:
        from .lax import _invert
        return _invert(self.coords, self.eta)

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "eta": [[fmt_q(self.eta.get((a, b), Q(0))) for b in self.coords] for a in self.coords],
            "F": self.F.to_text(),
            "degrees": {str(a): fmt_q(d) for a, d in self.degrees.items()},
            "charge": fmt_q(self.charge),
            "spectrum": {str(a): fmt_q(m) for a, m in self.spectrum.items()},
        }


def _degrees_for(model: str, coords) -> dict:
    model = model.lower()
    if model in ("d4", "b3", "g2"):
        full = {1: Q(1), 2: Q(2, 3), 3: Q(1, 3), 4: Q(2, 3)}
        return {a: full[a] for a in coords}
    if model == "a1":
        return {1: Q(1)}
    if model.startswith("dn:"):
        n = int(model[3:])
        # D_{n+1}: z has degree 1/(2n); v^i multiplies z^{2(i-1)}, v^{n+1} is the tail
        out = {i: Q(2 * n - 2 * (i - 1), 2 * n) for i in range(1, n + 1)}
        out[n + 1] = Q(n + 1, 2 * n)
        return out
    raise ValueError(model)


def euler_data(model: str, eta=None):
    """(degrees d_alpha, spectrum mu_alpha, charge c_W).

    c_W is fixed by the metric: eta_{ab} != 0 forces d_a + d_b = 2 - c_W.
    """
    lam = superpotential(model)
    degrees = _degrees_for(model, lam.coords)
    if eta is None:
        _, eta = structure_constants(lam)
    charges = {2 - degrees[a] - degrees[b] for (a, b), val in eta.items() if val}
    if len(charges) != 1:
        raise ValueError("metric is not homogeneous")
    cw = charges.pop()
    mu = {a: 1 - cw / 2 - degrees[a] for a in lam.coords}
    return degrees, mu, cw


def frobenius_data(model: str, fjrw_sign: bool = False) -> FrobeniusData:
    lam = superpotential(model)
    c, eta = structure_constants(lam)
    degrees, _, cw = euler_data(model, eta)
    F = potential(c, lam.coords, degrees, cw)
    if fjrw_sign and 4 in lam.coords:
        F = _flip_square(F, ("v", 4))
    return FrobeniusData(model.lower(), lam.coords, eta, c, F, degrees, cw, fjrw_sign)


def _flip_square(F: Poly, tok) -> Poly:
    """Replace tok^(2k) by (-1)^k tok^(2k)."""
    out = Poly()
    for mono, coef in F.items():
        e = mono.get(tok, 0)
        if e % 2:
            raise ValueError("odd power cannot be flipped")
        term = Poly.monomial(mono.items(), coef * (-1) ** (e // 2))
        out = out + term
    return out


# ---------------------------------------------------------------------------
# A- and D-type superpotentials and their sigma actions


def a_type_superpotential(n: int) -> SuperPotential:
    """f_t(z) = z^{2n} + t_{2n-1} z^{2n-2} + ... + t_2 z + t_1 (not flat coordinates)."""
    coeffs = {2 * n: Poly.const(1)}
    for i in range(1, 2 * n):
        coeffs[i - 1] = Poly.var(("t", i))
    return SuperPotential(coeffs, tuple(range(1, 2 * n)), Q(1), "t")


def a_type_sigma(n: int) -> dict[int, int]:
    """sigma*(t_i) = (-1)^{i-1} t_i on the A_{2n-1} deformation parameters."""
    return {i: (-1) ** (i - 1) for i in range(1, 2 * n)}


def d_type_superpotential(n: int, tail_sign: int = -1) -> SuperPotential:
    """lam(z) = P(z^2) + tail_sign t_{n+1}^2/(4 z^2), P(x) = x^n + t_n x^{n-1} + ... + t_1.

    This is the D_{n+1} superpotential in its deformation parameters; the
    lemma's pairing carries the factor -2 relative to the residue formula of
    ``structure_constants`` (scale 2).
    """
    if n < 3:
        raise ValueError("n >= 3 required")
    coeffs = {2 * n: Poly.const(1)}
    for i in range(1, n + 1):
        coeffs[2 * (i - 1)] = Poly.var(("t", i))
    coeffs[-2] = (Poly.var(("t", n + 1)) ** 2).scale(Q(tail_sign, 4))
    return SuperPotential(coeffs, tuple(range(1, n + 2)), Q(2), "t")


def d_type_sigma(n: int) -> dict[int, int]:
    """sigma*(t_i) = t_i (i <= n), sigma*(t_{n+1}) = -t_{n+1}."""
    out = {i: 1 for i in range(1, n + 1)}
    out[n + 1] = -1
    return out


def e6_sigma() -> dict[int, int]:
    """sigma*(t_i) = t_i (i = 1,3,4,6), -t_i (i = 2,5)."""
    return {1: 1, 2: -1, 3: 1, 4: 1, 5: -1, 6: 1}


def _series_power_at_infinity(coeffs: dict[int, Poly], top: int, exponent: Rational, depth: int) -> dict:
    """lam^exponent at infinity for lam = p^top (1 + g), g in 1/p; returns powers of p
    as (top*exponent + k) keyed by k <= 0, down to k = -depth."""
    g = {k - top: c for k, c in coeffs.items() if k != top}
    result = {0: Poly.const(1)}
    term = {0: Poly.const(1)}
    coef = Q(1)
    for j in range(1, depth + 1):
        term = _mul(term, g, lo=-depth)
        if not term:
            break
        coef = coef * (exponent - (j - 1)) / j
        for k, x in term.items():
            result[k] = result[k] + x.scale(coef) if k in result else x.scale(coef)
    return result


def d_type_flat_superpotential(n: int) -> SuperPotential:
    """The D_{n+1} superpotential p^{2n} + ... + (v^{n+1})^2/(4p^2) in flat coordinates.

    Flat coordinates are the residues s_k = Res lam^{(2k-1)/(2n)} (k = 1..n),
    normalized to have linear part t_{n+1-k}; the tail coefficient is flat.
    The sign of the tail follows the D4 convention of this package.
    """
    lam = d_type_superpotential(n, tail_sign=+1)
    coeffs = lam.coeffs
    h = 2 * n
    flat = {}
    for k in range(1, n + 1):
        e = Q(2 * k - 1, h)
        # lam^e = p^{2k-1} sum_j r_j p^{-j}; residue = r_{2k}
        ser = _series_power_at_infinity(coeffs, h, e, 2 * k)
        r = ser.get(-2 * k, Poly())
        # linear part: e * t_{n+1-k}  (from the p^{2(n-k)} coefficient)
        i = n + 1 - k
        lin = r.coefficient({("t", i): 1})
        flat[i] = r.scale(1 / lin)
    # invert the triangular map t -> flat by fixed-point iteration
    tvals = {i: Poly.var(("v", i)) for i in range(1, n + 1)}
    for _ in range(n + 1):
        new = {}
        for i in range(1, n + 1):
            corr = flat[i] - Poly.var(("t", i))
            sub = {("t", j): tvals[j] for j in range(1, n + 1)}
            sub[("t", n + 1)] = Poly.var(("v", n + 1))
            new[i] = Poly.var(("v", i)) - corr.subs(sub)
        if new == tvals:
            break
        tvals = new
    mapping = {("t", j): tvals[j] for j in range(1, n + 1)}
    mapping[("t", n + 1)] = Poly.var(("v", n + 1))
    out = {k: c.subs(mapping) for k, c in coeffs.items()}
    return SuperPotential({k: c for k, c in out.items() if c}, tuple(range(1, n + 2)), Q(1), "v")
