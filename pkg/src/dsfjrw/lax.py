"""Model registry and the scalar Lax hierarchy engine.

Conventions.  For a time index beta the model stores the root kind (``P`` of
the first type or ``Q`` of the second type), the power ``N`` of the root that
gives the normal coordinate and the period ``H`` (the order of L divided by
the order of the root).  Then

* the flow of t^{beta,q} is generated by (P^{N+Hq})_+ or -(Q^{N+Hq})_-,
  multiplied by 1 / (H prod_{j=0}^{q} (c + j)), c = N/H;
* h_{beta,q} = kappa / (H prod_{j=0}^{q+1} (c + j)) res root^{N + H(q+1)};
* w^alpha = eta^{alpha beta} h_{beta,-1}.

All flows are evaluated through the residue potential
res[G, Y] = d_x omega(G, Y), so no x-integration is needed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .corering import DiffPoly, Q, poly_sum, rescale_flow, substitute_hbar, prolong, integrate_x
from .pdo import (PDOperator, compose, pos_part, neg_part, res, root, power, res_potential,
                  sqrt_second_type, power_second_type, adjoint, commutator)

__all__ = [
    "BadModel",
    "TruncationInsufficient",
    "NonInvariantFlow",
    "ModelSpec",
    "TimeSpec",
    "get_model",
    "MODELS",
    "build_lax",
    "utilde_from_w",
    "utilde_from_u",
    "w_from_u",
    "Hierarchy",
    "FlowTable",
    "flows",
    "normal_coordinates",
    "ham_density",
    "two_point",
    "sigma_lax",
    "restrict_model",
    "adjoint",
    "time_factor",
    "density_factor",
]


class BadModel(ValueError):
    pass


class TruncationInsufficient(RuntimeError):
    pass


class NonInvariantFlow(ValueError):
    pass


@dataclass(frozen=True)
class TimeSpec:
    kind: str  # "P" or "Q"
    N: int
    H: int

    @property
    def c(self):
        return Q(self.N, self.H)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    family: str  # "a", "d"
    h: int
    coords: tuple[int, ...]  # active coordinate indices
    weights: Mapping[int, int]  # deg w^alpha (d_x has degree 1)
    times: Mapping[int, TimeSpec]
    eta_up: Mapping[tuple[int, int], object]  # contravariant metric, nonzero entries
    kappa: object = 1
    mask: frozenset = frozenset()
    parent: str | None = None
    exponents: tuple[int, ...] = ()
    zeta: Mapping[int, int] = field(default_factory=dict)  # sigma-eigenvalue of each time (folding)

    @property
    def rank(self) -> int:
        return len(self.coords)

    def eta(self, a: int, b: int):
        return Q(self.eta_up.get((a, b), 0))

    def eta_down(self) -> dict[tuple[int, int], object]:
        return _invert(self.coords, self.eta_up)

    def time_degree(self, beta: int, q: int):
        """Weighted degree of d/dt^{beta,q} (in units of d_x)."""
        ts = self.times[beta]
        return Q(self.h, ts.H) * (ts.N + ts.H * q)


def _invert(coords, mat):
    import itertools
    n = len(coords)
    M = [[Q(mat.get((a, b), 0)) for b in coords] for a in coords]
    inv = [[Q(int(i == j)) for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        inv[col], inv[piv] = inv[piv], inv[col]
        pv = M[col][col]
        M[col] = [x / pv for x in M[col]]
        inv[col] = [x / pv for x in inv[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
                inv[r] = [x - f * y for x, y in zip(inv[r], inv[col])]
    return {(coords[i], coords[j]): inv[i][j] for i in range(n) for j in range(n) if inv[i][j] != 0}


_D4_ETA = {(1, 3): 6, (3, 1): 6, (2, 2): 6, (4, 4): 2}
_D4_WEIGHTS = {1: 6, 2: 4, 3: 2, 4: 4}
_D4_TIMES = {1: TimeSpec("P", 1, 6), 2: TimeSpec("P", 3, 6), 3: TimeSpec("P", 5, 6), 4: TimeSpec("Q", 1, 2)}


def _restrict_eta(eta, coords):
    return {k: v for k, v in eta.items() if k[0] in coords and k[1] in coords}


MODELS: dict[str, ModelSpec] = {
    "d4": ModelSpec("d4", "d", 6, (1, 2, 3, 4), _D4_WEIGHTS, _D4_TIMES, _D4_ETA,
                    exponents=(1, 3, 3, 5)),
    "b3": ModelSpec("b3", "d", 6, (1, 2, 3), _D4_WEIGHTS, {a: _D4_TIMES[a] for a in (1, 2, 3)},
                    _restrict_eta(_D4_ETA, (1, 2, 3)), mask=frozenset({4}), parent="d4",
                    exponents=(1, 3, 5), zeta={1: 1, 2: 1, 3: 1, 4: -1}),
    "g2": ModelSpec("g2", "d", 6, (1, 3), _D4_WEIGHTS, {a: _D4_TIMES[a] for a in (1, 3)},
                    _restrict_eta(_D4_ETA, (1, 3)), mask=frozenset({2, 4}), parent="d4",
                    exponents=(1, 5), zeta={1: 1, 2: 0, 3: 1, 4: 0}),
    "a1": ModelSpec("a1", "a", 2, (1,), {1: 2}, {1: TimeSpec("P", 1, 2)}, {(1, 1): 1}, kappa=2,
                    exponents=(1,)),
}


def get_model(name: str) -> ModelSpec:
    name = name.lower()
    if name in MODELS:
        return MODELS[name]
    raise BadModel(f"unknown model {name!r}")


# ---------------------------------------------------------------------------
# coefficient packages


def _w(a, k=0):
    return DiffPoly.w(a, k)


def utilde_from_w() -> dict[int, DiffPoly]:
    """u-tilde^i of the D4 operator in the normal coordinates w."""
    w1, w2, w3, w4 = (_w(a) for a in (1, 2, 3, 4))
    u1 = (w1.scale(Q(1, 2)) + (w2 * w3).scale(Q(1, 12)) + (w3 ** 3).scale(Q(1, 216))
          - (_w(3, 1) ** 2).scale(Q(1, 4)) - _w(2, 2).scale(Q(1, 3))
          - (w3 * _w(3, 2)).scale(Q(2, 9)) + _w(3, 4).scale(Q(23, 45)))
    u2 = w2.scale(Q(1, 2)) + (w3 ** 2).scale(Q(1, 8)) - _w(3, 2)
    u3 = w3.scale(Q(1, 2))
    u4 = w4.scale(Q(1, 2))
    return {1: u1, 2: u2, 3: u3, 4: u4}


def utilde_from_u() -> dict[int, DiffPoly]:
    """u-tilde^i of the D4 operator in the gauge coordinates u (jets named w)."""
    u1, u2, u3, u4 = (_w(a) for a in (1, 2, 3, 4))
    t1 = (u4.scale(2) + (u1 * u2).scale(28) - (u1 ** 3).scale(144) - (_w(1, 1) ** 2).scale(Q(293, 2))
          - (u1 * _w(1, 2)).scale(118) + _w(2, 2).scale(4) - _w(1, 4).scale(17))
    t2 = (u1 ** 2).scale(98) + _w(1, 2).scale(28) - u2.scale(6)
    t3 = u1.scale(-14)
    t4 = u3.scale(2)
    return {1: t1, 2: t2, 3: t3, 4: t4}


def w_from_u() -> dict[int, DiffPoly]:
    """The normal coordinates w^alpha as differential polynomials in u."""
    u1 = _w(1)
    w1 = ((u1 ** 3).scale(Q(-2288, 27)) + _w(4).scale(4) + (_w(1, 1) ** 2).scale(99)
          + (u1 * _w(1, 2)).scale(Q(1012, 9)) - _w(1, 4).scale(Q(242, 45)))
    return {1: w1, 2: _w(2).scale(-12), 3: u1.scale(-28), 4: _w(3).scale(4)}


def substitute_jets(f: DiffPoly, mapping: Mapping[int, DiffPoly]) -> DiffPoly:
    """Replace w^a by mapping[a] (and w^a_k by d_x^k mapping[a])."""
    sub = {}
    for a, k in f.jets():
        if a in mapping:
            sub[("w", a, k)] = mapping[a].dx_n(k)
    return f.subs(sub)


def _mask_poly(f: DiffPoly, mask) -> DiffPoly:
    if not mask:
        return f
    return f.filter_terms(lambda mono: not any(isinstance(t, tuple) and t[0] == "w" and t[1] in mask
                                               and e > 0 for t, e in mono.items()))


def mask_poly(f: DiffPoly, mask) -> DiffPoly:
    """Set the jets of the masked coordinates to zero."""
    for m in mask:
        for mono, _ in f.items():
            for t, e in mono.items():
                if isinstance(t, tuple) and t[0] == "w" and t[1] == m and e < 0:
                    raise ValueError("cannot mask a coordinate that appears with negative exponent")
    return _mask_poly(f, mask)


# ---------------------------------------------------------------------------


def _d_minus_one_times(f, k: int, floor: int, ring) -> PDOperator:
    """d^{-1} o f d^k."""
    return compose(PDOperator.d(-1, ring), PDOperator({k: f}, ring), floor)


def d_type_operator(ut: Mapping[int, object], n: int, floor: int, ring=DiffPoly) -> PDOperator:
    """d^{2n} + d^{-1} sum_i (u_i d^{2i-1} + d^{2i-1} u_i) + d^{-1} rho d^{-1} rho, rho = ut[n+1]."""
    terms: dict[int, list] = {2 * n: [ring.const(1)]}

    def add(op):
        for m, c in op.terms.items():
            terms.setdefault(m, []).append(c)

    for i in range(1, n + 1):
        u = ut.get(i)
        if not u:
            continue
        add(_d_minus_one_times(u, 2 * i - 1, floor, ring))
        # d^{-1} d^{2i-1} u = d^{2i-2} o u
        add(compose(PDOperator.d(2 * i - 2, ring), PDOperator({0: u}, ring), floor))
    rho = ut.get(n + 1)
    if rho:
        half = compose(PDOperator.d(-1, ring), PDOperator({0: rho}, ring), floor + 1)
        add(compose(half, half, floor))
    out = {m: poly_sum(lst, ring) for m, lst in terms.items() if m >= floor}
    return PDOperator(out, ring, floor)


def build_lax(model: ModelSpec | str, coords: str = "w", floor: int = -12, ring=DiffPoly,
              utilde: Mapping[int, object] | None = None) -> PDOperator:
    """The scalar Lax operator of a model, exact above ``floor``."""
    if isinstance(model, str):
        model = get_model(model)
    if model.family == "a":
        if model.name == "a1":
            return PDOperator({2: ring.const(1), 0: ring.w(1) if utilde is None else utilde[1]}, ring)
        raise BadModel("use a_type_operator for A_n with n > 1")
    if utilde is None:
        if coords == "w":
            utilde = utilde_from_w()
        elif coords == "u":
            utilde = utilde_from_u()
        else:
            raise BadModel(f"unknown coordinate system {coords!r}")
        if model.mask:
            if coords == "u":
                mask_u = {4: {3}, 2: {2}}
                um = set()
                for m in model.mask:
                    um |= mask_u[m]
                utilde = {i: _mask_poly(c, um) for i, c in utilde.items()}
            else:
                utilde = {i: _mask_poly(c, model.mask) for i, c in utilde.items()}
    return d_type_operator(utilde, 3, floor, ring)


def a_type_operator(n: int, floor: int | None = None, ring=DiffPoly) -> PDOperator:
    """L = d^{n+1} + sum_{i=0}^{n-1} w^{i+1} d^i  (the A_n operator in raw coordinates)."""
    terms = {n + 1: ring.const(1)}
    for i in range(n):
        terms[i] = ring.w(i + 1)
    return PDOperator(terms, ring)


# ---------------------------------------------------------------------------


def time_factor(ts: TimeSpec, q: int):
    """d/dt^{beta,q} = time_factor * d/dt_raw."""
    prod = Q(1)
    for j in range(q + 1):
        prod *= ts.c + j
    return 1 / (ts.H * prod)


def density_factor(ts: TimeSpec, q: int, kappa=1):
    """h_{beta,q} = density_factor * res root^{N + H(q+1)}."""
    prod = Q(1)
    for j in range(q + 2):
        prod *= ts.c + j
    return Q(kappa) / (ts.H * prod)


FlowTable = dict  # (alpha, beta, q) -> DiffPoly


class Hierarchy:
    """Caches the operators of one model over one coefficient ring.

    ``ring`` is DiffPoly for the full jet space; the small-phase-space ring of
    :mod:`dsfjrw.taugen` plugs in through ``lax_operator`` and ``rho``.
    """

    def __init__(self, model: ModelSpec | str, ring=DiffPoly, lax_builder=None, rho=None,
                 jet_cap_of=None):
        self.model = get_model(model) if isinstance(model, str) else model
        self.ring = ring
        self._lax_builder = lax_builder or (lambda floor: build_lax(self.model, "w", floor, ring))
        self._rho = rho
        self._jet_cap_of = jet_cap_of
        self._L: PDOperator | None = None
        self._P: PDOperator | None = None
        self._Ppow: dict[int, PDOperator] = {}
        self._Lpow: dict[int, PDOperator] = {}
        self._Qcache: dict[tuple, tuple] = {}
        self._Qroot: dict[int, object] = {}
        self._floor = 0

    # -- operators ---------------------------------------------------------
    @property
    def order(self) -> int:
        return self.model.h

    def ensure_floor(self, floor: int) -> None:
        if self._L is not None and self._floor <= floor:
            return
        floor = min(floor, self._floor - 6) if self._L is not None else floor
        self._L = self._lax_builder(floor)
        P, powers = root(self._L, self.order, floor - 1 + 1, return_powers=True) \
            if self.order > 1 else (self._L, {1: self._L})
        self._P = P
        self._Ppow = dict(powers)
        self._Lpow = {}
        self._floor = floor

    def L(self, floor: int) -> PDOperator:
        self.ensure_floor(floor)
        return self._L

    def P_power(self, k: int, floor: int) -> PDOperator:
        """P^k exact above ``floor``."""
        h = self.order
        d = 1
        if k <= h:
            need = floor - (k - 1) * d
            self.ensure_floor(need)
            op = self._Ppow.get(k)
            if op is not None and (op.floor is None or op.floor <= floor):
                return op.truncate(floor)
            op = power(self._P, k, floor)
            return op
        q, r = divmod(k, h)
        if r == 0:
            return self.L_power(q, floor)
        Lq = self.L_power(q, floor - r)
        Pr = self.P_power(r, floor - h * q)
        return compose(Lq, Pr, floor)

    def L_power(self, q: int, floor: int) -> PDOperator:
        h = self.order
        key = q
        cached = self._Lpow.get(key)
        if cached is not None and cached.floor is not None and cached.floor <= floor:
            return cached.truncate(floor)
        if q == 1:
            self.ensure_floor(floor)
            return self._L.truncate(floor)
        a = q // 2
        X = self.L_power(a, floor - h * (q - a))
        Y = X if q - a == a else self.L_power(q - a, floor - h * a)
        op = compose(X, Y, floor)
        self._Lpow[key] = op
        return op

    def rho(self):
        if self._rho is not None:
            return self._rho
        return DiffPoly.w(4).scale(Q(1, 2))

    def Q_power(self, k: int, jet_cap: int, diag: int) -> PDOperator:
        """Q^k (second type): terms with jet degree <= jet_cap and power + jet
        degree <= diag are exact."""
        key = (k, jet_cap)
        op = self._Qcache.get(key)
        if op is not None and op[0] >= diag:
            return op[1]
        Qs = self._Qroot.get(jet_cap)
        if Qs is None or Qs.diag < diag + k - 1:
            L = self.L(-3 - jet_cap)
            Qs = sqrt_second_type(L, self.rho(), jet_cap, diag + k - 1)
            self._Qroot[jet_cap] = Qs
        sym = power_second_type(Qs, k, diag) if k > 1 else Qs.cut(diag)
        op = sym.to_operator()
        self._Qcache[key] = (diag, op)
        return op

    def Q_minus_exact(self, floor: int) -> PDOperator:
        """Q_- = d^{-1} rho (exactly), expanded to ``floor``."""
        return compose(PDOperator.d(-1, self.ring), PDOperator({0: self.rho()}, self.ring), floor)

    # -- residues of commutators ------------------------------------------
    def _jet_cap(self, degree) -> int:
        if self._jet_cap_of is not None:
            return self._jet_cap_of(degree)
        return int(degree) - min(self.model.weights[a] for a in self.model.coords)

    def generator_potential(self, beta: int, q: int, gamma: int, gq: int, degree) -> object:
        """omega with res[G_{beta,q}, Y_{gamma,gq}] = d_x omega (raw times, no prefactors).

        G is the flow generator of t^{beta,q}; Y = root_gamma^{N + H (gq + 1)}, the
        operator whose residue is proportional to h_{gamma,gq}.
        ``degree`` is the weighted degree of omega, used for jet caps.
        """
        ts = self.model.times[beta]
        ys = self.model.times[gamma]
        M = ts.N + ts.H * q
        K = ys.N + ys.H * (gq + 1)
        if ts.kind == "P":
            B = self.P_power(M, 0)
            B = pos_part(B)
            if ys.kind == "P":
                Y = self.P_power(K, -M)
                return res_potential(B, Y)
            J = self._jet_cap(degree)
            if K == 1:
                Y = self.Q_minus_exact(-M)
            else:
                Y = PDOperator(neg_part(self.Q_power(K, J, J)).terms, self.ring)
            om = res_potential(B, Y)
            return om.truncate_jet(J) if K != 1 else om
        # Q-type generator G = -(Q^M)_-
        J = self._jet_cap(degree)
        if ys.kind == "P":
            Yp = pos_part(self.P_power(K, 0))
            if M == 1:
                G = self.Q_minus_exact(-K)
                return res_potential(Yp, G)
            QM = self.Q_power(M, J, J)
            G = PDOperator(neg_part(QM).terms, self.ring)
            return res_potential(Yp, G).truncate_jet(J)
        # both second type: res[(Q^M)_+, Q^K] = d_x omega((Q^M)_+, (Q^K)_-)
        # the jet degree of an omega term is the sum of (power + jet degree) of
        # its two factors; those of (Q^K)_- are >= -K
        QM = self.Q_power(M, J, J + K)
        Bp = PDOperator({m: c for m, c in QM.terms.items() if m >= 0}, self.ring)
        if K == 1:
            Y = self.Q_minus_exact(-J - 1)
        else:
            Y = PDOperator(neg_part(self.Q_power(K, J, J)).terms, self.ring)
        return res_potential(Bp, Y).truncate_jet(J)

    def coordinate_density(self, gamma: int):
        """h_{gamma,-1} (unrescaled)."""
        ys = self.model.times[gamma]
        fac = density_factor(ys, -1, self.model.kappa)
        if ys.kind == "P":
            return res(self.P_power(ys.N, -1)).scale(fac)
        if ys.N == 1:
            return self.rho().scale(fac)
        J = self._jet_cap(self.density_degree(gamma, -1))
        return res(self.Q_power(ys.N, J, J)).truncate_jet(J).scale(fac)

    def density_degree(self, gamma: int, q: int):
        ys = self.model.times[gamma]
        return Q(self.model.h, ys.H) * (ys.N + ys.H * (q + 1)) + 1

    def density(self, gamma: int, q: int):
        """h_{gamma,q} (unrescaled)."""
        ys = self.model.times[gamma]
        K = ys.N + ys.H * (q + 1)
        fac = density_factor(ys, q, self.model.kappa)
        if ys.kind == "P":
            return res(self.P_power(K, -1)).scale(fac)
        if K == 1:
            return self.rho().scale(fac)
        J = self._jet_cap(self.density_degree(gamma, q))
        r = res(self.Q_power(K, J, J)).truncate_jet(J)
        return r.scale(fac)

    def flow(self, beta: int, q: int) -> dict[int, object]:
        """Unrescaled d w^alpha / d t^{beta,q} for every active alpha."""
        m = self.model
        tf = time_factor(m.times[beta], q)
        out = {}
        deg_t = m.time_degree(beta, q)
        pots = {}
        for gamma in m.coords:
            ys = m.times[gamma]
            pots[gamma] = self.generator_potential(beta, q, gamma, -1,
                                                   self.density_degree(gamma, -1) + deg_t - 1)
        for alpha in m.coords:
            acc = []
            for gamma in m.coords:
                e = m.eta(alpha, gamma)
                if not e:
                    continue
                ys = m.times[gamma]
                fac = e * density_factor(ys, -1, m.kappa) * tf
                if pots[gamma]:
                    acc.append(pots[gamma].scale(fac))
            om = poly_sum(acc, self.ring) if acc else self.ring()
            out[alpha] = om.dx()
        return out

    def two_point(self, alpha: int, p: int, beta: int, q: int):
        """Omega_{alpha,p;beta,q} (unrescaled) from the residue potential.

        d h_{alpha,p-1}/d t^{beta,q} = d_x Omega, and h_{alpha,-1} is the
        normal coordinate itself, so p = 0 needs no special case.  The
        potential has no jet-free constant by homogeneity.
        """
        m = self.model
        fac = density_factor(m.times[alpha], p - 1, m.kappa) * time_factor(m.times[beta], q)
        deg = self.density_degree(alpha, p - 1) + m.time_degree(beta, q) - 1
        om = self.generator_potential(beta, q, alpha, p - 1, deg)
        return om.scale(fac)


# ---------------------------------------------------------------------------
# public functional API (full jet space)

_HIER_CACHE: dict[str, Hierarchy] = {}


def hierarchy(model: ModelSpec | str) -> Hierarchy:
    m = get_model(model) if isinstance(model, str) else model
    h = _HIER_CACHE.get(m.name)
    if h is None:
        h = Hierarchy(m)
        _HIER_CACHE[m.name] = h
    return h


def flows(model: ModelSpec | str, pmax: int, betas=None) -> FlowTable:
    """(alpha, beta, q) -> rescaled d w^alpha / d t^{beta,q}."""
    H = hierarchy(model)
    table = {}
    for beta in (betas or H.model.coords):
        for q in range(pmax + 1):
            fl = H.flow(beta, q)
            for alpha, f in fl.items():
                table[(alpha, beta, q)] = rescale_flow(f)
    return table


def flow(model, beta: int, q: int) -> dict[int, DiffPoly]:
    H = hierarchy(model)
    return {a: rescale_flow(f) for a, f in H.flow(beta, q).items()}


def normal_coordinates(model, L: PDOperator | None = None) -> dict[int, DiffPoly]:
    m = get_model(model) if isinstance(model, str) else model
    if L is None:
        H = hierarchy(m)
    else:
        H = Hierarchy(m, lax_builder=lambda floor: L)
        H.ensure_floor(L.floor if L.floor is not None else -8)
    out = {}
    for alpha in m.coords:
        acc = []
        for gamma in m.coords:
            e = m.eta(alpha, gamma)
            if e:
                acc.append(H.coordinate_density(gamma).scale(e))
        out[alpha] = poly_sum(acc, DiffPoly)
    return out


def ham_density(model, beta: int, q: int) -> DiffPoly:
    """h_{beta,q} after the hbar substitution."""
    m = get_model(model) if isinstance(model, str) else model
    if q == -1:
        eta_d = m.eta_down()
        return poly_sum([DiffPoly.w(g).scale(eta_d[(beta, g)]) for g in m.coords if (beta, g) in eta_d],
                        DiffPoly)
    return substitute_hbar(hierarchy(m).density(beta, q))


def two_point(model, alpha: int, p: int, beta: int, q: int, route: str = "integrate") -> DiffPoly:
    """Omega_{alpha,p;beta,q} (hbar-substituted).

    ``route="integrate"`` prolongs h_{alpha,p-1} along the flow and integrates
    in x; ``route="potential"`` uses the residue potential directly.
    """
    m = get_model(model) if isinstance(model, str) else model
    if route == "potential":
        if p == 0:
            return two_point(m, alpha, p, beta, q, "integrate")
        return substitute_hbar(hierarchy(m).two_point(alpha, p, beta, q))
    h = ham_density(m, alpha, p - 1)
    fl = flow(m, beta, q)
    return integrate_x(prolong(h, fl))


def sigma_lax(model, L: PDOperator, which: str = "sigma1") -> PDOperator:
    """Apply the folding automorphism to the coefficients of L (D4 normal coordinates)."""
    m = get_model(model) if isinstance(model, str) else model
    if m.name != "d4":
        raise BadModel("sigma actions are defined for d4")
    sub = sigma_substitution(which)
    return L.map_coefficients(lambda c: substitute_jets(c, sub))


def sigma_substitution(which: str) -> dict[int, DiffPoly]:
    w = {a: DiffPoly.w(a) for a in (1, 2, 3, 4)}
    if which == "sigma1":
        return {1: w[1], 2: w[2], 3: w[3], 4: -w[4]}
    if which == "sigma4":
        # order-3 isometry of (w2, w4) for the form (w2)^2 + 3 (w4)^2
        return {1: w[1], 3: w[3],
                2: w[2].scale(Q(-1, 2)) + w[4].scale(Q(-3, 2)),
                4: w[2].scale(Q(1, 2)) + w[4].scale(Q(-1, 2))}
    raise BadModel(f"unknown automorphism {which!r}")


def restrict_model(table: FlowTable, mask, keep_betas=None) -> FlowTable:
    """Restrict D4 flows to a folding locus (masked jets set to zero)."""
    out = {}
    for (alpha, beta, q), f in table.items():
        if keep_betas is not None and beta not in keep_betas:
            continue
        g = mask_poly(f, mask)
        if alpha in mask:
            if g:
                raise NonInvariantFlow(f"flow of w{alpha} along t^{beta},{q} does not vanish on the locus")
            continue
        out[(alpha, beta, q)] = g
    return out
