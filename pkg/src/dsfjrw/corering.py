"""Exact rational arithmetic and sparse polynomial rings.

Two ring types live here:

* :class:`Poly` -- a sparse Laurent polynomial over Q in named variables.
  Variables are arbitrary hashable tokens, e.g. ``("v", 2)`` or ``("t", 1, 3)``.
* :class:`DiffPoly` -- the differential-polynomial ring in the jets
  ``d_x^k w^alpha`` together with the deformation symbol ``eps`` (eps^2 = hbar)
  and a formal ``s2`` with s2^2 = 2.

Monomials are packed into a single Python integer, one signed bit field per
variable slot, so that monomial multiplication is integer addition.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Mapping

import gmpy2
from gmpy2 import mpq

__all__ = [
    "Rational",
    "Q",
    "fmt_q",
    "parse_q",
    "NotExact",
    "Poly",
    "DiffPoly",
    "JetVar",
    "jet",
    "var_token",
    "integrate_x",
    "substitute_hbar",
    "rescale_flow",
    "prolong",
    "hbar_strata",
    "poly_sum",
]

Rational = type(mpq(0))

_BITS = 24
_SIZE = 1 << _BITS
_HALF = 1 << (_BITS - 1)
_MASK = _SIZE - 1


class NotExact(ValueError):
    """Raised when a differential polynomial is not a total x-derivative."""


def Q(x: object, den: object = None) -> Rational:
    """Coerce ints, Fractions, strings ``"a/b"`` and mpq values to mpq."""
    if den is not None:
        return mpq(int(x), int(den))
    if isinstance(x, Rational):
        return x
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, str):
        return parse_q(x)
    return mpq(x)


def parse_q(s: str) -> Rational:
    s = s.strip().replace(" ", "")
    if "/" in s:
        a, b = s.split("/")
        return mpq(int(a), int(b))
    return mpq(int(s))


def fmt_q(c: Rational) -> str:
    c = Q(c)
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


# ---------------------------------------------------------------------------
# variable registry
#
# Slots are interned on first use.  The registry only ever grows and never
# influences results: canonical orderings are computed from the tokens.

_TOKENS: list[object] = []
_SLOT: dict[object, int] = {}


def _slot(token: object) -> int:
    s = _SLOT.get(token)
    if s is None:
        s = len(_TOKENS)
        _TOKENS.append(token)
        _SLOT[token] = s
    return s


def _unit(token: object) -> int:
    return 1 << (_BITS * _slot(token))


@lru_cache(maxsize=1 << 18)
def _decode(key: int) -> tuple[tuple[int, int], ...]:
    out = []
    slot = 0
    while key:
        f = key & _MASK
        if f >= _HALF:
            f -= _SIZE
        if f:
            out.append((slot, f))
        key = (key - f) >> _BITS
        slot += 1
    return tuple(out)


def _encode(pairs: Iterable[tuple[object, int]]) -> int:
    key = 0
    for tok, e in pairs:
        if e:
            if not -_HALF < e < _HALF:
                raise OverflowError("exponent out of range")
            key += e << (_BITS * _slot(tok))
    return key


def var_token(slot: int) -> object:
    return _TOKENS[slot]


def _tok_sort_key(tok: object) -> tuple:
    if isinstance(tok, tuple):
        return (1,) + tuple((0, x) if isinstance(x, int) else (1, str(x)) for x in tok)
    return (0, str(tok))


# ---------------------------------------------------------------------------


class Poly:
    """Sparse Laurent polynomial with rational coefficients."""

    __slots__ = ("_t",)

    def __init__(self, terms: Mapping[int, Rational] | None = None, *, _clean: bool = False):
        if terms is None:
            self._t: dict[int, Rational] = {}
        elif _clean:
            self._t = terms  # type: ignore[assignment]
        else:
            self._t = {k: Q(c) for k, c in terms.items() if c != 0}

    # -- construction ------------------------------------------------------
    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def const(cls, c: object):
        c = Q(c)
        return cls({0: c}, _clean=True) if c else cls()

    @classmethod
    def var(cls, token: object, exp: int = 1, coef: object = 1):
        return cls({exp * _unit(token): Q(coef)}) if exp else cls.const(coef)

    @classmethod
    def monomial(cls, pairs: Iterable[tuple[object, int]], coef: object = 1):
        return cls({_encode(pairs): Q(coef)})

    def _new(self, terms: dict[int, Rational]):
        return self.__class__(terms, _clean=True)

    # -- inspection --------------------------------------------------------
    def __bool__(self) -> bool:
        return bool(self._t)

    def is_zero(self) -> bool:
        return not self._t

    def __len__(self) -> int:
        return len(self._t)

    def items(self) -> Iterator[tuple[dict[object, int], Rational]]:
        for k, c in self._t.items():
            yield {_TOKENS[s]: e for s, e in _decode(k)}, c

    def raw_items(self):
        return self._t.items()

    def constant_term(self) -> Rational:
        return self._t.get(0, mpq(0))

    def is_constant(self) -> bool:
        return not self._t or (len(self._t) == 1 and 0 in self._t)

    def variables(self) -> set[object]:
        out = set()
        for k in self._t:
            for s, _ in _decode(k):
                out.add(_TOKENS[s])
        return out

    def has_negative_exponents(self) -> bool:
        return any(e < 0 for k in self._t for _, e in _decode(k))

    def coefficient(self, pairs: Iterable[tuple[object, int]] | Mapping[object, int]) -> Rational:
        if isinstance(pairs, Mapping):
            pairs = pairs.items()
        return self._t.get(_encode(pairs), mpq(0))

    # -- arithmetic --------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Poly):
            return other
        return self.__class__.const(other)

    def __add__(self, other):
        if not isinstance(other, Poly):
            if other == 0:
                return self
            other = self.__class__.const(other)
        if len(other._t) > len(self._t):
            a, b = other._t, self._t
        else:
            a, b = self._t, other._t
        r = dict(a)
        for k, c in b.items():
            v = r.get(k)
            if v is None:
                r[k] = c
            else:
                v = v + c
                if v:
                    r[k] = v
                else:
                    del r[k]
        return self._new(r)

    __radd__ = __add__

    def __neg__(self):
        return self._new({k: -c for k, c in self._t.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def scale(self, c: object):
        c = Q(c)
        if not c:
            return self._new({})
        if c == 1:
            return self
        return self._new({k: v * c for k, v in self._t.items()})

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return self.scale(other)
        a, b = self._t, other._t
        if len(a) < len(b):
            a, b = b, a
        if len(b) == 1:
            (k2, c2), = b.items()
            if k2 == 0:
                return self._new({k: c * c2 for k, c in a.items()})
            return self._new({k + k2: c * c2 for k, c in a.items()})
        r: dict[int, Rational] = {}
        get = r.get
        for k2, c2 in b.items():
            for k1, c1 in a.items():
                k = k1 + k2
                v = get(k)
                if v is None:
                    r[k] = c1 * c2
                else:
                    r[k] = v + c1 * c2
        return self._new({k: c for k, c in r.items() if c})

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, other):
        if isinstance(other, Poly):
            if len(other._t) != 1:
                return self.exact_div(other)
            (k, c), = other._t.items()
            return self._new({k1 - k: c1 / c for k1, c1 in self._t.items()})
        return self.scale(1 / Q(other))

    def exact_div(self, d: "Poly") -> "Poly":
        """Exact division by a polynomial; raises ValueError if not exact."""
        if len(d._t) == 1:
            return self / d
        # multivariate long division along the canonical order of the leading variable
        lead_key = max(d._t, key=self._monomial_order_key)
        lead_c = d._t[lead_key]
        rem = self
        quo = self._new({})
        guard = 0
        while rem:
            k = max(rem._t, key=self._monomial_order_key)
            q = rem._new({k - lead_key: rem._t[k] / lead_c})
            if q.has_negative_exponents() and not self.has_negative_exponents():
                raise ValueError("polynomial division is not exact")
            quo = quo + q
            rem = rem - q * d
            guard += 1
            if guard > 100000:
                raise ValueError("polynomial division did not terminate")
        return quo

    def _monomial_order_key(self, key: int):
        return sorted(((_tok_sort_key(_TOKENS[s]), e) for s, e in _decode(key)), reverse=True)

    def __pow__(self, n: int):
        if n < 0:
            if len(self._t) != 1:
                raise ValueError("negative power of a non-monomial")
            (k, c), = self._t.items()
            return self._new({-k * (-n): 1 / c ** (-n)})
        result = self.__class__.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self._t == other._t
        try:
            c = Q(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self._t == ({0: c} if c else {})

    def __hash__(self) -> int:
        return hash(frozenset(self._t.items()))

    # -- calculus and substitution ----------------------------------------
    def diff(self, token: object):
        """Partial derivative with respect to a variable."""
        if token not in _SLOT:
            return self._new({})
        s = _SLOT[token]
        u = 1 << (_BITS * s)
        r = {}
        for k, c in self._t.items():
            for ss, e in _decode(k):
                if ss == s:
                    r[k - u] = c * e
                    break
        return self._new(r)

    def degree_in(self, token: object) -> int:
        if token not in _SLOT:
            return 0
        s = _SLOT[token]
        return max((e for k in self._t for ss, e in _decode(k) if ss == s), default=0)

    def subs(self, mapping: Mapping[object, "Poly | object"], cls=None):
        """Substitute variables by polynomials (or scalars).  Result class ``cls``."""
        cls = cls or self.__class__
        sub = {}
        for tok, val in mapping.items():
            if tok in _SLOT:
                sub[_SLOT[tok]] = val if isinstance(val, Poly) else cls.const(val)
        if not sub:
            return cls(dict(self._t), _clean=True) if cls is not self.__class__ else self
        power_cache: dict[tuple[int, int], Poly] = {}

        def pw(s, e):
            p = power_cache.get((s, e))
            if p is None:
                p = sub[s] ** e
                power_cache[(s, e)] = p
            return p

        acc: dict[int, Rational] = {}
        pieces: list[Poly] = []
        for k, c in self._t.items():
            rest = k
            factors = []
            for s, e in _decode(k):
                if s in sub:
                    rest -= e << (_BITS * s)
                    factors.append((s, e))
            if not factors:
                v = acc.get(k)
                acc[k] = c if v is None else v + c
                continue
            term = cls({rest: c}, _clean=True)
            for s, e in factors:
                term = term * pw(s, e)
            pieces.append(term)
        out = cls({k: c for k, c in acc.items() if c}, _clean=True)
        return _sum_polys(pieces, out)

    def map_coefficients(self, f: Callable[[Rational], Rational]):
        return self._new({k: v for k, v in ((k, Q(f(c))) for k, c in self._t.items()) if v})

    def filter_terms(self, pred: Callable[[dict[object, int]], bool]):
        r = {}
        for k, c in self._t.items():
            if pred({_TOKENS[s]: e for s, e in _decode(k)}):
                r[k] = c
        return self._new(r)

    def evaluate(self, values: Mapping[object, object]) -> Rational:
        total = mpq(0)
        for mono, c in self.items():
            t = c
            for tok, e in mono.items():
                t = t * Q(values[tok]) ** e
            total += t
        return total

    # -- canonical ordering & text ----------------------------------------
    def _sort_key(self, mono: dict[object, int]):
        toks = sorted(mono.items(), key=lambda te: _tok_sort_key(te[0]))
        return (sum(mono.values()), [(_tok_sort_key(t), e) for t, e in toks])

    def sorted_terms(self) -> list[tuple[dict[object, int], Rational]]:
        return sorted(self.items(), key=lambda mc: self._sort_key(mc[0]))

    @staticmethod
    def token_name(tok: object) -> str:
        if isinstance(tok, tuple):
            head, *rest = tok
            return str(head) + "".join(str(x) if i == 0 else f"_{x}" for i, x in enumerate(rest))
        return str(tok)

    def _mono_str(self, mono: dict[object, int]) -> str:
        toks = sorted(mono.items(), key=lambda te: _tok_sort_key(te[0]))
        parts = []
        for t, e in toks:
            name = self.token_name(t)
            parts.append(name if e == 1 else f"{name}^{e}")
        return " ".join(parts)

    def to_text(self) -> str:
        if not self._t:
            return "0"
        out = []
        for mono, c in self.sorted_terms():
            ms = self._mono_str(mono)
            neg = c < 0
            a = -c if neg else c
            if ms:
                body = ms if a == 1 else f"{fmt_q(a)} {ms}"
            else:
                body = fmt_q(a)
            if not out:
                out.append(("-" if neg else "") + body)
            else:
                out.append(("- " if neg else "+ ") + body)
        return " ".join(out)

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.to_text()})"

    def to_json(self) -> list[dict]:
        return [
            {"vars": [[self.token_name(t), e] for t, e in sorted(m.items(), key=lambda te: _tok_sort_key(te[0]))],
             "coef": fmt_q(c)}
            for m, c in self.sorted_terms()
        ]


def _sum_polys(pieces: list[Poly], start: Poly) -> Poly:
    r = dict(start._t)
    for p in pieces:
        for k, c in p._t.items():
            v = r.get(k)
            r[k] = c if v is None else v + c
    return start.__class__({k: c for k, c in r.items() if c}, _clean=True)


def poly_sum(pieces: Iterable[Poly], cls=Poly) -> Poly:
    pieces = list(pieces)
    if not pieces:
        return cls()
    return _sum_polys(pieces, pieces[0].__class__())


# ---------------------------------------------------------------------------
# differential polynomials

EPS = "eps"
S2 = "s2"


class JetVar(tuple):
    """The jet d_x^k w^alpha, stored as the token ("w", alpha, k)."""

    def __new__(cls, alpha: int, k: int = 0):
        if alpha < 1 or k < 0:
            raise ValueError("invalid jet")
        return tuple.__new__(cls, ("w", alpha, k))

    @property
    def alpha(self) -> int:
        return self[1]

    @property
    def k(self) -> int:
        return self[2]


def _jet_tok(alpha: int, k: int) -> tuple:
    return ("w", alpha, k)


@lru_cache(maxsize=None)
def _slot_info(slot: int):
    """For jet slots: (alpha, k, unit, unit of next jet)."""
    tok = _TOKENS[slot]
    if isinstance(tok, tuple) and len(tok) == 3 and tok[0] == "w":
        return (tok[1], tok[2], 1 << (_BITS * slot), _unit(_jet_tok(tok[1], tok[2] + 1)))
    return None


class DiffPoly(Poly):
    """Differential polynomial in jets w^alpha_k, eps (eps^2 = hbar) and s2 (s2^2 = 2)."""

    __slots__ = ()

    @classmethod
    def w(cls, alpha: int, k: int = 0, coef: object = 1):
        return cls.var(_jet_tok(alpha, k), 1, coef)

    @classmethod
    def eps(cls, power: int = 1):
        return cls.var(EPS, power)

    # -- gradings ----------------------------------------------------------
    def _key_jet_degree(self, key: int) -> int:
        d = 0
        for s, e in _decode(key):
            info = _slot_info(s)
            if info is not None:
                d += info[1] * e
        return d

    def jet_degree_parts(self) -> dict[int, "DiffPoly"]:
        parts: dict[int, dict[int, Rational]] = {}
        for k, c in self._t.items():
            parts.setdefault(self._key_jet_degree(k), {})[k] = c
        return {d: self._new(t) for d, t in parts.items()}

    def truncate_jet(self, cap: int) -> "DiffPoly":
        return self._new({k: c for k, c in self._t.items() if self._key_jet_degree(k) <= cap})

    def min_jet_degree(self) -> int:
        return min((self._key_jet_degree(k) for k in self._t), default=0)

    def max_jet_degree(self) -> int:
        return max((self._key_jet_degree(k) for k in self._t), default=0)

    def weighted_degrees(self, weights: Mapping[int, object]) -> set:
        out = set()
        for mono, _ in self.items():
            d = mpq(0)
            for tok, e in mono.items():
                if isinstance(tok, tuple) and tok[0] == "w":
                    d += (Q(weights[tok[1]]) + tok[2]) * e
            out.add(d)
        return out

    def eps_powers(self) -> set[int]:
        return {m.get(EPS, 0) for m, _ in self.items()}

    def max_order(self, alpha: int | None = None) -> int:
        m = -1
        for k in self._t:
            for s, e in _decode(k):
                info = _slot_info(s)
                if info is not None and (alpha is None or info[0] == alpha):
                    m = max(m, info[1])
        return m

    def jets(self) -> set[tuple[int, int]]:
        out = set()
        for k in self._t:
            for s, _ in _decode(k):
                info = _slot_info(s)
                if info is not None:
                    out.add((info[0], info[1]))
        return out

    # -- derivation --------------------------------------------------------
    def dx(self) -> "DiffPoly":
        """Total x-derivative."""
        r: dict[int, Rational] = {}
        get = r.get
        for k, c in self._t.items():
            for s, e in _decode(k):
                info = _slot_info(s)
                if info is None:
                    continue
                nk = k - info[2] + info[3]
                v = get(nk)
                r[nk] = c * e if v is None else v + c * e
        return self._new({k: c for k, c in r.items() if c})

    def dx_n(self, n: int) -> "DiffPoly":
        f = self
        for _ in range(n):
            f = f.dx()
        return f

    def partial(self, alpha: int, k: int) -> "DiffPoly":
        return self.diff(_jet_tok(alpha, k))

    def integrate_x(self) -> "DiffPoly":
        return integrate_x(self)

    # -- text --------------------------------------------------------------
    def _sort_key(self, mono: dict[object, int]):
        eps = mono.get(EPS, 0)
        s2 = mono.get(S2, 0)
        jets = sorted(((t[1], t[2]), e) for t, e in mono.items() if isinstance(t, tuple) and t[0] == "w")
        others = sorted(((_tok_sort_key(t), e) for t, e in mono.items()
                         if t not in (EPS, S2) and not (isinstance(t, tuple) and t[0] == "w")))
        return (eps, sum(e for _, e in jets), jets, s2, others)

    @staticmethod
    def token_name(tok: object) -> str:
        if isinstance(tok, tuple) and tok[0] == "w":
            return f"w{tok[1]}" if tok[2] == 0 else f"w{tok[1]}_{tok[2]}"
        return Poly.token_name(tok)

    def _mono_str(self, mono: dict[object, int]) -> str:
        parts = []
        eps = mono.get(EPS, 0)
        if eps:
            if eps % 2 == 0:
                g = eps // 2
                parts.append("hbar" if g == 1 else f"hbar^{g}")
            else:
                parts.append("eps" if eps == 1 else f"eps^{eps}")
        s2 = mono.get(S2, 0)
        if s2:
            parts.append("s2" if s2 == 1 else f"s2^{s2}")
        jets = sorted(((t[1], t[2]), e) for t, e in mono.items() if isinstance(t, tuple) and t[0] == "w")
        for (a, k), e in jets:
            name = f"w{a}" if k == 0 else f"w{a}_{k}"
            parts.append(name if e == 1 else f"{name}^{e}")
        for t, e in sorted(((t, e) for t, e in mono.items()
                            if t not in (EPS, S2) and not (isinstance(t, tuple) and t[0] == "w")),
                           key=lambda te: _tok_sort_key(te[0])):
            name = Poly.token_name(t)
            parts.append(name if e == 1 else f"{name}^{e}")
        return " ".join(parts)

    def to_json(self) -> list[dict]:
        out = []
        for mono, c in self.sorted_terms():
            jets = sorted([t[1], t[2], e] for t, e in mono.items() if isinstance(t, tuple) and t[0] == "w")
            entry = {"eps": mono.get(EPS, 0), "jets": jets, "coef": fmt_q(c)}
            if mono.get(S2, 0):
                entry["s2"] = mono[S2]
            out.append(entry)
        return out

    @classmethod
    def from_json(cls, data: list[dict]) -> "DiffPoly":
        terms = {}
        for entry in data:
            pairs = [(EPS, entry.get("eps", 0)), (S2, entry.get("s2", 0))]
            pairs += [(_jet_tok(a, k), e) for a, k, e in entry["jets"]]
            key = _encode(pairs)
            terms[key] = terms.get(key, mpq(0)) + parse_q(entry["coef"])
        return cls(terms)

    @classmethod
    def parse(cls, text: str) -> "DiffPoly":
        """Parse the canonical text form (and simple variants such as ``w1_x``)."""
        return _parse_diffpoly(text, cls)

    # -- deformation -------------------------------------------------------
    def substitute_hbar(self) -> "DiffPoly":
        return substitute_hbar(self)

    def normalize_s2(self) -> "DiffPoly":
        """Reduce s2^2 = 2 so that the s2 exponent is 0 or 1."""
        if S2 not in _SLOT:
            return self
        s = _SLOT[S2]
        u = 1 << (_BITS * s)
        r: dict[int, Rational] = {}
        for k, c in self._t.items():
            e = dict(_decode(k)).get(s, 0)
            if e in (0, 1):
                nk, nc = k, c
            else:
                half = e // 2
                nk = k - 2 * half * u
                nc = c * mpq(2) ** half
            v = r.get(nk)
            r[nk] = nc if v is None else v + nc
        return self._new({k: c for k, c in r.items() if c})


def jet(alpha: int, k: int = 0) -> DiffPoly:
    return DiffPoly.w(alpha, k)


# ---------------------------------------------------------------------------


def substitute_hbar(f: DiffPoly) -> DiffPoly:
    """d_x^k w -> (hbar/2)^{k/2} d_x^k w, i.e. eps^k 2^{-ceil(k/2)} s2^{k mod 2}."""
    eps_u = _unit(EPS)
    s2_u = _unit(S2)
    r: dict[int, Rational] = {}
    for k, c in f._t.items():
        d = f._key_jet_degree(k)
        nk = k + d * eps_u + (d % 2) * s2_u
        nc = c / mpq(2) ** ((d + 1) // 2)
        v = r.get(nk)
        r[nk] = nc if v is None else v + nc
    return DiffPoly({k: c for k, c in r.items() if c}, _clean=True).normalize_s2()


def rescale_flow(f: DiffPoly) -> DiffPoly:
    """Apply both substitutions to a flow right-hand side and divide by (hbar/2)^{1/2}.

    The result must have even eps powers and no s2; this is asserted.
    """
    g = substitute_hbar(f)
    # divide by (hbar/2)^{1/2} = eps / s2  ->  multiply by s2 * eps^{-1}
    g = (g * DiffPoly.monomial([(S2, 1), (EPS, -1)])).normalize_s2()
    check_exportable(g)
    return g


def check_exportable(f: DiffPoly) -> None:
    for mono, _ in f.items():
        if mono.get(EPS, 0) % 2 or mono.get(S2, 0):
            raise ValueError("result has odd eps power or a residual s2 factor")


def hbar_strata(f: DiffPoly) -> dict[int, DiffPoly]:
    """Split an exportable polynomial into its hbar^g parts (eps removed)."""
    check_exportable(f)
    out: dict[int, dict[int, Rational]] = {}
    eps_u = _unit(EPS)
    for k, c in f._t.items():
        e = dict(_decode(k)).get(_SLOT[EPS], 0) if EPS in _SLOT else 0
        out.setdefault(e // 2, {})[k - e * eps_u] = c
    return {g: DiffPoly(t, _clean=True) for g, t in sorted(out.items())}


def prolong(f: DiffPoly, flow: Mapping[int, DiffPoly]) -> DiffPoly:
    """Chain rule  sum_{alpha,k} df/d(w^alpha_k) * d_x^k(flow[alpha])."""
    jets = f.jets()
    if not jets:
        return DiffPoly()
    cache: dict[tuple[int, int], DiffPoly] = {}

    def dflow(a, k):
        v = cache.get((a, k))
        if v is None:
            if a not in flow:
                raise KeyError(f"flow does not provide w{a}")
            v = flow[a] if k == 0 else dflow(a, k - 1).dx()
            cache[(a, k)] = v
        return v

    pieces = []
    for a, k in sorted(jets):
        if a not in flow:
            raise KeyError(f"flow does not provide w{a}")
        pf = f.partial(a, k)
        if pf and dflow(a, k):
            pieces.append(pf * dflow(a, k))
    return poly_sum(pieces, DiffPoly) if pieces else DiffPoly()


def integrate_x(f: DiffPoly) -> DiffPoly:
    """Return g with d_x g = f and no jet-free constant term, or raise NotExact.

    Leading-jet reduction: the highest jet w^a_n occurring in an exact f
    enters linearly, f = A w^a_n + B with A, B free of w^a_n and A free of
    jets of order n.  Then f - d_x(G) with G = int A dw^a_{n-1} has a lower
    leading jet.  Jet-free monomials (eps, constants) are not exact.
    """
    if not f:
        return DiffPoly()
    g_parts: list[DiffPoly] = []
    rem = f
    guard = 0
    while rem:
        guard += 1
        if guard > 10000:
            raise NotExact("integration did not terminate")
        # leading jet by (order, alpha)
        lead = None
        for k in rem._t:
            for s, e in _decode(k):
                info = _slot_info(s)
                if info is None:
                    continue
                cand = (info[1], info[0])
                if lead is None or cand > lead:
                    lead = cand
        if lead is None or lead[0] == 0:
            raise NotExact("not a total x-derivative")
        n, a = lead
        tok = _jet_tok(a, n)
        s_lead = _SLOT[tok]
        # the part containing w^a_n must be linear in it
        A_terms: dict[int, Rational] = {}
        u = 1 << (_BITS * s_lead)
        for k, c in rem._t.items():
            e = 0
            for s, ee in _decode(k):
                if s == s_lead:
                    e = ee
                    break
            if e > 1:
                raise NotExact("not a total x-derivative")
            if e == 1:
                A_terms[k - u] = c
        A = DiffPoly(A_terms, _clean=True)
        # an exact f is jointly linear in its top-order jets
        if A.max_order() >= n:
            raise NotExact("not a total x-derivative")
        prev = _jet_tok(a, n - 1)
        G = _antiderivative(A, prev)
        if G is None:
            raise NotExact("not a total x-derivative")
        g_parts.append(G)
        rem = rem - G.dx()
    g = poly_sum(g_parts, DiffPoly)
    c0 = g.constant_term()
    if c0:
        g = g - c0
    return g


def _antiderivative(A: DiffPoly, tok: tuple) -> DiffPoly | None:
    """Integrate A with respect to the jet ``tok`` (power rule)."""
    s = _slot(tok)
    u = 1 << (_BITS * s)
    r = {}
    for k, c in A._t.items():
        e = 0
        for ss, ee in _decode(k):
            if ss == s:
                e = ee
                break
        if e == -1:
            return None
        r[k + u] = c / (e + 1)
    return DiffPoly(r, _clean=True)


# ---------------------------------------------------------------------------
# parsing of the canonical text form

import re


def _parse_diffpoly(text: str, cls) -> DiffPoly:
    text = text.strip()
    if text in ("", "0"):
        return cls()
    tokens = re.findall(r"[+\-]|[^\s+\-][^+\-]*", text.replace("- ", "-").replace("+ ", "+"))
    result = cls()
    sign = 1
    for tk in tokens:
        tk = tk.strip()
        if tk == "+":
            sign = 1
            continue
        if tk == "-":
            sign = -1
            continue
        coef = mpq(sign)
        pairs: list[tuple[object, int]] = []
        for factor in tk.split():
            base, _, ex = factor.partition("^")
            e = int(ex) if ex else 1
            if re.fullmatch(r"\d+(/\d+)?", base):
                coef *= parse_q(base) ** e
                continue
            if base == "hbar":
                pairs.append((EPS, 2 * e))
            elif base == "eps":
                pairs.append((EPS, e))
            elif base == "s2":
                pairs.append((S2, e))
            else:
                m = re.fullmatch(r"w(\d+)(?:_(x+|\d+))?", base)
                if not m:
                    raise ValueError(f"cannot parse factor {factor!r}")
                a = int(m.group(1))
                kk = m.group(2)
                order = 0 if kk is None else (len(kk) if kk.startswith("x") else int(kk))
                pairs.append((_jet_tok(a, order), e))
        merged: dict[object, int] = {}
        for t, e in pairs:
            merged[t] = merged.get(t, 0) + e
        result = result + cls({_encode(merged.items()): coef})
        sign = 1
    return result
