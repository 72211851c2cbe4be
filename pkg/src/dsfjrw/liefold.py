"""Matrix-level Drinfeld-Sokolov data for D4 (and the sigma-data of E6 and A_{2n-1}).

Finite-dimensional matrices are exact sympy matrices.  The loop algebra
L(o(8)) + C K is handled through structure constants in a Chevalley basis:
an element is a dict (k, a) -> coefficient meaning coef * lambda^k B_a, and
brackets carry the cocycle Res_{lambda=0} (X'(lambda) | Y(lambda)) K.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import sympy as sp

from .corering import DiffPoly, NotExact, Q, Rational, poly_sum

__all__ = [
    "SigmaMismatch",
    "FoldingMismatch",
    "DegenerateSlice",
    "SplitFailure",
    "Mismatch",
    "OMEGA",
    "reduce_omega",
    "LieRealization",
    "build_d4",
    "build_e6",
    "build_a",
    "verify_sigma_e6",
    "verify_folding",
    "LoopAlgebra",
    "d4_loop",
    "heisenberg_basis",
    "dressing",
    "matrix_densities",
    "matrix_vs_scalar",
    "parity_check",
    "d4_checks",
]


class SigmaMismatch(AssertionError):
    pass


class FoldingMismatch(AssertionError):
    pass


class DegenerateSlice(ValueError):
    pass


class SplitFailure(ValueError):
    pass


class Mismatch(AssertionError):
    pass


OMEGA = sp.Symbol("omega")


def reduce_omega(M):
    """Reduce a matrix/expression polynomial in omega modulo omega^2 + omega + 1."""
    def red(e):
        e = sp.expand(e)
        if e.has(OMEGA):
            return sp.expand(sp.rem(e, OMEGA ** 2 + OMEGA + 1, OMEGA))
        return e
    if isinstance(M, sp.MatrixBase):
        return M.applyfunc(red)
    return red(M)


def _e(i: int, j: int, n: int) -> sp.Matrix:
    M = sp.zeros(n, n)
    M[i - 1, j - 1] = 1
    return M


def br(A, B):
    return A * B - B * A


def _is_zero(M) -> bool:
    return all(x == 0 for x in reduce_omega(M))


def _first_entry(M) -> object:
    """First nonzero entry of the first nonzero column."""
    n = M.shape[0]
    for j in range(n):
        for i in range(n):
            if M[i, j] != 0:
                return M[i, j]
    raise ValueError("zero matrix")


@dataclass
class LieRealization:
    """A matrix realization generated by Weyl generators E_i, F_i.

    ``words`` records each named element as a bracket word in the generators,
    so that a diagram automorphism can be applied by permuting generator
    labels.
    """

    n: int
    E: dict[int, sp.Matrix]
    F: dict[int, sp.Matrix]
    words: dict[str, tuple] = field(default_factory=dict)
    scales: dict[str, object] = field(default_factory=dict)
    mats: dict[str, sp.Matrix] = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return len(self.E)

    def H(self, i: int) -> sp.Matrix:
        return br(self.E[i], self.F[i])

    def eval_word(self, word, perm=None) -> sp.Matrix:
        if isinstance(word[0], str):
            kind, i = word
            i = perm.get(i, i) if perm else i
            if kind == "E":
                return self.E[i]
            if kind == "F":
                return self.F[i]
            return self.H(i)
        return br(self.eval_word(word[0], perm), self.eval_word(word[1], perm))

    def define(self, name: str, word, scale=1) -> sp.Matrix:
        self.words[name] = word
        self.scales[name] = scale
        M = self.eval_word(word) * scale
        self.mats[name] = M
        return M

    def get(self, name: str) -> sp.Matrix:
        if name in self.mats:
            return self.mats[name]
        kind, i = name[0], int(name[1:])
        return self.eval_word((kind, i))

    def sigma(self, combo: dict[str, object], perm: dict[int, int]) -> sp.Matrix:
        """Apply the automorphism induced by a generator permutation to sum c * name."""
        out = sp.zeros(self.n, self.n)
        for name, c in combo.items():
            if name in self.words:
                out += c * self.scales[name] * self.eval_word(self.words[name], perm)
            else:
                kind, i = name[0], int(name[1:])
                out += c * self.eval_word((kind, i), perm)
        return out

    def combo(self, combo: dict[str, object]) -> sp.Matrix:
        out = sp.zeros(self.n, self.n)
        for name, c in combo.items():
            out += c * self.get(name)
        return out

    def cartan(self) -> list[list[int]]:
        """a_ij = alpha_j(H_i) from [H_i, E_j] = a_ij E_j."""
        out = []
        for i in sorted(self.E):
            row = []
            for j in sorted(self.E):
                Z = br(self.H(i), self.E[j])
                Ej = self.E[j]
                idx = next(k for k in range(self.n * self.n) if Ej[k] != 0)
                row.append(Z[idx] / Ej[idx])
            out.append(row)
        return out

    def root_vectors(self, sign: str = "F") -> dict[tuple, str]:
        """Negative (F) or positive (E) root vectors by breadth-first bracketing.

        Each root vector is normalized so that the first nonzero entry of its
        first nonzero column is 1.  Returns root -> name.
        """
        gens = self.F if sign == "F" else self.E
        r = self.rank
        found: dict[tuple, str] = {}
        frontier = []
        for i in sorted(gens):
            root = tuple(1 if k == i else 0 for k in range(1, r + 1))
            name = f"{sign}_{''.join(map(str, root))}"
            self.define(name, (sign, i), 1 / _first_entry(gens[i]))
            found[root] = name
            frontier.append(root)
        while frontier:
            nxt = []
            for root in frontier:
                X = self.mats[found[root]]
                for i in sorted(gens):
                    new = tuple(x + (1 if k == i - 1 else 0) for k, x in enumerate(root))
                    if new in found:
                        continue
                    Z = br(gens[i], X)
                    if _is_zero(Z):
                        continue
                    name = f"{sign}_{''.join(map(str, new))}"
                    word = ((sign, i), self.words[found[root]])
                    raw = self.eval_word(word) * self.scales[found[root]]
                    self.define(name, word, self.scales[found[root]] / _first_entry(raw))
                    found[new] = name
                    nxt.append(new)
            frontier = nxt
        return found


# ---------------------------------------------------------------------------
# D4


def _sec_transpose(A: sp.Matrix) -> sp.Matrix:
    n = A.shape[0]
    return sp.Matrix(n, n, lambda i, j: A[n - 1 - j, n - 1 - i])


D4_S = sp.diag(1, -1, 1, -1, -1, 1, -1, 1)

# Chevalley words: K_5 = [K_1, K_2], ...
D4_CHEVALLEY = {5: (1, 2), 6: (3, 2), 7: (4, 2), 8: (5, 3), 9: (6, 4), 10: (7, 1), 11: (1, 9), 12: (11, 2)}
D4_ALTERNATES = {8: [(6, 1)], 9: [(7, 3)], 10: [(5, 4)], 11: [(3, 10), (4, 8)], 12: [(5, 9), (6, 10), (7, 8)]}
D4_EXPONENTS = {1: 1, 2: 3, 3: 3, 4: 5}
SIGMA1 = {3: 4, 4: 3}
SIGMA4 = {1: 3, 3: 4, 4: 1}


def in_o8(A: sp.Matrix) -> bool:
    return _is_zero(A + D4_S * _sec_transpose(A) * D4_S.inv())


@lru_cache(maxsize=None)
def build_d4() -> dict:
    """Generators, Chevalley basis, sl2 triple, lowest weight vectors and Lambda."""
    n = 8
    E, F = {}, {}
    for i in (1, 2, 3):
        E[i] = _e(i + 1, i, n) + _e(9 - i, 8 - i, n)
        F[i] = _e(i, i + 1, n) + _e(8 - i, 9 - i, n)
    E[4] = (_e(5, 3, n) + _e(6, 4, n)) / 2
    F[4] = 2 * (_e(3, 5, n) + _e(4, 6, n))
    R = LieRealization(n, E, F)
    for kind in ("E", "F"):
        for i in (1, 2, 3, 4):
            R.define(f"{kind}{i}", (kind, i))
        for k, (a, b) in D4_CHEVALLEY.items():
            R.define(f"{kind}{k}", (R.words[f"{kind}{a}"], R.words[f"{kind}{b}"]))
    for i in (1, 2, 3, 4):
        R.define(f"H{i}", ("H", i))
    Hdef = {}
    for i in (1, 2, 3):
        Hdef[i] = -_e(i, i, n) + _e(i + 1, i + 1, n) - _e(8 - i, 8 - i, n) + _e(9 - i, 9 - i, n)
    Hdef[4] = -_e(3, 3, n) - _e(4, 4, n) + _e(5, 5, n) + _e(6, 6, n)
    Ip = R.combo({"E1": 1, "E2": 1, "E3": 1, "E4": 1})
    two_rho = R.combo({"H1": 6, "H2": 10, "H3": 6, "H4": 6})
    Im = R.combo({"F1": 6, "F2": 10, "F3": 6, "F4": 6})
    gammas = {
        1: {"F1": 3, "F2": 5, "F3": 3, "F4": 3},
        2: {"F8": 1, "F10": 1, "F9": -2},
        3: {"F8": 1, "F10": -1},
        4: {"F12": 1},
    }
    gammas_g2 = {
        1: gammas[1],
        2: {"F8": 1, "F9": OMEGA, "F10": OMEGA ** 2},
        3: {"F8": 1, "F9": OMEGA ** 2, "F10": OMEGA},
        4: gammas[4],
    }
    lam = sp.Symbol("lambda")
    Lambda = Ip - lam * R.get("F12")
    return {
        "R": R, "H_given": Hdef, "I+": Ip, "2rho": two_rho, "rho": two_rho / 2, "I-": Im,
        "gammas": gammas, "gammas_g2": gammas_g2, "lambda": lam, "Lambda": Lambda,
        "E0": -R.get("F12"), "F0": -R.get("E12"),
    }


def d4_checks() -> dict[str, bool]:
    """Exact sanity relations of the D4 realization."""
    d = build_d4()
    R = d["R"]
    out = {}
    out["H_i = [E_i, F_i]"] = all(_is_zero(R.H(i) - d["H_given"][i]) for i in (1, 2, 3, 4))
    out["chevalley alternates"] = all(
        _is_zero(br(R.get(f"{K}{a}"), R.get(f"{K}{b}")) - R.get(f"{K}{k}"))
        for K in ("E", "F") for k, alts in D4_ALTERNATES.items() for a, b in alts)
    out["o(8)"] = all(in_o8(M) for M in R.mats.values())
    rho, Ip, Im = d["rho"], d["I+"], d["I-"]
    out["[rho, I+-] = +-I+-"] = _is_zero(br(rho, Ip) - Ip) and _is_zero(br(rho, Im) + Im)
    out["[I+, I-] = 2 rho"] = _is_zero(br(Ip, Im) - d["2rho"])
    ok = True
    for i, g in d["gammas"].items():
        G = R.combo(g)
        ok &= _is_zero(br(Im, G)) and _is_zero(br(rho, G) + D4_EXPONENTS[i] * G)
    out["lowest weight gammas"] = ok
    # Chevalley involution and the (E_0|F_0) normalization (trace form / 2)
    E0, F0 = d["E0"], d["F0"]
    out["F0 = -omega(E0)"] = _is_zero(F0 + chevalley_involution(R, {"F12": -1}))
    out["(E0|F0) = 1"] = (E0 * F0).trace() / 2 == 1
    out["(E_i|F_i) = 1"] = all((R.E[i] * R.F[i]).trace() / 2 == 1 for i in (1, 2, 3, 4))
    return out


def chevalley_involution(R: LieRealization, combo: dict[str, object]) -> sp.Matrix:
    """omega(E_i) = -F_i, omega(F_i) = -E_i extended as an automorphism."""
    def ev(word):
        if isinstance(word[0], str):
            kind, i = word
            return -R.F[i] if kind == "E" else (-R.E[i] if kind == "F" else -R.H(i))
        return br(ev(word[0]), ev(word[1]))
    out = sp.zeros(R.n, R.n)
    for name, c in combo.items():
        out += c * R.scales.get(name, 1) * ev(R.words[name])
    return out


# ---------------------------------------------------------------------------
# E6 and A_{2n-1}

E6_ROWS = {
    1: [(6, 7, 1), (8, 9, 1), (10, 11, 1), (12, 14, 1), (15, 17, 1), (26, 27, 1)],
    2: [(4, 5, 1), (6, 8, 1), (7, 9, 1), (18, 20, -1), (21, 22, -1), (23, 24, -1)],
    3: [(4, 6, 1), (5, 8, 1), (11, 13, 1), (14, 16, 1), (17, 19, 1), (25, 26, 1)],
    4: [(3, 4, 1), (8, 10, -1), (9, 11, -1), (16, 18, -1), (19, 21, -1), (24, 25, 1)],
    5: [(2, 3, 1), (10, 12, -1), (11, 14, -1), (13, 16, -1), (21, 23, 1), (22, 24, 1)],
    6: [(1, 2, 1), (12, 15, 1), (14, 17, 1), (16, 19, 1), (18, 21, 1), (20, 22, 1)],
}
E6_SIGMA = {1: 6, 6: 1, 3: 5, 5: 3}
E6_EXPONENTS = {1: 1, 2: 4, 3: 5, 4: 7, 5: 8, 6: 11}
E6_GAMMA_SIGNS = {1: 1, 2: -1, 3: 1, 4: 1, 5: -1, 6: 1}
_R = sp.Rational
E6_GAMMAS = {
    1: {"F_100000": 1, "F_000001": 1, "F_001000": _R(15, 8), "F_000010": _R(15, 8),
        "F_010000": _R(11, 8), "F_000100": _R(21, 8)},
    2: {"F_111100": 1, "F_010111": -1, "F_101110": _R(15, 11), "F_001111": _R(15, 11)},
    3: {"F_111110": 1, "F_011111": -1, "F_101111": _R(16, 11), "F_011210": _R(21, 8)},
    4: {"F_112210": 1, "F_011221": 1, "F_111211": _R(8, 15)},
    5: {"F_112211": 1, "F_111221": 1},
    6: {"F_122321": 1},
}


@lru_cache(maxsize=None)
def build_e6() -> dict:
    n = 27
    E = {i: sum((c * _e(a, b, n) for a, b, c in rows), sp.zeros(n, n)) for i, rows in E6_ROWS.items()}
    F = {i: M.T for i, M in E.items()}
    R = LieRealization(n, E, F)
    roots = R.root_vectors("F")
    rho = R.combo({"H1": 8, "H2": 11, "H3": 15, "H4": 21, "H5": 15, "H6": 8})
    Ip = sum(E.values(), sp.zeros(n, n))
    Im = R.combo({"F1": 16, "F2": 22, "F3": 30, "F4": 42, "F5": 30, "F6": 16})
    return {"R": R, "roots": roots, "rho": rho, "I+": Ip, "I-": Im, "gammas": E6_GAMMAS}


def verify_sigma_e6() -> dict[str, bool]:
    d = build_e6()
    R = d["R"]
    out = {"78 = 6 + 2 * 36": len(d["roots"]) == 36}
    out["sigma(I+) = I+"] = _is_zero(R.sigma({f"E{i}": 1 for i in range(1, 7)}, E6_SIGMA) - d["I+"])
    out["sigma(rho) = rho"] = _is_zero(R.sigma({"H1": 8, "H2": 11, "H3": 15, "H4": 21, "H5": 15, "H6": 8}, E6_SIGMA)
                                       - d["rho"])
    for i, g in d["gammas"].items():
        G = R.combo(g)
        low = _is_zero(br(d["I-"], G))
        grade = _is_zero(br(d["rho"], G) + E6_EXPONENTS[i] * G)
        sig = _is_zero(R.sigma(g, E6_SIGMA) - E6_GAMMA_SIGNS[i] * G)
        out[f"gamma_{i}: lowest weight"] = low and grade
        out[f"gamma_{i}: sigma sign {E6_GAMMA_SIGNS[i]:+d}"] = sig
    return out


def build_a(n: int) -> dict:
    """sl(2n) with E_i = e_{i,i+1}; the diagram flip i -> 2n - i."""
    N = 2 * n
    E = {i: _e(i, i + 1, N) for i in range(1, N)}
    F = {i: _e(i + 1, i, N) for i in range(1, N)}
    R = LieRealization(N, E, F)
    for i in range(1, N):
        R.define(f"E{i}", ("E", i))
        R.define(f"F{i}", ("F", i))
        R.define(f"H{i}", ("H", i))
    return {"R": R, "sigma": {i: N - i for i in range(1, N)}}


def _rho_from_cartan(R: LieRealization, Es, Fs, Hs):
    """rho = sum x_i H_i, I- = sum 2 x_i F_i with sum_i x_i a_ij = 1."""
    r = len(Es)
    A = sp.zeros(r, r)
    for i in range(r):
        for j in range(r):
            Z = br(Hs[i], Es[j])
            idx = next(k for k in range(R.n * R.n) if Es[j][k] != 0)
            A[i, j] = Z[idx] / Es[j][idx]
    x = A.T.solve(sp.ones(r, 1))
    rho = sum((x[i] * Hs[i] for i in range(r)), sp.zeros(R.n, R.n))
    Im = sum((2 * x[i] * Fs[i] for i in range(r)), sp.zeros(R.n, R.n))
    return rho, Im, A


def verify_folding(case: str) -> dict[str, bool]:
    """Eigenvalues of the folding automorphism on the lowest weight vectors, and
    the fixed-subalgebra gauge built from folded Weyl generators."""
    case = case.lower()
    out: dict[str, bool] = {}
    if case in ("d4-b3", "d4-g2"):
        d = build_d4()
        R = d["R"]
        perm = SIGMA1 if case == "d4-b3" else SIGMA4
        gam = d["gammas"] if case == "d4-b3" else d["gammas_g2"]
        z = {1: 1, 2: 1, 3: -1, 4: 1} if case == "d4-b3" else {1: 1, 2: OMEGA ** 2, 3: OMEGA, 4: 1}
        if case == "d4-b3":
            groups = [[1], [2], [3, 4]]
        else:
            groups = [[1, 3, 4], [2]]
        Ip, rho, Im = d["I+"], d["rho"], d["I-"]
        exps = D4_EXPONENTS
    elif case == "e6":
        d = build_e6()
        R = d["R"]
        perm = E6_SIGMA
        gam = d["gammas"]
        z = E6_GAMMA_SIGNS
        groups = [[1, 6], [3, 5], [2], [4]]
        Ip, rho, Im = d["I+"], d["rho"], d["I-"]
        exps = E6_EXPONENTS
    elif case.startswith("a"):
        n = int(case[1:]) if len(case) > 1 else 2
        d = build_a(n)
        R = d["R"]
        perm = d["sigma"]
        N = 2 * n
        Es = [R.E[i] for i in range(1, N)]
        Fs = [R.F[i] for i in range(1, N)]
        Hs = [R.H(i) for i in range(1, N)]
        rho, Im, _ = _rho_from_cartan(R, Es, Fs, Hs)
        Ip = sum(Es, sp.zeros(N, N))
        # lowest weight vectors: I_-^m (traceless automatically for m >= 1)
        gam_m = {m: Im ** m for m in range(1, N)}
        z = {m: (-1) ** (m - 1) for m in range(1, N)}
        groups = [[i, N - i] for i in range(1, n)] + [[n]]
        exps = {m: m for m in range(1, N)}
        out["flip matches E_i -> E_(2n-i)"] = all(
            _is_zero(_sigma_matrix_a(R, R.E[i], perm) - R.E[perm[i]]) for i in range(1, N))
        out["gamma lowest weight"] = all(_is_zero(br(Im, G)) and _is_zero(br(rho, G) + m * G)
                                         for m, G in gam_m.items())
        out["sigma(I+-) = I+-, sigma(rho) = rho"] = (
            _is_zero(_sigma_matrix_a(R, Ip, perm) - Ip) and _is_zero(_sigma_matrix_a(R, Im, perm) - Im)
            and _is_zero(_sigma_matrix_a(R, rho, perm) - rho))
        out["eigenvalues (-1)^(m-1)"] = all(_is_zero(_sigma_matrix_a(R, G, perm) - z[m] * G)
                                            for m, G in gam_m.items())
        fixed = [m for m in z if z[m] == 1]
        out.update(_folded_gauge(R, groups, rho, Im, {m: gam_m[m] for m in fixed}, exps))
        return out
    else:
        raise ValueError(f"unknown folding case {case!r}")
    gen_names = [f"E{i}" for i in sorted(R.E)]
    out["sigma(I+) = I+"] = _is_zero(R.sigma({nm: 1 for nm in gen_names}, perm) - Ip)
    rho_combo = _as_h_combo(R, rho)
    out["sigma(rho) = rho"] = _is_zero(R.sigma(rho_combo, perm) - rho)
    for i, g in gam.items():
        G = R.combo(g)
        out[f"sigma(gamma_{i}) = {z[i]} gamma_{i}"] = _is_zero(R.sigma(g, perm) - z[i] * G)
    fixed = {i: R.combo(gam[i]) for i in gam if z[i] == 1}
    out.update(_folded_gauge(R, groups, rho, Im, fixed, exps))
    return out


def _sigma_matrix_a(R: LieRealization, X: sp.Matrix, perm) -> sp.Matrix:
    """The sl(N) diagram flip: X -> -J X^T J^{-1}, J antidiagonal with alternating signs.

    It agrees with the generator permutation E_i -> E_{N-i} (checked on generators)."""
    N = R.n
    J = sp.zeros(N, N)
    for i in range(N):
        J[i, N - 1 - i] = (-1) ** i
    return -J * X.T * J.inv()


def _as_h_combo(R: LieRealization, D: sp.Matrix) -> dict[str, object]:
    r = R.rank
    Hs = [R.H(i) for i in sorted(R.E)]
    A = sp.Matrix([[Hs[j][k, k] for j in range(r)] for k in range(R.n)])
    x = A.solve_least_squares(sp.Matrix([D[k, k] for k in range(R.n)]))
    return {f"H{i}": x[idx] for idx, i in enumerate(sorted(R.E))}


def _folded_gauge(R, groups, rho, Im, fixed: dict, exps: dict) -> dict[str, bool]:
    Es = [sum((R.E[i] for i in g), sp.zeros(R.n, R.n)) for g in groups]
    Fs = [sum((R.F[i] for i in g), sp.zeros(R.n, R.n)) for g in groups]
    Hs = [br(Es[k], Fs[k]) for k in range(len(groups))]
    rho_s, Im_s, _ = _rho_from_cartan(R, Es, Fs, Hs)
    out = {
        "folded rho = rho": _is_zero(rho_s - rho),
        "folded I- = I-": _is_zero(Im_s - Im),
        "fixed gammas are folded lowest weight": all(
            _is_zero(br(Im_s, G)) and _is_zero(br(rho_s, G) + exps[i] * G) for i, G in fixed.items()),
        "fixed count = folded rank": len(fixed) == len(groups),
    }
    return out


# ---------------------------------------------------------------------------
# the loop algebra of o(8)


def _to_q(x) -> Rational:
    x = sp.Rational(x)
    return Q(int(x.p), int(x.q))


class LoopAlgebra:
    """L(g) + C K for a matrix realization given by a Chevalley basis.

    ``h`` is the principal degree of lambda.  The invariant form is
    (A|B) = tr(AB) / 2, for which (E_i|F_i) = 1.
    """

    def __init__(self, names: list[str], mats: list[sp.Matrix], rho: sp.Matrix, h: int):
        self.names = names
        self.mats = mats
        self.h = h
        self.dim = len(mats)
        n = mats[0].shape[0]
        B = sp.Matrix([[M[k] for M in mats] for k in range(n * n)])
        self._proj = (B.T * B).inv() * B.T
        self.deg = []
        for M in mats:
            Z = br(rho, M)
            c = self.coords(Z)
            idx = [k for k, v in enumerate(c) if v != 0]
            d = c[idx[0]] / self.coords(M)[idx[0]] if idx else Q(0)
            self.deg.append(int(d))
        self.struct: dict[tuple[int, int], list[tuple[int, Rational]]] = {}
        self.form: dict[tuple[int, int], Rational] = {}
        for a in range(self.dim):
            for b in range(self.dim):
                c = self.coords(br(mats[a], mats[b]))
                nz = [(k, v) for k, v in enumerate(c) if v]
                if nz:
                    self.struct[(a, b)] = nz
                f = _to_q((mats[a] * mats[b]).trace() / 2)
                if f:
                    self.form[(a, b)] = f
        self._slices: dict[int, list[tuple[int, int]]] = {}

    def coords(self, M: sp.Matrix) -> list[Rational]:
        v = self._proj * sp.Matrix(list(M))
        rec = sum((v[k] * self.mats[k] for k in range(self.dim)), sp.zeros(*M.shape))
        if not _is_zero(rec - M):
            raise ValueError("matrix is outside the algebra")
        return [_to_q(x) for x in v]

    def from_lambda_matrix(self, M: sp.Matrix, lam: sp.Symbol) -> dict:
        M = M.applyfunc(sp.expand)
        out = {}
        powers = set()
        for x in M:
            if x != 0:
                powers |= set(sp.Poly(x, lam).as_dict().keys()) if x.has(lam) else {(0,)}
        for (k,) in powers:
            Mk = M.applyfunc(lambda e: sp.Poly(e, lam).coeff_monomial(lam ** k))
            for a, c in enumerate(self.coords(Mk)):
                if c:
                    out[(k, a)] = c
        return out

    def degree(self, key: tuple[int, int]) -> int:
        k, a = key
        return self.h * k + self.deg[a]

    def slice(self, d: int) -> list[tuple[int, int]]:
        if d not in self._slices:
            out = []
            for a in range(self.dim):
                if (d - self.deg[a]) % self.h == 0:
                    out.append(((d - self.deg[a]) // self.h, a))
            self._slices[d] = out
        return self._slices[d]

    def bracket(self, X: dict, Y: dict, dmin: int | None = None):
        """([X, Y] in L(g), central coefficient)."""
        acc: dict[tuple[int, int], list] = {}
        central = []
        for (k, a), x in X.items():
            dx_ = self.h * k + self.deg[a]
            for (l, b), y in Y.items():
                if dmin is not None and dx_ + self.h * l + self.deg[b] < dmin:
                    continue
                xy = x * y
                for c, s in self.struct.get((a, b), ()):
                    acc.setdefault((k + l, c), []).append(xy * s if not isinstance(xy, DiffPoly) else xy.scale(s))
                if k + l == 0 and k != 0:
                    f = self.form.get((a, b))
                    if f:
                        central.append(xy.scale(k * f) if isinstance(xy, DiffPoly) else xy * k * f)
        out = {}
        for key, lst in acc.items():
            s = _sum(lst)
            if s:
                out[key] = s
        return out, _sum(central)

    def pair(self, X: dict, Y: dict):
        """Res_lambda lambda^{-1} (X | Y)."""
        acc = []
        for (k, a), x in X.items():
            for (l, b), y in Y.items():
                if k + l == 0:
                    f = self.form.get((a, b))
                    if f:
                        acc.append(x * y * f if not isinstance(x * y, DiffPoly) else (x * y).scale(f))
        return _sum(acc)

    def to_vector(self, X: dict, d: int) -> list:
        return [X.get(key, 0) for key in self.slice(d)]

    def from_vector(self, v, d: int) -> dict:
        return {key: c for key, c in zip(self.slice(d), v) if c}

    def ad_matrix(self, X: dict, d: int, dX: int) -> sp.Matrix:
        """Matrix of ad_X from slice d to slice d + dX (rational X)."""
        src = self.slice(d)
        dst = self.slice(d + dX)
        index = {key: i for i, key in enumerate(dst)}
        M = sp.zeros(len(dst), len(src))
        for j, key in enumerate(src):
            Z, _ = self.bracket(X, {key: Q(1)})
            for k2, c in Z.items():
                M[index[k2], j] = sp.Rational(int(c.numerator), int(c.denominator))
        return M


def _sum(lst):
    if not lst:
        return 0
    if any(isinstance(x, DiffPoly) for x in lst):
        return poly_sum([x if isinstance(x, DiffPoly) else DiffPoly.const(x) for x in lst], DiffPoly)
    s = Q(0)
    for x in lst:
        s += x
    return s


def _trim(X: dict, dmin: int, alg: LoopAlgebra) -> dict:
    return {k: v for k, v in X.items() if v and alg.degree(k) >= dmin}


def _add(X: dict, Y: dict, c=1) -> dict:
    out = dict(X)
    for k, v in Y.items():
        term = v if c == 1 else (v.scale(c) if isinstance(v, DiffPoly) else v * c)
        out[k] = out[k] + term if k in out else term
        if not out[k]:
            del out[k]
    return out


def _scale(X: dict, c) -> dict:
    return {k: (v.scale(c) if isinstance(v, DiffPoly) else v * c) for k, v in X.items()}


@lru_cache(maxsize=None)
def d4_loop() -> tuple:
    d = build_d4()
    R = d["R"]
    names = [f"E{i}" for i in range(1, 13)] + [f"H{i}" for i in range(1, 5)] + [f"F{i}" for i in range(1, 13)]
    mats = [R.get(nm) for nm in names]
    alg = LoopAlgebra(names, mats, d["rho"], 6)
    Lam = alg.from_lambda_matrix(d["Lambda"], d["lambda"])
    return alg, Lam


def _sigma_on_basis(alg: LoopAlgebra, perm) -> sp.Matrix:
    R = build_d4()["R"]
    cols = []
    for nm in alg.names:
        cols.append(alg.coords(R.sigma({nm: 1}, perm)))
    return sp.Matrix([[sp.Rational(int(c.numerator), int(c.denominator)) for c in col] for col in cols]).T


@dataclass
class Heisenberg:
    alg: LoopAlgebra
    Lam: dict
    pos: dict[int, list[dict]]
    neg: dict[int, list[dict]]
    parity: dict[int, list[int]]  # sigma_1 eigenvalue of each basis vector


def heisenberg_basis(N: int) -> Heisenberg:
    """Lambda_j for 1 <= |j| <= N in ker ad_Lambda, sigma_1-eigenvectors, with
    the negative ones dual to the positive ones: [Lambda_j, Lambda_{-j}] = j K."""
    alg, Lam = d4_loop()
    d = build_d4()
    lam = d["lambda"]
    sig = _sigma_on_basis(alg, SIGMA1)
    pos: dict[int, list[dict]] = {}
    neg: dict[int, list[dict]] = {}
    parity: dict[int, list[int]] = {}

    def sig_slice(deg):
        keys = alg.slice(deg)
        index = {key: i for i, key in enumerate(keys)}
        S = sp.zeros(len(keys), len(keys))
        for j, (k, a) in enumerate(keys):
            for i, (k2, b) in enumerate(keys):
                if k2 == k:
                    S[i, j] = sig[b, a]
        return S

    for j in range(1, N + 1):
        for sgn in (1, -1):
            deg = sgn * j
            M = alg.ad_matrix(Lam, deg, 1)
            ker = M.nullspace()
            if not ker:
                continue
            expected = 2 if j % 6 == 3 else (1 if j % 2 == 1 else 0)
            if len(ker) != expected:
                raise DegenerateSlice(f"ker ad_Lambda at degree {deg} has dimension {len(ker)}")
            S = sig_slice(deg)
            basis = []
            par = []
            for ev in (1, -1):
                K = sp.Matrix.hstack(*ker)
                sub = (S * K - ev * K).nullspace()
                for c in sub:
                    basis.append(K * c)
                    par.append(ev)
            if sgn == 1:
                vecs = []
                for v, ev in zip(basis, par):
                    if ev == 1:
                        P = alg.from_lambda_matrix((d["Lambda"] ** j).applyfunc(sp.expand), lam)
                        vecs.append(P)
                    else:
                        vecs.append(alg.from_vector([_to_q(x) for x in v], deg))
                pos[j] = vecs
                parity[j] = par
            else:
                neg[j] = [alg.from_vector([_to_q(x) for x in v], deg) for v in basis]
    for j in list(neg):
        if j not in pos:
            continue
        G = sp.zeros(len(pos[j]), len(neg[j]))
        for a, P in enumerate(pos[j]):
            for b, Nv in enumerate(neg[j]):
                _, c = alg.bracket(P, Nv)
                G[a, b] = sp.Rational(int(c.numerator), int(c.denominator)) if c else 0
        if G.det() == 0:
            raise DegenerateSlice(f"pairing of degrees {j} and {-j} is degenerate")
        C = G.inv() * j
        dual = []
        for b in range(len(pos[j])):
            acc = {}
            for a in range(len(neg[j])):
                coef = _to_q(C[a, b])
                if coef:
                    acc = _add(acc, _scale(neg[j][a], coef))
            dual.append(acc)
        neg[j] = dual
    return Heisenberg(alg, Lam, pos, neg, parity)


@dataclass
class Dressing:
    U: dict
    H: dict
    N: int
    heis: Heisenberg


def _u(i: int) -> DiffPoly:
    return DiffPoly.w(i)


def _dx(X: dict) -> dict:
    out = {}
    for k, v in X.items():
        if isinstance(v, DiffPoly):
            dv = v.dx()
            if dv:
                out[k] = dv
    return out


def _exp_ad(alg, U: dict, Y: dict, sign: int, dmin: int):
    """e^{sign ad_U} Y truncated at degree dmin, with the accumulated central term."""
    total = dict(Y)
    central = []
    term = Y
    n = 0
    while term:
        n += 1
        term, c = alg.bracket(U, term, dmin)
        term = _scale(term, Q(sign, n))
        if c:
            central.append(c.scale(Q(sign, n)) if isinstance(c, DiffPoly) else c * Q(sign, n))
        term = _trim(term, dmin, alg)
        total = _add(total, term)
    return total, _sum(central)


def dressing(N: int, q: dict | None = None, twist: int = 0) -> Dressing:
    """U, H with e^{-ad U}(d/dx + Lambda + q) = d/dx + Lambda + H up to degree -N.

    q defaults to sum u^i gamma_i.  The kernel part of U is fixed by requiring
    the central term of e^{ad U}(Lambda_j) to vanish.  ``twist``
    adds fixed multiples of ker ad_Lambda to the complement basis; H and U do
    not depend on it.
    """
    heis = heisenberg_basis(N + 1)
    alg, Lam = heis.alg, heis.Lam
    d = build_d4()
    R = d["R"]
    if q is None:
        q = {}
        for i, g in d["gammas"].items():
            for key, c in alg.from_lambda_matrix(R.combo(g), d["lambda"]).items():
                q = _add(q, {key: _u(i).scale(c)})
    U: dict = {}
    H: dict = {}
    for k in range(1, N + 1):
        # kernel component of U_{-k} from the central condition
        if k in heis.pos:
            # c = rest + omega(X, Lambda_{k,a}) and omega(Lambda_{-k,b}, Lambda_{k,a}) = -k delta_ab
            fix = {}
            for a, P in enumerate(heis.pos[k]):
                _, c = _exp_ad(alg, U, P, 1, 0)
                if c:
                    c = c if isinstance(c, DiffPoly) else DiffPoly.const(c)
                    fix = _add(fix, {key: c.scale(v / k) for key, v in heis.neg[k][a].items()})
            U = _add(U, fix)
        # degree -k component of e^{-ad U}(d/dx + Lambda + q)
        dmin = -k
        conj, _ = _exp_ad(alg, U, _add(Lam, q), -1, dmin)
        A = _dx(U)
        n = 1
        acc = _scale(A, Q(1))
        while A:
            A, _ = alg.bracket(U, A, dmin)
            A = _trim(A, dmin, alg)
            n += 1
            fac = Q((-1) ** (n + 1))
            for j in range(2, n + 1):
                fac /= j
            acc = _add(acc, _scale(A, fac))
        conj = _add(conj, acc)
        C = {key: v for key, v in conj.items() if alg.degree(key) == -k}
        # split C = [Lambda, Y] + kernel part
        Mprev = alg.ad_matrix(Lam, -k - 1, 1)
        kerprev = Mprev.nullspace()
        cols = _complement_columns(Mprev, len(kerprev))
        kerk = alg.ad_matrix(Lam, -k, 1).nullspace()
        B = sp.Matrix.hstack(*([Mprev[:, c] for c in cols] + kerk)) if (cols or kerk) else sp.zeros(len(alg.slice(-k)), 0)
        if B.shape[0] != B.shape[1] or (B.shape[0] and B.det() == 0):
            raise SplitFailure(f"im ad_Lambda + ker ad_Lambda is not direct at degree {-k}")
        if not B.shape[0]:
            continue
        Binv = B.inv()
        vec = alg.to_vector(C, -k)
        sol = []
        for row in range(Binv.shape[0]):
            terms = []
            for col in range(Binv.shape[1]):
                coef = Binv[row, col]
                v = vec[col]
                if coef != 0 and v:
                    terms.append(v.scale(_to_q(coef)) if isinstance(v, DiffPoly) else v * _to_q(coef))
            sol.append(_sum(terms))
        y = sol[:len(cols)]
        z = sol[len(cols):]
        src = alg.slice(-k - 1)
        for idx, (c, val) in enumerate(zip(cols, y)):
            if not val:
                continue
            U = _add(U, {src[c]: -val})
            for i, kv in enumerate(kerprev):
                r = Q(twist * (idx + 2 * i + 1), 7)
                if r:
                    for pos, coef in enumerate(kv):
                        if coef != 0:
                            U = _add(U, {src[pos]: val.scale(-r * _to_q(coef)) if isinstance(val, DiffPoly)
                                         else -val * r * _to_q(coef)})
        for vec_k, val in zip(kerk, z):
            if val:
                for idx, coef in enumerate(vec_k):
                    if coef != 0:
                        key = alg.slice(-k)[idx]
                        H = _add(H, {key: val.scale(_to_q(coef)) if isinstance(val, DiffPoly) else val * _to_q(coef)})
    return Dressing(U, H, N, heis)


def _complement_columns(M: sp.Matrix, kdim: int) -> list[int]:
    """Columns of M spanning its image."""
    chosen: list[int] = []
    rank = 0
    for c in range(M.shape[1]):
        r = M[:, chosen + [c]].rank()
        if r > rank:
            chosen, rank = chosen + [c], r
    if rank != M.shape[1] - kdim:
        raise SplitFailure("image rank mismatch")
    return chosen


def matrix_densities(N: int = 5, twist: int = 0) -> dict[tuple[int, int], DiffPoly]:
    """h_{j,a} = -j (Lambda_{j,a} | H) / (Lambda_{j,a} | Lambda_{-j,a}) for j <= N."""
    dr = dressing(N, twist=twist)
    heis = dr.heis
    alg = heis.alg
    out = {}
    for j in sorted(heis.pos):
        if j > N:
            continue
        for a, P in enumerate(heis.pos[j]):
            num = alg.pair(P, dr.H)
            den = alg.pair(P, heis.neg[j][a])
            if den == 0:
                raise DegenerateSlice(f"(Lambda_{j} | Lambda_{-j}) = 0")
            val = num.scale(-j / den) if isinstance(num, DiffPoly) else DiffPoly.const(-j * num / den)
            out[(j, heis.parity[j][a])] = val
    return out


def _scalar_density(j: int, parity: int) -> DiffPoly:
    """Scalar density for exponent j in the gauge coordinates u."""
    from .lax import w_from_u, substitute_jets
    wu = w_from_u()
    if (j, parity) == (1, 1):
        return wu[3]
    if (j, parity) == (3, 1):
        return wu[2]
    if (j, parity) == (3, -1):
        return wu[4]
    if (j, parity) == (5, 1):
        return wu[1]
    from .lax import Hierarchy, build_lax, get_model
    from .pdo import res
    if parity != 1:
        raise ValueError("only the P-type densities are available beyond j = 5")
    m = get_model("d4")
    Hh = Hierarchy(m, lax_builder=lambda floor: build_lax(m, coords="u", floor=floor))
    return res(Hh.P_power(j, -2))


def matrix_vs_scalar(j: int, max_jet: int = 4, parity: int = 1, N: int | None = None) -> dict:
    """Compare the dressing density h_j with the scalar density modulo d_x.

    The constant c_j is fixed on the first jet-free monomial of the scalar
    density (jet-free terms are never x-derivatives); the difference
    h_j - c_j s_j (up to jet order max_jet) must be an exact x-derivative.
    """
    dens = matrix_densities(N or j)
    hm = dens[(j, parity)]
    hs = _scalar_density(j, parity)
    lead = hs.jet_degree_parts().get(0)
    if not lead:
        raise Mismatch(f"scalar density for j = {j} has no jet-free part")
    mono, cs = lead.sorted_terms()[0]
    cm = hm.coefficient(mono)
    if not cm:
        raise Mismatch(f"h_{j} misses the leading monomial of the scalar density")
    c = cm / cs
    diff = hm - hs.scale(c)
    diff = diff.truncate_jet(max_jet)
    try:
        anti = diff.integrate_x()
    except NotExact as exc:
        raise Mismatch(f"h_{j} - c s_{j} is not an exact derivative") from exc
    return {"j": j, "parity": parity, "constant": c, "matrix": hm, "scalar": hs,
            "difference": diff, "antiderivative": anti}


def parity_check(N: int = 9) -> dict[tuple[int, int], bool]:
    """sigma_1 flips u^3; a density of parity z must have (-1)^(u^3 degree) = z."""
    out = {}
    for (j, z), h in matrix_densities(N).items():
        ok = True
        for mono, _ in h.items():
            deg3 = sum(e for tok, e in mono.items() if isinstance(tok, tuple) and tok[0] == "w" and tok[1] == 3)
            ok &= (-1) ** deg3 == z
        out[(j, z)] = ok and bool(h)
    return out
