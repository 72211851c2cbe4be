"""Brute-force Witten-Kontsevich numbers from the string, dilaton and DVV recursions.

Self-contained on purpose: nothing here touches the dsfjrw package.
"""
from fractions import Fraction
from functools import lru_cache
from itertools import combinations


def dfact(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def _remove(ds, i):
    return ds[:i] + ds[i + 1:]


def _splits(ds):
    """All ordered splits of a sorted multiset into (I, J) by index subsets."""
    idx = range(len(ds))
    for r in range(len(ds) + 1):
        for pick in combinations(idx, r):
            I = tuple(ds[i] for i in pick)
            J = tuple(ds[i] for i in idx if i not in pick)
            yield I, J


@lru_cache(maxsize=None)
def corr(g: int, ds: tuple) -> Fraction:
    """<tau_{d_1} ... tau_{d_n}>_g with ds sorted."""
    n = len(ds)
    if g < 0 or n == 0 or 2 * g - 2 + n <= 0:
        return Fraction(0)
    if sum(ds) != 3 * g - 3 + n or min(ds) < 0:
        return Fraction(0)
    if (g, ds) == (0, (0, 0, 0)):
        return Fraction(1)
    if (g, ds) == (1, (1,)):
        return Fraction(1, 24)
    if ds[0] == 0:
        rest = ds[1:]
        acc = Fraction(0)
        for j, d in enumerate(rest):
            if d >= 1:
                new = tuple(sorted(rest[:j] + (d - 1,) + rest[j + 1:]))
                acc += corr(g, new)
        return acc
    if 1 in ds:
        i = ds.index(1)
        rest = _remove(ds, i)
        return (2 * g - 2 + len(rest)) * corr(g, rest)
    # DVV on the largest insertion tau_{k+1}
    k = ds[-1] - 1
    X = ds[:-1]
    acc = Fraction(0)
    for j, d in enumerate(X):
        new = tuple(sorted(_remove(X, j) + (d + k,)))
        acc += Fraction(dfact(2 * k + 2 * d + 1), dfact(2 * d - 1)) * corr(g, new)
    half = Fraction(0)
    for r in range(k):
        s = k - 1 - r
        w = dfact(2 * r + 1) * dfact(2 * s + 1)
        half += w * corr(g - 1, tuple(sorted(X + (r, s))))
        for g1 in range(g + 1):
            for I, J in _splits(X):
                half += w * corr(g1, tuple(sorted(I + (r,)))) * corr(g - g1, tuple(sorted(J + (s,))))
    acc += half / 2
    return acc / dfact(2 * k + 3)
