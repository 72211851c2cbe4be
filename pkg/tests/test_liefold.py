import pytest

from dsfjrw import liefold


def test_d4_realization():
    checks = liefold.d4_checks()
    assert checks and all(checks.values()), [k for k, v in checks.items() if not v]


@pytest.mark.parametrize("case", ["d4-b3", "d4-g2", "e6", "a2", "a3", "a4"])
def test_folding(case):
    res = liefold.verify_folding(case)
    assert res and all(res.values()), [k for k, v in res.items() if not v]


def test_e6_sigma():
    res = liefold.verify_sigma_e6()
    assert all(res.values())


def test_root_vectors_count():
    real = liefold.build_d4()["R"]
    for sign in ("E", "F"):
        roots = real.root_vectors(sign)
        assert len(roots) == 12
        assert max(sum(r) for r in roots) == 5


def test_omega_reduction():
    w = liefold.OMEGA
    assert liefold.reduce_omega(w ** 3) == 1
    assert liefold.reduce_omega(1 + w + w ** 2) == 0


def test_dressing_is_complement_independent():
    assert liefold.dressing(5).H == liefold.dressing(5, twist=1).H


def test_parity():
    res = liefold.parity_check(7)
    assert all(res.values())


@pytest.mark.parametrize("j", [1, 3, 5])
def test_matrix_vs_scalar(j):
    r = liefold.matrix_vs_scalar(j, 4)
    assert r["constant"] != 0
    assert r["difference"] == r["antiderivative"].dx()


def test_dressing_stable_under_truncation():
    low, high = liefold.dressing(5).H, liefold.dressing(7).H
    assert low and all(high.get(k) == v for k, v in low.items())
