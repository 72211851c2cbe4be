import pytest

from dsfjrw import golden
from dsfjrw.corering import Poly, Q

NAMES = ["potentials", "d4_flows", "free_energy", "folding"]


@pytest.mark.parametrize("name", NAMES)
def test_schema(name):
    assert golden.load(name)["schema"] == "1"


def test_anchors_unique():
    anchors = []
    for name in ("potentials", "d4_flows"):
        for tab in golden.load(name)["tables"].values():
            anchors += [e.anchor for e in golden.entries(tab)]
    for model in golden.load("free_energy")["models"].values():
        for tab in model["strata"].values():
            anchors += [e.anchor for e in golden.entries(tab)]
    assert len(anchors) == len(set(anchors))


def test_parse_monomial():
    assert golden.parse_monomial("t3,0^5 t3,2") == {("t", 3, 0): 5, ("t", 3, 2): 1}
    with pytest.raises(ValueError):
        golden.parse_monomial("x7")


def test_compare_detects_extra_and_wrong_terms():
    tab = golden.load("potentials")["tables"]["g2"]
    want = golden.table_poly(tab)
    assert all(c.ok for c in golden.compare_table(tab, want, complete=True))
    extra = want + Poly.var(("v", 1))
    assert not golden.compare_table(tab, extra, complete=True)[-1].ok
    mono, c = next(iter(want.items()))
    wrong = want + Poly.monomial(mono.items(), Q(1, 7))
    assert any(not x.ok for x in golden.compare_table(tab, wrong))


def test_term_counts():
    models = golden.load("free_energy")["models"]
    assert models["g2"]["term_counts"] == {"0": 80, "1": 81, "2": 26, "3": 2}
    assert len(golden.entries(models["g2"]["strata"]["2"])) == 26
    assert len(golden.entries(models["b3"]["strata"]["2"])) == 6
