"""Golden tables shipped as JSON fixtures and exact comparison against them."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .corering import DiffPoly, Poly, Q, Rational, parse_q

__all__ = ["Entry", "Check", "load", "entries", "parse_monomial", "compare_table"]

_TOKEN = re.compile(r"^(t(\d+),(\d+)|v(\d+))(?:\^(\d+))?$")


@dataclass(frozen=True)
class Entry:
    monomial: str
    coef: str
    anchor: str

    @property
    def value(self) -> Rational:
        return parse_q(self.coef)


@dataclass
class Check:
    anchor: str
    expected: str
    got: str
    ok: bool

    def line(self) -> str:
        state = "pass" if self.ok else "FAIL"
        tail = "" if self.ok else f" (got {self.got})"
        return f"{state} {self.anchor}: {self.expected}{tail}"


@lru_cache(maxsize=None)
def load(name: str) -> dict:
    text = resources.files("dsfjrw").joinpath("fixtures", f"{name}.json").read_text()
    return json.loads(text)


def entries(table: dict) -> list[Entry]:
    return [Entry(e["monomial"], e["coef"], e["anchor"]) for e in table["entries"]]


def parse_monomial(text: str) -> dict:
    """'t3,0^5 t3,2' or 'v1 v2^2' -> {token: exponent}."""
    mono: dict = {}
    for part in text.split():
        m = _TOKEN.match(part)
        if not m:
            raise ValueError(f"bad monomial token {part!r}")
        tok = ("t", int(m.group(2)), int(m.group(3))) if m.group(2) else ("v", int(m.group(4)))
        mono[tok] = mono.get(tok, 0) + int(m.group(5) or 1)
    return mono


def table_poly(table: dict) -> Poly | DiffPoly:
    if table["variables"] == "w":
        text = " + ".join(f"{e.coef} {e.monomial}" for e in entries(table))
        return DiffPoly.parse(text.replace("+ -", "- "))
    acc = Poly()
    for e in entries(table):
        acc = acc + Poly.monomial(parse_monomial(e.monomial).items(), e.value)
    return acc


def compare_table(table: dict, got: Poly, complete: bool = False) -> list[Check]:
    """Entry-wise exact comparison; with ``complete`` also demand no extra terms."""
    out = []
    if table["variables"] == "w":
        want = table_poly(table)
        for e in entries(table):
            single = DiffPoly.parse(f"{e.coef} {e.monomial}")
            (mono, c), = single.items()
            have = got.coefficient(mono)
            out.append(Check(e.anchor, f"{e.coef} {e.monomial}", str(have), have == c))
        if complete:
            extra = got - want
            out.append(Check(f"{table['name']}#complete", "no further terms", extra.to_text() or "0", not extra))
        return out
    listed = Poly()
    for e in entries(table):
        mono = parse_monomial(e.monomial)
        have = got.coefficient(mono)
        out.append(Check(e.anchor, f"{e.coef} {e.monomial}", str(have), have == e.value))
        listed = listed + Poly.monomial(mono.items(), e.value)
    if complete:
        extra = got - listed
        out.append(Check(f"{table['name']}#complete", "no further terms", extra.to_text() or "0", not extra))
    return out
