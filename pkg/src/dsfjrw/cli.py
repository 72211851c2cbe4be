"""Command-line driver: dsfjrw {frobenius,flow,calibrate,free-energy,invariant,verify}."""
from __future__ import annotations

import argparse
import json
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .corering import Poly, Q, fmt_q
from .golden import Check, compare_table, load

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_TRUNCATION = 0, 1, 2, 3
MODELS = ("d4", "b3", "g2", "a1")
SCHEMA = "1"


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: str = "d4"
    pmax: int = 1
    insertions: int = 2
    floor: int | None = None
    jet_cap: int = 4
    fmt: str = "text"
    suite: str | None = None

    def validate(self) -> "RunConfig":
        if self.model not in MODELS and not self.model.startswith("dn:"):
            raise UsageError(f"unknown model {self.model!r}")
        if self.pmax < 0 or self.insertions < 0 or self.jet_cap < 0:
            raise UsageError("bounds must be non-negative")
        if self.floor is not None and self.floor >= 0:
            raise UsageError("--floor must be negative")
        return self


def _emit(cfg: RunConfig, text: str, payload: dict) -> None:
    if cfg.fmt == "json":
        payload = {"schema": SCHEMA, **payload}
        print(json.dumps(payload, indent=1, sort_keys=True))
    else:
        print(text)


def _truncation_errors():
    from .lax import TruncationInsufficient
    from .principal import Resonance
    from .taugen import OutOfTruncation
    return (OutOfTruncation, TruncationInsufficient, Resonance)


# ---------------------------------------------------------------------------
# plain commands


def cmd_frobenius(cfg: RunConfig) -> int:
    from .frobenius import frobenius_data
    fd = frobenius_data(cfg.model)
    _emit(cfg, fd.F.to_text(), fd.to_json())
    return EXIT_OK


def cmd_flow(cfg: RunConfig, alpha: int, p: int, coord: int | None) -> int:
    from .lax import flow, get_model, hierarchy
    m = get_model(cfg.model)
    if alpha not in m.coords or (coord is not None and coord not in m.coords):
        raise UsageError(f"indices must lie in {m.coords}")
    if cfg.floor is not None:
        hierarchy(m).ensure_floor(cfg.floor)
    fl = flow(m, alpha, p)
    shown = [coord] if coord is not None else list(m.coords)
    text = "\n".join(fl[a].to_text() if coord is not None else f"d w{a} / d t{alpha},{p} = {fl[a].to_text()}"
                     for a in shown)
    payload = {"model": m.name, "time": [alpha, p],
               "flows": {str(a): {"text": fl[a].to_text(), "terms": fl[a].to_json()} for a in shown}}
    _emit(cfg, text, payload)
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig) -> int:
    from .principal import calibrate
    cal = calibrate(cfg.model, cfg.pmax)
    lines = [f"theta_{a},{p} = {th.to_text()}" for (a, p), th in sorted(cal.theta.items())]
    _emit(cfg, "\n".join(lines), cal.to_json())
    return EXIT_OK


def cmd_free_energy(cfg: RunConfig, genus: int | None) -> int:
    from .taugen import assemble
    exp = assemble(cfg.model, max(cfg.pmax, 1), cfg.insertions)
    gs = [genus] if genus is not None else sorted(exp.strata)
    lines = [f"F{g} = {exp.genus(g).to_text() or '0'}" for g in gs]
    payload = exp.to_json()
    if genus is not None:
        payload["genera"] = {str(genus): exp.genus(genus).to_json()}
    _emit(cfg, "\n".join(lines), payload)
    return EXIT_OK


def _parse_tau(items: list[str]) -> list[tuple[int, int]]:
    out = []
    for item in items:
        for part in item.replace(";", " ").split():
            try:
                a, p = part.split(",")
                out.append((int(a), int(p)))
            except ValueError:
                raise UsageError(f"--tau expects alpha,p pairs, got {part!r}") from None
    if not out:
        raise UsageError("--tau needs at least one insertion")
    return out


def cmd_invariant(cfg: RunConfig, genus: int, taus: list[tuple[int, int]]) -> int:
    from .taugen import OutOfTruncation, assemble, extract_invariant
    positive = [x for x in taus if x[1] >= 1]
    pmax = max([1] + [p for _, p in taus])
    K = len(positive)
    if K > 2:
        raise OutOfTruncation("at most two insertions with p >= 1 are reachable")
    exp = assemble(cfg.model, pmax, max(K, 1))
    val = extract_invariant(exp, genus, taus)
    label = " ".join(f"tau_{a},{p}" for a, p in taus)
    _emit(cfg, fmt_q(val), {"model": cfg.model, "genus": genus, "insertions": [list(x) for x in taus],
                            "value": fmt_q(val), "label": f"<{label}>_{genus}"})
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification tasks (module level so that they can run in worker processes)


def _ok(anchor: str, expected: str, got, ok: bool) -> Check:
    return Check(anchor, expected, str(got), bool(ok))


def task_potential(model: str) -> list[Check]:
    from .frobenius import frobenius_data
    tab = load("potentials")["tables"][model]
    return compare_table(tab, frobenius_data(model).F, complete=True)


def task_d4_flows() -> list[Check]:
    from .lax import flow
    out = []
    for tab in load("d4_flows")["tables"].values():
        out += compare_table(tab, flow("d4", tab["beta"], tab["q"])[tab["alpha"]], complete=True)
    return out


def _degree(mono: dict) -> int:
    return sum(mono.values())


def task_free_energy(model: str) -> list[Check]:
    from .taugen import assemble
    spec = load("free_energy")["models"][model]
    exp = assemble(model, spec["pmax"], spec["K"])
    out = []
    for g, tab in spec["strata"].items():
        F = exp.genus(int(g))
        out += compare_table(tab, F, complete=int(g) in spec["complete"])
        cap = spec.get("listed_below_order", {}).get(g)
        if cap:
            low = F.filter_terms(lambda mono: _degree(mono) < cap)
            out += [Check(f"{tab['name']}#order<{cap}", c.expected, c.got, c.ok)
                    for c in compare_table(tab, low, complete=True)[-1:]]
    for g, n in spec.get("term_counts", {}).items():
        out.append(_ok(f"{model}-F{g}#term-count", f"{n} monomials", len(exp.genus(int(g))),
                       len(exp.genus(int(g))) == n))
    top = max(exp.strata, default=0)
    for g in range(spec["vanish_from"], max(top, spec["vanish_from"]) + 1):
        out.append(_ok(f"{model}-F{g}#vanishes", "0", exp.genus(g).to_text() or "0", not exp.genus(g)))
    return out


def task_gamma(target: str) -> list[Check]:
    from .lax import flows, get_model, restrict_model
    m = get_model(target)
    betas = m.coords
    big = flows("d4", 2, betas=betas)
    small = flows(target, 2)
    red = restrict_model(big, set(m.mask), keep_betas=betas)
    out = []
    for key in sorted(small):
        a, b, q = key
        ok = red.get(key) == small[key]
        out.append(_ok(f"gamma-{target}: w{a} along t{b},{q}", "restricted D4 flow = built flow",
                       "equal" if ok else "differs", ok))
    out.append(_ok(f"gamma-{target}#keys", "same flow set", sorted(red) == sorted(small),
                   sorted(red) == sorted(small)))
    return out


def _random_poly(coords, seed: int, pmax: int = 3) -> Poly:
    rng = random.Random(seed)
    f = Poly()
    for _ in range(8):
        mono = {}
        for _ in range(rng.randint(1, 3)):
            tok = ("t", rng.choice(coords), rng.randint(0, pmax))
            mono[tok] = mono.get(tok, 0) + 1
        if rng.random() < 0.3:
            mono["hbar"] = rng.choice((-1, 1))
        f = f + Poly.monomial(mono.items(), Q(rng.randint(-5, 5) or 1, rng.randint(1, 4)))
    return f


def task_commutators(model: str) -> list[Check]:
    from .frobenius import frobenius_data
    from .virasoro import commutator_defect
    fd = frobenius_data(model)
    out = []
    for seed in (1, 2):
        f = _random_poly(fd.coords, seed)
        for i in (-1, 0, 1, 2):
            for j in (-1, 0, 1, 2):
                if i < j and i + j <= 2:
                    d = commutator_defect(i, j, fd, f)
                    out.append(_ok(f"{model}: [L{i}, L{j}] on sample {seed}", f"= ({i - j}) L{i + j}",
                                   d.to_text() or "0", not d))
    return out


STRING_RUNS = {"a1": 3, "d4": 1, "b3": 2, "g2": 3}


def task_string(model: str, pmax: int | None = None) -> list[Check]:
    from .taugen import assemble
    from .virasoro import apply, build_virasoro
    exp = assemble(model, pmax or STRING_RUNS[model], 2)
    out = []
    for m in (-1, 0, 1, 2):
        r = apply(build_virasoro(model, m, folded=model in ("b3", "g2")), exp)
        out.append(_ok(f"{model}: L{m} tau / tau at pollution-free orders", "0",
                       r.verified.to_text()[:200] or "0", r.passed))
    return out


def task_calibration(model: str) -> list[Check]:
    from .frobenius import frobenius_data
    from .principal import calibrate, check_normalization, genus0_free_energy
    from .taugen import assemble
    fd = frobenius_data(model)
    cal = calibrate(fd, 5)
    out = []
    for k, ok in check_normalization(cal, 4).items():
        out.append(_ok(f"{model}: normalization at z^{k}", "0", "0" if ok else "nonzero", ok))
    for a in fd.coords:
        ok = cal.theta[(a, 1)] == fd.F.diff(("v", a))
        out.append(_ok(f"{model}: theta_{a},1 = d F / d v{a}", "equal", ok, ok))
    g0 = assemble(model, 1, 2).genus(0)
    F0 = genus0_free_energy(cal, 2, pmax=1).poly
    out.append(_ok(f"{model}: hbar^0 stratum = principal genus-0 free energy", "equal",
                   (g0 - F0).to_text()[:200] or "equal", g0 == F0))
    small = g0.filter_terms(lambda mono: all(tok[2] == 0 for tok in mono))
    A = fd.F.subs({("v", a): Poly.var(("t", a, 0)) for a in fd.coords})
    out.append(_ok(f"{model}: A(t_0) = F(t^(.,0))", "equal", (small - A).to_text()[:200] or "equal", small == A))
    return out


# classical Witten-Kontsevich numbers (for A1 the DZ normalization gives exactly these)
KDV_VALUES = [
    (0, ((1, 0),) * 3, "1"),
    (0, ((1, 0),) * 2 + ((1, 1),), "0"),
    (0, ((1, 0),) * 3 + ((1, 1),), "1"),
    (0, ((1, 0),) * 4 + ((1, 2),), "1"),
    (1, ((1, 1),), "1/24"),
    (1, ((1, 1),) * 2, "1/24"),
    (1, ((1, 0), (1, 2)), "1/24"),
    (2, ((1, 4),), "1/1152"),
    (2, ((1, 2), (1, 3)), "29/5760"),
    (3, ((1, 3), (1, 4)), "0"),
]


def task_kdv() -> list[Check]:
    from .taugen import assemble, extract_invariant
    exp = assemble("a1", 4, 2)
    out = []
    for g, ins, want in KDV_VALUES:
        got = extract_invariant(exp, g, ins)
        label = " ".join(f"tau{p}" for _, p in ins)
        out.append(_ok(f"a1: <{label}>_{g}", want, fmt_q(got), fmt_q(got) == want))
    return out


def task_folding(case: str) -> list[Check]:
    from .liefold import verify_folding
    return [_ok(f"{case}: {name}", "holds", ok, ok) for name, ok in verify_folding(case).items()]


def task_folding_tables() -> list[Check]:
    from .liefold import D4_EXPONENTS, E6_GAMMA_SIGNS, build_d4, build_e6, d4_checks, verify_sigma_e6
    out = [_ok(f"d4 realization: {name}", "holds", ok, ok) for name, ok in d4_checks().items()]
    out += [_ok(f"e6 realization: {name}", "holds", ok, ok) for name, ok in verify_sigma_e6().items()]
    tabs = load("folding")["tables"]
    from .liefold import verify_folding
    for key, tab in tabs.items():
        res = verify_folding(tab["case"])
        wanted = tab["eigenvalues"]
        for i, z in enumerate(wanted, 1):
            zz = z.replace("^", "**")
            hits = [ok for name, ok in res.items() if name == f"sigma(gamma_{i}) = {zz} gamma_{i}"]
            out.append(_ok(f"{tab['anchor']}#{i}", f"sigma(gamma_{i}) = {z} gamma_{i}", hits, hits == [True]))
    return out


def task_matrix_vs_scalar(max_jet: int = 4) -> list[Check]:
    from .liefold import dressing, matrix_vs_scalar, parity_check
    out = []
    for j, par in ((1, 1), (3, 1), (5, 1), (3, -1)):
        try:
            r = matrix_vs_scalar(j, max_jet, par, N=5)
            out.append(_ok(f"d4 dressing: h_{j}{'' if par == 1 else ' (sigma-odd)'} vs scalar density",
                           f"equal modulo d_x up to jet order {max_jet}", f"c = {fmt_q(r['constant'])}", True))
        except AssertionError as exc:
            out.append(_ok(f"d4 dressing: h_{j}", "equal modulo d_x", str(exc), False))
    for (j, z), ok in parity_check(9).items():
        out.append(_ok(f"d4 dressing: parity of h_{j} (zeta = {z})", "matches u3-degree parity", ok, ok))
    a, b = dressing(5), dressing(5, twist=1)
    out.append(_ok("d4 dressing: H independent of the complement", "equal", a.H == b.H, a.H == b.H))
    return out


SUITES: dict[str, list[tuple]] = {
    "paper-d4": [(task_potential, ("d4",)), (task_d4_flows, ()), (task_free_energy, ("d4",))],
    "paper-b3": [(task_potential, ("b3",)), (task_free_energy, ("b3",))],
    "paper-g2": [(task_potential, ("g2",)), (task_free_energy, ("g2",))],
    "gamma-reduction": [(task_gamma, ("b3",)), (task_gamma, ("g2",))],
    "virasoro": [(task_commutators, (m,)) for m in MODELS] + [(task_string, (m,)) for m in ("a1", "g2", "b3", "d4")],
    "calibration": [(task_calibration, (m,)) for m in MODELS],
    "kdv": [(task_kdv, ())],
    "folding": [(task_folding_tables, ())] + [(task_folding, (c,)) for c in ("d4-b3", "d4-g2", "e6", "a2", "a3")],
    "matrix-vs-scalar": [(task_matrix_vs_scalar, ())],
}
SUITE_ORDER = list(SUITES)


def _run(task) -> list[Check]:
    fn, args = task
    return fn(*args)


def suite_tasks(name: str, model: str | None = None, pmax: int | None = None,
                max_jet: int | None = None) -> list[tuple]:
    """The tasks of one suite, optionally narrowed to a model and re-parametrized."""
    out = []
    for fn, args in SUITES[name]:
        if model is not None and args and args[0] in MODELS and args[0] != model:
            continue
        if fn is task_string and pmax is not None:
            args = (args[0], pmax)
        if fn is task_matrix_vs_scalar and max_jet is not None:
            args = (max_jet,)
        out.append((fn, args))
    return out


def run_suite(name: str, threads: int | None = None, model: str | None = None, pmax: int | None = None,
              max_jet: int | None = None) -> dict[str, list[Check]]:
    names = SUITE_ORDER if name == "all" else [name]
    tasks = [(n, t) for n in names for t in suite_tasks(n, model, pmax, max_jet)]
    threads = threads or max(1, int(os.environ.get("DSFJRW_THREADS", "1") or 1))
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run, [t for _, t in tasks]))
    else:
        results = [_run(t) for _, t in tasks]
    report: dict[str, list[Check]] = {n: [] for n in names}
    for (n, _), checks in zip(tasks, results):
        report[n] += checks
    return report


def cmd_verify(cfg: RunConfig, model: str | None = None, pmax: int | None = None,
               max_jet: int | None = None) -> int:
    if cfg.suite not in SUITES and cfg.suite != "all":
        raise UsageError(f"unknown suite {cfg.suite!r}")
    report = run_suite(cfg.suite, model=model, pmax=pmax, max_jet=max_jet)
    lines = []
    ok_all = True
    for name, checks in report.items():
        good = sum(c.ok for c in checks)
        ok_all &= good == len(checks)
        lines += [c.line() for c in checks]
        lines.append(f"suite {name}: {good}/{len(checks)} pass")
    payload = {"suite": cfg.suite, "passed": ok_all,
               "suites": {n: [{"anchor": c.anchor, "expected": c.expected, "got": c.got, "ok": c.ok}
                              for c in checks] for n, checks in report.items()}}
    _emit(cfg, "\n".join(lines), payload)
    return EXIT_OK if ok_all else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--floor", type=int, default=None, help="lowest d_x power kept in operator algebra")
    common.add_argument("--jet-cap", type=int, default=4)
    ap = argparse.ArgumentParser(prog="dsfjrw", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("frobenius", parents=[common], help="Frobenius potential of a model")
    p.add_argument("--model", default="d4")
    p = sub.add_parser("flow", parents=[common], help="rescaled flow d w^coord / d t^{alpha,p}")
    p.add_argument("--model", default="d4")
    p.add_argument("--alpha", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--coord", type=int, default=None)
    p = sub.add_parser("calibrate", parents=[common], help="calibration theta_{alpha,p}")
    p.add_argument("--model", default="d4")
    p.add_argument("--pmax", type=int, default=2)
    p = sub.add_parser("free-energy", parents=[common], help="truncated genus expansion of log tau")
    p.add_argument("--model", default="d4")
    p.add_argument("--pmax", type=int, default=1)
    p.add_argument("--insertions", type=int, default=2)
    p.add_argument("--genus", type=int, default=None)
    p = sub.add_parser("invariant", parents=[common], help="one correlator <tau ... tau>_g")
    p.add_argument("--model", default="d4")
    p.add_argument("--genus", type=int, required=True)
    p.add_argument("--tau", nargs="+", required=True, help="insertions alpha,p")
    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("--suite", required=True, choices=SUITE_ORDER + ["all"])
    p.add_argument("--model", default=None, help="only the checks of this model")
    p.add_argument("--pmax", type=int, default=None, help="truncation for the Virasoro residual runs")
    p.add_argument("--max-jet", type=int, default=None, help="jet order of the matrix-vs-scalar comparison")
    return ap


def _or(x, default):
    return default if x is None else x


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = RunConfig(model=(getattr(args, "model", None) or "d4").lower(),
                        pmax=_or(getattr(args, "pmax", None), 1), insertions=getattr(args, "insertions", 2), floor=args.floor, jet_cap=args.jet_cap,
                        fmt=args.format, suite=getattr(args, "suite", None)).validate()
        if args.command == "frobenius":
            return cmd_frobenius(cfg)
        if args.command == "flow":
            return cmd_flow(cfg, args.alpha, args.p, args.coord)
        if args.command == "calibrate":
            return cmd_calibrate(cfg)
        if args.command == "free-energy":
            return cmd_free_energy(cfg, args.genus)
        if args.command == "invariant":
            return cmd_invariant(cfg, args.genus, _parse_tau(args.tau))
        if args.pmax is not None and args.pmax < 1 or args.max_jet is not None and args.max_jet < 0:
            raise UsageError("--pmax must be positive and --max-jet non-negative")
        return cmd_verify(cfg, args.model and cfg.model, args.pmax, args.max_jet)
    except UsageError as exc:
        print(f"dsfjrw: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _truncation_errors() as exc:
        print(f"dsfjrw: truncation: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except Exception as exc:
        from .frobenius import PoleCollision
        from .lax import BadModel
        if isinstance(exc, (BadModel, PoleCollision)):
            print(f"dsfjrw: error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        raise


if __name__ == "__main__":
    sys.exit(main())
