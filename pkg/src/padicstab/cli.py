"""Command-line front end.

    padicstab solve counterexample.rec
    padicstab solve --family frieze --c 2,2,2,2,2
    padicstab campaign --family frieze --c 1,2,3,4 --p 3 --N 8 --trials 200 --out runs/frieze
    padicstab family somos --k 4 --out somos4.rec

Exit codes: 0 clean, 1 usage/config/parse error, 2 no exact solution,
3 stability violation observed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from .campaign import (
    EXIT_NO_SOLUTION,
    EXIT_OK,
    EXIT_USAGE,
    CampaignConfig,
    ConfigError,
    load_spec,
    run_campaign,
)
from .dsl import DslError
from .families import FAMILIES, FamilyError, FamilyRequest, family_source
from .field import format_rational
from .perturb import FixedModeUnsupported
from .recurrence import DivisionByZero, RecurrenceError, node_label

log = logging.getLogger("padicstab")


def _rationals(text: str) -> list:
    return [Fraction(t) for t in text.split(",") if t.strip()]


def _matrix(text: str) -> list:
    return [_rationals(row) for row in text.split(";")]


def _add_family_flags(ap: argparse.ArgumentParser) -> None:
    g = ap.add_argument_group("family parameters")
    g.add_argument("--n", type=int, help="frieze size (checked against --c)")
    g.add_argument("--c", help="frieze: comma-separated c_0..c_{n-1}; fz54: the constant c")
    g.add_argument("--d", type=Fraction, help="fz54 constant d")
    g.add_argument("--k", type=int, help="Somos order")
    g.add_argument("--a", help="Somos coefficients a_1..a_{k/2}, or polynomial-demo a")
    g.add_argument("--b", type=Fraction, help="polynomial-demo constant b")
    g.add_argument("--x0", type=Fraction)
    g.add_argument("--x1", type=Fraction)
    g.add_argument("--length", type=int, help="last index of a sequence family")
    g.add_argument("--matrix", help="dodgson matrix, rows separated by ';', e.g. '1,2;3,4'")


def family_params(name: str, ns: argparse.Namespace) -> dict:
    out: dict = {}
    if ns.c is not None:
        out["c"] = _rationals(ns.c) if name == "frieze" else Fraction(ns.c)
    if ns.a is not None:
        out["a"] = _rationals(ns.a) if name == "somos" else Fraction(ns.a)
    if name == "frieze" and ns.n is not None:
        out["n"] = ns.n
    for key in ("d", "k", "b", "x0", "x1", "length"):
        val = getattr(ns, key)
        if val is not None:
            out[key] = val
    if ns.matrix is not None:
        out["matrix"] = _matrix(ns.matrix)
    return out


def _input_args(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("input", nargs="?", help=".rec file")
    ap.add_argument("--family", choices=FAMILIES, help="use a built-in family instead of a file")
    ap.add_argument("--p", type=int, help="prime (default: declared in the file, else 2)")
    _add_family_flags(ap)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="padicstab", description="p-adic stability of recurrences")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="print the exact solution as JSON")
    _input_args(solve)

    camp = sub.add_parser("campaign", help="run perturbation trials and write reports")
    _input_args(camp)
    camp.add_argument("--config", help="JSON campaign config; flags given here override it")
    camp.add_argument("--N", type=int)
    camp.add_argument("--mode", choices=("exact", "float", "fixed"))
    camp.add_argument("--trials", type=int)
    camp.add_argument("--seed", type=int)
    camp.add_argument("--depth", type=int)
    camp.add_argument("--pairwise", action="store_true", default=None)
    camp.add_argument("--out")
    camp.add_argument("--replay", action="append", help="star-assignment fixture to replay (exact mode)")
    camp.add_argument("--jobs", type=int)
    camp.add_argument("--count-borderline", action="store_true", default=None,
                      help="treat borderline nodes that miss the bound as violations")

    fam = sub.add_parser("family", help="write a built-in family as .rec text")
    fam.add_argument("name", choices=FAMILIES)
    fam.add_argument("--p", type=int, help="declare this prime in the output")
    fam.add_argument("--out", help="output file (default: standard output)")
    _add_family_flags(fam)
    return ap


def _check_input(ns) -> None:
    if (ns.input is None) == (ns.family is None):
        raise ConfigError("give exactly one of a .rec file or --family")


def cmd_solve(ns) -> int:
    _check_input(ns)
    params = family_params(ns.family, ns) if ns.family else {}
    spec, _ = load_spec(ns.input, ns.family, params, ns.p)
    from .recurrence import solve_exact

    try:
        g = solve_exact(spec)
    except DivisionByZero as exc:
        print(f"error: no exact solution: {exc}", file=sys.stderr)
        print(json.dumps({"error": "division by zero", "node": node_label(exc.node)}))
        return EXIT_NO_SOLUTION
    print(json.dumps({node_label(k): format_rational(v) for k, v in g.items()}, indent=2))
    return EXIT_OK


def cmd_campaign(ns) -> int:
    overrides = {
        "input": ns.input, "family": ns.family, "p": ns.p, "N": ns.N, "mode": ns.mode,
        "trials": ns.trials, "seed": ns.seed, "depth": ns.depth, "pairwise": ns.pairwise,
        "out": ns.out, "replay": ns.replay, "jobs": ns.jobs, "count_borderline": ns.count_borderline,
    }
    if ns.family:
        params = family_params(ns.family, ns)
        if params:
            overrides["family_params"] = {k: _jsonable(v) for k, v in params.items()}
    if ns.config:
        cc = CampaignConfig.from_file(ns.config, **overrides)
    else:
        cc = CampaignConfig(**{k: v for k, v in overrides.items() if v is not None})
    result = run_campaign(cc)
    rep = result.report
    kind = "pairwise" if result.pairwise else "against the exact solution"
    print(f"{len(rep.outcomes)} trials ({kind}): {rep.violation_count} violations, "
          f"{rep.abort_count} aborted; reports in {cc.out}")
    for o in rep.outcomes:
        for v in o.violations:
            print(f"  violation: trial {o.trial} seeds {[str(s) for s in o.seeds]} node {node_label(v.node)} "
                  f"r={v.loss} predicted={v.predicted} actual={v.actual}")
    return result.exit_code


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    return v


def cmd_family(ns) -> int:
    text = family_source(FamilyRequest(ns.name, family_params(ns.name, ns)), ns.p)
    if ns.out:
        Path(ns.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"solve": cmd_solve, "campaign": cmd_campaign, "family": cmd_family}[ns.command]
    try:
        return handler(ns)
    except (ConfigError, DslError, FamilyError, RecurrenceError, FixedModeUnsupported,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
