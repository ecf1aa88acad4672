"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line (plus any findings) that is
printed in the pytest terminal summary.  Run directly with
``python3 tests/test_acceptance.py`` for a quiet run (extra arguments go to pytest).
"""
import os
import random
import time
from fractions import Fraction

import pytest

from conftest import ACCEPTANCE_LINES
from padicstab.campaign import CampaignConfig, default_replay_path, load_replay, run_campaign
from padicstab.experiments import (
    correction_term,
    frieze_suite,
    localized_disruption,
    division_free_suite,
    somos_regimen,
)
from padicstab.families import FamilyRequest, builtin_family
from padicstab.field import PrimeContext, valuation
from padicstab.perturb import GremlinConfig, check_stability, perturb_exact, zero_assignment
from padicstab.pfloat import DigitSource, Kind, PFloat, ZeroDigits, float_arith, round_exact, same_representation
from padicstab.recurrence import DivisionByZero, node_label, solve_exact

JOBS = min(4, os.cpu_count() or 1)


def report(n, ok, text, findings=()):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}"
    ACCEPTANCE_LINES.append(line)
    ACCEPTANCE_LINES.extend(f"         finding: {f}" for f in findings)
    print(line)
    for f in findings:
        print(f"         finding: {f}")
    return ok


def test_criterion_1_counterexample():
    t0 = time.perf_counter()
    ctx = PrimeContext(2)
    spec = builtin_family(FamilyRequest("counterexample"), ctx)
    g = solve_exact(spec)
    want_g = [5, -5, Fraction(-6, 5), Fraction(11, 25), Fraction(7, 15), Fraction(-40, 33),
              Fraction(-365, 77), Fraction(663, 140)]
    want_gp = [5, -5, Fraction(-6, 5), Fraction(11, 25), Fraction(-793, 15), Fraction(-4040, 33),
               Fraction(20365, 8723), Fraction(-17463, 1601860)]
    cfg = GremlinConfig(ctx, 6)
    res = perturb_exact(spec, cfg, load_replay(default_replay_path(), spec))
    v7 = check_stability(g, res, cfg)[-1]
    elapsed = time.perf_counter() - t0
    got = ([g[("x", n)] for n in range(8)], [res.values[("x", n)] for n in range(8)],
           (v7.loss, v7.predicted, v7.actual, v7.classification))
    ok = got == (want_g, want_gp, (3, 1, 0, "violation")) and elapsed < 1
    report(1, ok, f"solution and perturbation bit-exact, r7={v7.loss} predicted={v7.predicted} "
                  f"actual={v7.actual} {v7.classification} ({elapsed:.3f}s)")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("mode", ["exact", "fixed"])
def test_criterion_2_frieze_stability(mode):
    t0 = time.perf_counter()
    total = {"trials": 0, "violations": 0, "borderlines": 0, "no_claims": 0, "aborts": 0, "resampled": 0}
    examples = []
    for p in (2, 3, 5):
        for n in range(4, 9):
            for N in (4, 8, 12):
                t = frieze_suite(p, n, N, trials=200, mode=mode)
                for key in total:
                    total[key] += getattr(t, key)
                examples += [f"p={p} n={n} N={N} c={c} seed={seed} node={node_label(v.node)} "
                             f"r={v.loss} predicted={v.predicted} actual={v.actual}"
                             for (c, seed), v in t.examples]
    ok = total["violations"] == 0
    report(2, ok, f"frieze {mode} mode, {total['trials']} trials: {total['violations']} violations "
                  f"(borderline {total['borderlines']}, no-claim {total['no_claims']}, "
                  f"aborted {total['aborts']}, c resampled {total['resampled']}; "
                  f"{time.perf_counter() - t0:.0f}s)", examples[:5])
    assert ok


def test_criterion_3_division_free():
    failures = division_free_suite(trials=500)
    ok = not failures
    report(3, ok, f"500 division-free exact trials, {len(failures)} nodes with v(g'-g) < N or v(g') < 0",
           [f"trial {t} node {node_label(s)}: {why}" for t, s, why in failures[:5]])
    assert ok


def test_criterion_4_localized_disruption():
    res = localized_disruption(m=6, N=12, trials=100)
    r50 = res.loss[("x", 5, 0)]
    lit = res.min_diff[("x", 5, 0)]
    shifted = res.min_diff[("x", 6, 0)]
    findings = []
    if lit < 11:
        findings.append(f"min v(g'(5,0) - g(5,0)) = {lit} < 11 (seed {res.argmin_seed[('x', 5, 0)]}); "
                        f"the >= N - m + 5 pattern holds one row up: min at (6,0) = {shifted}")
    ok = r50 == 6
    report(4, ok, f"r(5,0) = {r50}; over 100 trials min v(g'-g) at (5,0) = {lit}, at (6,0) = {shifted}",
           findings)
    assert ok


@pytest.mark.slow
def test_criterion_5_somos_regimen():
    t0 = time.perf_counter()
    rows, findings = [], []
    for k in (4, 5, 6, 7):
        for p in (2, 3, 5, 7):
            rep = somos_regimen(k, p, N=16, length=29, trials=100, jobs=JOBS)
            rows.append(rep.violation_count)
            for o in rep.outcomes:
                for v in o.violations:
                    if len(findings) < 12:
                        findings.append(f"somos-{k} p={p} trial {o.trial} seeds {list(o.seeds)} "
                                        f"node {node_label(v.node)} r={v.loss} predicted={v.predicted} "
                                        f"actual={v.actual}")
            if rep.violation_count:
                findings.append(f"somos-{k} p={p}: {rep.violation_count} violations in 100 trials")
    ok = sum(rows) == 0
    report(5, ok, f"somos k=4..7 x p in (2,3,5,7), 100 pairwise float trials each: {sum(rows)} violations "
                  f"({time.perf_counter() - t0:.0f}s)", findings)
    assert ok


def test_criterion_6_correction_term():
    res = correction_term(trials=100, N=16)
    ok = bool(res.negative_nodes) and res.uncorrected_only > 0 and res.corrected_fail == 0
    report(6, ok, f"fz54 x0=2 x1=1 c=d=1 p=2 N=16: {res.uncorrected_only} of {res.node_trials} node-trials "
                  f"fail N - r but meet the corrected bound; {res.corrected_fail} fail the corrected bound")
    assert ok


def _represents(z: PFloat, value: Fraction) -> bool:
    if z.kind is Kind.ZERO:
        return value == 0
    if z.kind is Kind.UNKNOWN:
        return valuation(value, z.p) >= z.exponent
    return value != 0 and valuation(value / z.representative() - 1, z.p) >= z.N


def test_criterion_7_padic_float():
    rng = random.Random(2024)
    rep_bad = 0
    for _ in range(1000):
        p, N = rng.choice([2, 3, 5, 7]), rng.randint(1, 10)
        x = Fraction(rng.randint(1, 10**6) * rng.choice([1, -1]), rng.randint(1, 10**6)) * Fraction(p) ** rng.randint(-5, 5)
        k = rng.randint(0, 2 * N)
        u = rng.randint(1, 10**4)
        while u % p == 0:
            u += 1
        y = x * (1 + Fraction(p) ** k * u)  # v(y/x - 1) = k by construction
        if y == 0:
            continue
        rep_bad += same_representation(x, y, p, N) != (k >= N)
    sound_bad = 0
    for i in range(1000):
        p, N = rng.choice([2, 3, 5]), rng.randint(1, 8)
        op = rng.choice(["add", "mul", "div"])
        x = Fraction(rng.randint(1, 10**5), rng.randint(1, 10**5)) * Fraction(p) ** rng.randint(-3, 3)
        y = Fraction(rng.randint(-10**5, -1), rng.randint(1, 10**5)) * Fraction(p) ** rng.randint(-3, 3)
        if op == "add" and rng.random() < 0.5:
            y = -x * (1 + Fraction(p) ** rng.randint(0, N + 1) * rng.randint(1, 9))
        X, Y = round_exact(x, p, N), round_exact(y, p, N)
        Z, events = float_arith(op, X, Y, DigitSource(p, i))
        xt, yt = X.representative(), Y.representative()
        for e in events:
            if e.kind == "cancellation":
                xt += e.witness * Fraction(p) ** (X.exponent + N)
        exact = {"add": xt + yt, "mul": xt * yt, "div": xt / yt}[op]
        sound_bad += not (_represents(X, xt) and _represents(Y, yt) and _represents(Z, exact))
    z, _ = float_arith("add", round_exact(1, 2, 4), round_exact(15, 2, 4), ZeroDigits(2))
    unknown_ok = z.kind is Kind.UNKNOWN and z.exponent == 4
    ok = rep_bad == 0 and sound_bad == 0 and unknown_ok
    report(7, ok, f"same_representation mismatches {rep_bad}/1000, unsound results {sound_bad}/1000, "
                  f"1 + 15 at p=2 N=4 -> {z.kind.value} bound {z.exponent}")
    assert ok


def test_criterion_8_oracle_identity():
    requests = [
        (FamilyRequest("counterexample"), 2),
        (FamilyRequest("frieze", {"c": [1, 3**6 - 1, -1, 1, -11, 22]}), 3),
        (FamilyRequest("frieze", {"c": [2] * 5}), 5),
        (FamilyRequest("frieze", {"c": [1] * 4}), 2),  # has no solution
        (FamilyRequest("somos", {"k": 4, "length": 29}), 5),
        (FamilyRequest("somos", {"k": 7, "length": 29}), 3),
        (FamilyRequest("fz54", {"x0": 2, "x1": 1, "length": 10}), 2),
        (FamilyRequest("dodgson", {"matrix": [[3, 1, 4, 1], [5, 9, 2, 6], [5, 3, 5, 8], [9, 7, 9, 3]]}), 7),
        (FamilyRequest("polynomial-demo", {"length": 8}), 3),
    ]
    checked, bad = [], []
    for req, p in requests:
        ctx = PrimeContext(p)
        spec = builtin_family(req, ctx)
        try:
            g = solve_exact(spec)
        except DivisionByZero:
            continue
        res = perturb_exact(spec, GremlinConfig(ctx, 8), zero_assignment(spec))
        checked.append(req.name)
        if res.values != g:
            bad.append(req.name)
    ok = not bad and set(checked) == {"counterexample", "frieze", "somos", "fz54", "dodgson", "polynomial-demo"}
    report(8, ok, f"zero-star perturbation equals exact solution on {len(checked)} solvable instances "
                  f"of {len(set(checked))} families; mismatches: {bad or 'none'}")
    assert ok


def test_criterion_9_determinism(tmp_path):
    configs = [
        dict(family="counterexample", N=6, trials=40, seed=1, replay=[str(default_replay_path())]),
        dict(family="frieze", family_params={"c": [1, 728, -1, 1, -11, 22]}, p=3, N=12, trials=40, seed=2),
        dict(family="frieze", family_params={"c": [3, 1, 4, 1, 5]}, p=2, N=8, mode="fixed", trials=40, seed=3),
        dict(family="somos", family_params={"k": 6, "length": 29}, p=3, N=16, mode="float",
             pairwise=True, trials=40, seed=4),
    ]
    mismatched = []
    for i, base in enumerate(configs):
        blobs = []
        for run, jobs in enumerate((1, 1, JOBS + 1)):
            out = tmp_path / f"{i}-{run}"
            run_campaign(CampaignConfig(out=str(out), jobs=jobs, **base))
            blobs.append((out / "trials.jsonl").read_bytes() + (out / "summary.csv").read_bytes())
        if len(set(blobs)) != 1:
            mismatched.append(base["family"])
    ok = not mismatched
    report(9, ok, f"{len(configs)} campaigns (exact, fixed, pairwise float) run twice serially and once with "
                  f"{JOBS + 1} workers: byte-identical outputs {'for all' if ok else 'except ' + str(mismatched)}")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", *sys.argv[1:]]))
