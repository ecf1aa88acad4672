"""Reusable stability experiments: frieze suites, division-free suites and friends."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .families import FamilyRequest, builtin_family
from .field import INF, PrimeContext, valuation
from .perturb import (
    CampaignReport,
    GremlinConfig,
    check_stability,
    pairwise_regimen,
    perturb_exact,
    run_mode,
)
from .recurrence import DivisionByZero, NodeDef, Poly, build_spec, solve_exact


@dataclass
class Tally:
    trials: int = 0
    ok: int = 0
    violations: int = 0
    borderlines: int = 0
    no_claims: int = 0
    aborts: int = 0
    resampled: int = 0
    examples: list = field(default_factory=list)  # (seed or params, verdict) for violations

    def add(self, verdicts, tag) -> None:
        for v in verdicts:
            if v.classification == "violation":
                self.violations += 1
                if len(self.examples) < 10:
                    self.examples.append((tag, v))
            elif v.classification == "borderline":
                self.borderlines += 1
            elif v.classification == "no-claim":
                self.no_claims += 1
            else:
                self.ok += 1


def random_frieze_c(rng: random.Random, n: int, p: int, N: int) -> list[int]:
    """Integer c's, half the time with ``c[b] * c[b+1] = 1 mod p^m`` forcing a deep denominator."""
    c = [rng.randrange(-p**3, p**3) for _ in range(n)]
    if n >= 2 and rng.random() < 0.5:
        b = rng.randrange(n - 1)
        m = rng.randrange(1, N + 3)
        if c[b] % p == 0:
            c[b] += 1
        c[b + 1] = pow(c[b], -1, p**m) + p**m * rng.randrange(-3, 4)
    return c


def frieze_suite(p: int, n: int, N: int, trials: int = 200, mode: str = "exact", seed: int = 0) -> Tally:
    """Random friezes against their exact solutions; c vectors without a solution are redrawn."""
    ctx = PrimeContext(p)
    rng = random.Random(f"frieze-{seed}-{p}-{n}-{N}")
    tally = Tally()
    for t in range(trials):
        while True:
            c = random_frieze_c(rng, n, p, N)
            spec = builtin_family(FamilyRequest("frieze", {"c": c}), ctx)
            try:
                g = solve_exact(spec)
                break
            except DivisionByZero:
                tally.resampled += 1
        cfg = GremlinConfig(ctx, N, seed=seed * 100003 + t, mode=mode)
        res = run_mode(spec, cfg)
        tally.trials += 1
        tally.aborts += bool(res.aborted)
        tally.add(check_stability(g, res, cfg), (tuple(c), cfg.seed))
    return tally


def random_division_free_spec(rng: random.Random, ctx: PrimeContext, size: int = 8):
    """A random DAG of integer polynomials: every Q_s is 1."""
    n_init = rng.randint(1, 3)
    defs = [NodeDef.constant(("x", i), rng.randint(-50, 50)) for i in range(n_init)]
    for i in range(n_init, size):
        preds = rng.sample(range(i), min(i, rng.randint(1, 3)))
        num = Poly.const(rng.randint(-9, 9))
        for _ in range(rng.randint(1, 3)):
            term = Poly.const(rng.choice([x for x in range(-9, 10) if x]))
            for j in preds:
                if rng.random() < 0.6:
                    term = term * Poly.var(("x", j)) ** rng.randint(1, 2)
            num = num + term
        if num.is_zero():
            num = Poly.const(1)
        defs.append(NodeDef.from_fraction(("x", i), num, Poly.const(1)))
    return build_spec(defs, ctx)


def division_free_suite(trials: int = 500, seed: int = 0, primes=(2, 3, 5, 7)) -> list:
    """Division-free specs: return every (trial, node, reason) breaking the integrality claims."""
    rng = random.Random(f"division-free-{seed}")
    failures = []
    for t in range(trials):
        ctx = PrimeContext(rng.choice(primes))
        N = rng.randint(1, 12)
        spec = random_division_free_spec(rng, ctx, rng.randint(3, 10))
        g = solve_exact(spec)
        res = perturb_exact(spec, GremlinConfig(ctx, N, seed=t))
        for s, gp in res.values.items():
            if valuation(gp - g[s], ctx) < N:
                failures.append((t, s, "difference below N"))
            if valuation(gp, ctx) < 0:
                failures.append((t, s, "negative valuation"))
    return failures


DISRUPTION_C = (1, None, -1, 1, -11, 22)


@dataclass
class DisruptionResult:
    loss: dict  # node -> r in the first trial (r does not depend on the stars here)
    min_diff: dict  # node -> min over trials of v(g'(s) - g(s))
    argmin_seed: dict  # node -> a seed attaining the minimum


def localized_disruption(m: int = 6, N: int = 12, trials: int = 100, seed: int = 0,
                         nodes=(("x", 5, 0), ("x", 6, 0))) -> DisruptionResult:
    ctx = PrimeContext(3)
    c = [3**m - 1 if x is None else x for x in DISRUPTION_C]
    spec = builtin_family(FamilyRequest("frieze", {"c": c}), ctx)
    g = solve_exact(spec)
    loss: dict = {}
    best = {s: INF for s in nodes}
    where = {s: None for s in nodes}
    for t in range(trials):
        cfg = GremlinConfig(ctx, N, seed=seed * 100003 + t)
        res = perturb_exact(spec, cfg)
        if not loss:
            loss = dict(res.loss)
        for s in nodes:
            d = valuation(res.values[s] - g[s], ctx)
            if d < best[s]:
                best[s], where[s] = d, cfg.seed
    return DisruptionResult(loss, best, where)


def somos_regimen(k: int, p: int, N: int = 16, length: int = 29, trials: int = 100,
                  seed: int = 0, jobs: int = 1) -> CampaignReport:
    """Pairwise float trials on Somos-k with unit coefficients (terms x[0..length])."""
    ctx = PrimeContext(p)
    spec = builtin_family(FamilyRequest("somos", {"k": k, "length": length}), ctx)
    try:
        g = solve_exact(spec)
    except DivisionByZero as exc:
        g = exc.partial
    cfg = GremlinConfig(ctx, N, seed=seed, mode="float")
    return pairwise_regimen(spec, cfg, trials, g, pairwise=True, jobs=jobs)


@dataclass
class CorrectionResult:
    node_trials: int = 0
    corrected_fail: int = 0  # violations of N - r + min(0, v(g))
    uncorrected_only: int = 0  # node-trials failing N - r but meeting the corrected bound
    negative_nodes: list = field(default_factory=list)


def correction_term(trials: int = 100, N: int = 16, mode: str = "exact", seed: int = 0,
                    x0=2, x1=1, c=1, d=1, p: int = 2, length: int = 8) -> CorrectionResult:
    ctx = PrimeContext(p)
    params = {"x0": Fraction(x0), "x1": Fraction(x1), "c": Fraction(c), "d": Fraction(d), "length": length}
    spec = builtin_family(FamilyRequest("fz54", params), ctx)
    g = solve_exact(spec)
    out = CorrectionResult(negative_nodes=[s for s in spec.ids if valuation(g[s], ctx) < 0])
    for t in range(trials):
        cfg = GremlinConfig(ctx, N, seed=seed * 100003 + t, mode=mode)
        for v in check_stability(g, run_mode(spec, cfg), cfg):
            if v.loss >= N:
                continue
            out.node_trials += 1
            if v.classification == "violation":
                out.corrected_fail += 1
            elif v.uncorrected_margin < 0:
                out.uncorrected_only += 1
    return out
