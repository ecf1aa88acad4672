"""N-perturbations, projected precision loss and the stability inequality.

Three ways to produce a perturbed solution ``g'``:

* ``perturb_exact`` multiplies every coefficient of every ``P_s`` and ``Q_s``
  by its own factor ``1 + star`` with ``v(star) >= N`` and solves exactly;
* ``run_float`` evaluates the recurrence in emulated N-digit p-adic floating
  point, where rounding plays the part of the stars;
* ``run_fixed`` evaluates it with residues mod ``p**N``.

``check_stability`` compares a perturbation with the exact solution and
``compare_pair`` compares two perturbations with each other.
"""
from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .field import INF, PrimeContext, Valuation, valuation
from .pfloat import (
    DigitSource,
    FixedPointDivisionError,
    PFloat,
    PrecisionFailure,
    Residue,
    derive_seed,
    fixed_arith,
    fixed_divide_shifted,
    float_arith,
    round_exact,
)
from .recurrence import NodeId, RecurrenceSpec, monomial_value, node_label

MODES = ("exact", "float", "fixed")
CLASSES = ("ok", "violation", "borderline", "no-claim")


class FixedModeUnsupported(ValueError):
    """Fixed-point mode needs every value involved to be p-integral."""


@dataclass(frozen=True)
class GremlinConfig:
    ctx: PrimeContext
    N: int
    depth: int = 8
    seed: int = 0
    mode: str = "exact"

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    @property
    def p(self) -> int:
        return self.ctx.p

    def with_seed(self, seed: int) -> "GremlinConfig":
        return GremlinConfig(self.ctx, self.N, self.depth, seed, self.mode)


# node -> (stars on P terms, stars on Q terms), in SparsePoly term order
StarAssignment = dict


@dataclass
class PerturbationResult:
    mode: str
    p: int
    N: int
    values: dict  # node -> Fraction | PFloat | Residue
    denominator_valuations: dict  # node -> v(computed Q_s)
    loss: dict  # node -> r_s
    events: list = field(default_factory=list)
    stars: Optional[StarAssignment] = None
    aborted: Optional[str] = None
    abort_node: Optional[NodeId] = None

    @property
    def completed(self) -> bool:
        return self.aborted is None


def draw_stars(cfg: GremlinConfig, node: NodeId, n_p: int, n_q: int) -> tuple:
    """Fresh stars ``p**N * u`` with ``u`` uniform in ``[0, p**depth)``."""
    scale = cfg.p**cfg.N
    top = cfg.p**cfg.depth

    def star(which, i):
        rng = random.Random(derive_seed(cfg.seed, node, which, i))
        return Fraction(scale * rng.randrange(top))

    return (tuple(star("P", i) for i in range(n_p)), tuple(star("Q", i) for i in range(n_q)))


def zero_assignment(spec: RecurrenceSpec) -> StarAssignment:
    return {d.id: ((Fraction(0),) * len(d.P), (Fraction(0),) * len(d.Q)) for d in spec.nodes}


def sparse_assignment(spec: RecurrenceSpec, overrides: Mapping) -> StarAssignment:
    """Zero stars except ``overrides[(node, "P" | "Q", exponent tuple)] = star``."""
    out = zero_assignment(spec)
    for (node, which, exps), star in overrides.items():
        d = spec[node]
        poly = d.P if which == "P" else d.Q
        pos = [e for e, _ in poly.terms].index(tuple(exps))
        stars = list(out[node][0 if which == "P" else 1])
        stars[pos] = Fraction(star)
        out[node] = (tuple(stars), out[node][1]) if which == "P" else (out[node][0], tuple(stars))
    return out


def _loss(spec: RecurrenceSpec, vq: Mapping) -> dict:
    """Running max of computed-denominator valuations down the order.

    Initial nodes count as 0: their value is a given constant, not the result
    of a division.
    """
    r: dict = {}
    for d in spec.nodes:
        if d.id not in vq:
            break
        own = 0 if d.is_initial else vq[d.id]
        r[d.id] = max([own] + [r[t] for t in d.predecessors])
    return r


def projected_loss(result: PerturbationResult, spec: RecurrenceSpec) -> dict:
    return _loss(spec, result.denominator_valuations)


def perturb_exact(
    spec: RecurrenceSpec,
    cfg: GremlinConfig,
    stars: Optional[StarAssignment] = None,
) -> PerturbationResult:
    """Exact N-perturbation; stars come from ``stars`` or are drawn from ``cfg.seed``."""
    p, N = cfg.p, cfg.N
    values: dict = {}
    vq: dict = {}
    used: StarAssignment = {}
    res = PerturbationResult("exact", p, N, values, vq, {}, stars=used)
    for d in spec.nodes:
        if stars is not None and d.id in stars:
            sp, sq = stars[d.id]
            if len(sp) != len(d.P) or len(sq) != len(d.Q):
                raise ValueError(f"star assignment for {node_label(d.id)} has the wrong shape")
            for s in (*sp, *sq):
                if valuation(s, p) < N:
                    raise ValueError(f"star {s} at {node_label(d.id)} has valuation below N = {N}")
        else:
            sp, sq = draw_stars(cfg, d.id, len(d.P), len(d.Q))
        used[d.id] = (tuple(sp), tuple(sq))
        point = [values[t] for t in d.predecessors]
        num = sum(((1 + s) * c * monomial_value(e, point) for (e, c), s in zip(d.P.terms, sp)), Fraction(0))
        den = sum(((1 + s) * c * monomial_value(e, point) for (e, c), s in zip(d.Q.terms, sq)), Fraction(0))
        vq[d.id] = valuation(den, p)
        if den == 0:
            res.aborted = "perturbed denominator is zero"
            res.abort_node = d.id
            res.events.append({"node": node_label(d.id), "kind": "abort", "reason": res.aborted})
            break
        values[d.id] = num / den
    res.loss = _loss(spec, {k: v for k, v in vq.items() if k in values})
    return res


def _float_poly(terms, point: Sequence[PFloat], p: int, N: int, digits: DigitSource, log: list) -> PFloat:
    total = PFloat.zero(p, N)
    for exps, coeff in terms:
        term = round_exact(coeff, p, N)
        for e, x in zip(exps, point):
            for _ in range(e):
                term, ev = float_arith("mul", term, x, digits)
                log.extend(ev)
        total, ev = float_arith("add", total, term, digits)
        log.extend(ev)
    return total


def run_float(spec: RecurrenceSpec, cfg: GremlinConfig, digits: Optional[DigitSource] = None) -> PerturbationResult:
    """Evaluate the recurrence in N-digit p-adic floating point."""
    p, N = cfg.p, cfg.N
    digits = digits if digits is not None else DigitSource(p, cfg.seed)
    values: dict = {}
    vq: dict = {}
    res = PerturbationResult("float", p, N, values, vq, {})
    for d in spec.nodes:
        point = [values[t] for t in d.predecessors]
        log: list = []
        num = _float_poly(d.P.terms, point, p, N, digits, log)
        den = _float_poly(d.Q.terms, point, p, N, digits, log)
        for ev in log:
            res.events.append({"node": node_label(d.id), "kind": ev.kind, "digits": ev.digits})
        vq[d.id] = den.valuation()
        try:
            q, ev = float_arith("div", num, den, digits)
        except PrecisionFailure as exc:
            res.aborted = str(exc)
            res.abort_node = d.id
            res.events.append({"node": node_label(d.id), "kind": "abort", "reason": res.aborted})
            break
        values[d.id] = q
    res.loss = _loss(spec, {k: v for k, v in vq.items() if k in values})
    return res


def check_fixed_mode(spec: RecurrenceSpec) -> None:
    """Reject specs whose constants or coefficients are not p-integral."""
    p = spec.ctx.p
    for d in spec.nodes:
        if d.is_initial:
            num, den = d.P.coefficients, d.Q.coefficients
            value = (num[0] if num else Fraction(0)) / den[0]
            if valuation(value, p) < 0:
                raise FixedModeUnsupported(f"{node_label(d.id)} = {value} is not {p}-integral")
        for c in d.P.coefficients + d.Q.coefficients:
            if valuation(c, p) < 0:
                raise FixedModeUnsupported(f"coefficient {c} at {node_label(d.id)} is not {p}-integral")


def _fixed_poly(terms, point: Sequence[Residue], p: int, N: int) -> Residue:
    total = Residue(0, p, N)
    for exps, coeff in terms:
        term = Residue.from_rational(coeff, p, N)
        for e, x in zip(exps, point):
            for _ in range(e):
                term = fixed_arith("mul", term, x)
        total = fixed_arith("add", total, term)
    return total


def run_fixed(spec: RecurrenceSpec, cfg: GremlinConfig, digits: Optional[DigitSource] = None) -> PerturbationResult:
    """Evaluate the recurrence with residues mod ``p**N``.

    Division by ``p**k * unit`` with ``0 < k < N`` leaves the top ``k`` digits of
    the quotient undetermined; they are filled from ``digits``.
    """
    check_fixed_mode(spec)
    p, N = cfg.p, cfg.N
    digits = digits if digits is not None else DigitSource(p, cfg.seed)
    values: dict = {}
    vq: dict = {}
    res = PerturbationResult("fixed", p, N, values, vq, {})
    for d in spec.nodes:
        point = [values[t] for t in d.predecessors]
        if d.is_initial:
            num, den = d.P.coefficients, d.Q.coefficients
            value = (num[0] if num else Fraction(0)) / den[0]
            vq[d.id] = 0
            values[d.id] = Residue.from_rational(value, p, N)
            continue
        num = _fixed_poly(d.P.terms, point, p, N)
        den = _fixed_poly(d.Q.terms, point, p, N)
        vq[d.id] = den.valuation()
        try:
            q, k = fixed_divide_shifted(num, den, digits)
        except FixedPointDivisionError as exc:
            res.aborted = str(exc)
            res.abort_node = d.id
            res.events.append({"node": node_label(d.id), "kind": "abort", "reason": res.aborted})
            break
        if k:
            res.events.append({"node": node_label(d.id), "kind": "nonunit_division", "digits": k})
        values[d.id] = q
    res.loss = _loss(spec, {k: v for k, v in vq.items() if k in values})
    return res


def run_mode(spec: RecurrenceSpec, cfg: GremlinConfig, stars: Optional[StarAssignment] = None) -> PerturbationResult:
    if cfg.mode == "exact":
        return perturb_exact(spec, cfg, stars)
    if stars is not None:
        raise ValueError("star assignments only apply to exact mode")
    if cfg.mode == "float":
        return run_float(spec, cfg)
    return run_fixed(spec, cfg)


def gremlin_witness(spec: RecurrenceSpec, result: PerturbationResult) -> StarAssignment:
    """Stars that make an exact-mode run reproduce a float or fixed run.

    Node ``s`` gets one common star ``w`` on every numerator term, chosen so that
    ``P(rep)(1 + w) / Q(rep)`` equals the representative of the computed value.
    ``w`` is a genuine star (valuation at least N) exactly when the computation
    at ``s`` introduced only gremlin-sized errors.
    """
    reps: dict = {}
    out: StarAssignment = {}
    for d in spec.nodes:
        if d.id not in result.values:
            break
        rep, _ = _as_exact(result.values[d.id], result.mode)
        point = [reps[t] for t in d.predecessors]
        P = sum((c * monomial_value(e, point) for e, c in d.P.terms), Fraction(0))
        Q = sum((c * monomial_value(e, point) for e, c in d.Q.terms), Fraction(0))
        if P == 0 or Q == 0:
            raise ValueError(f"no multiplicative witness at {node_label(d.id)}")
        w = rep * Q / P - 1
        out[d.id] = ((w,) * len(d.P), (Fraction(0),) * len(d.Q))
        reps[d.id] = rep
    return out


# -- verdicts ---------------------------------------------------------------


@dataclass(frozen=True)
class StabilityVerdict:
    node: NodeId
    N: int
    loss: Valuation  # r_s
    denominator_valuation: Valuation
    value_valuation: Valuation  # v(g(s)), or the proxy when ``proxy``
    correction: Valuation  # min(0, value_valuation)
    predicted: Valuation
    actual: Valuation  # lower bound when ``limited``
    margin: Valuation
    classification: str
    proxy: bool = False
    limited: bool = False

    @property
    def uncorrected_margin(self) -> Valuation:
        """Margin against ``N - r_s`` alone, without the correction term."""
        return self.actual - (self.N - self.loss)

    def as_record(self) -> dict:
        from .field import format_valuation as fv

        return {
            "node": node_label(self.node),
            "r": fv(self.loss),
            "vq": fv(self.denominator_valuation),
            "vg": fv(self.value_valuation),
            "predicted": fv(self.predicted),
            "actual": fv(self.actual),
            "margin": fv(self.margin),
            "uncorrected_margin": fv(self.uncorrected_margin),
            "classification": self.classification,
            "proxy": self.proxy,
            "limited": self.limited,
        }


def classify(loss: Valuation, N: int, margin: Valuation) -> str:
    if loss > N:
        return "no-claim"
    if loss == N:
        return "borderline"
    return "violation" if margin < 0 else "ok"


def _margin(actual: Valuation, predicted: Valuation) -> Valuation:
    if actual == INF:
        return INF
    return actual - predicted


def _as_exact(value, mode: str) -> tuple[Fraction, Valuation]:
    """Representative of a computed value plus the valuation of its uncertainty."""
    if mode == "exact":
        return value, INF
    if mode == "float":
        return value.representative(), value.uncertainty()
    return Fraction(value.value), value.N


def _diff_valuation(a, b, mode: str, p: int, b_exact: bool = False) -> tuple[Valuation, bool]:
    """Valuation of ``a - b`` and whether it is only a representation-limited lower bound.

    ``b`` is a computed value in ``mode`` unless ``b_exact`` says it is an exact rational.
    """
    ra, ua = _as_exact(a, mode)
    rb, ub = (b, INF) if b_exact else _as_exact(b, mode)
    bound = min(ua, ub)
    d = valuation(ra - rb, p)
    if d >= bound:
        return bound, bound != INF
    return d, False


def _verdict(node, N, loss, vq, vg, actual, limited, proxy=False) -> StabilityVerdict:
    correction = min(0, vg)
    predicted = N - loss + correction
    margin = _margin(actual, predicted)
    return StabilityVerdict(node, N, loss, vq, vg, correction, predicted, actual, margin,
                            classify(loss, N, margin), proxy, limited)


def check_stability(g: Mapping, result: PerturbationResult, cfg: GremlinConfig) -> list[StabilityVerdict]:
    """One verdict per computed node, comparing ``g'`` with the exact ``g``."""
    p, N = cfg.p, cfg.N
    out = []
    for node, value in result.values.items():
        exact = g[node]
        actual, limited = _diff_valuation(value, exact, result.mode, p, b_exact=True)
        out.append(_verdict(node, N, result.loss[node], result.denominator_valuations[node],
                            valuation(exact, p), actual, limited))
    return out


def apparent_valuation(value, mode: str, p: int) -> Valuation:
    if mode == "exact":
        return valuation(value, p)
    if mode == "float":
        return value.valuation()
    return min(value.valuation(), value.N)


def compare_pair(
    g: Mapping, first: PerturbationResult, second: PerturbationResult, cfg: GremlinConfig
) -> list[StabilityVerdict]:
    """Verdicts for ``v(g'_1 - g'_2)`` against ``N - max(r_1, r_2) + correction``.

    The correction uses ``v(g(s))`` where ``g`` is known and otherwise the
    apparent valuation of ``g'_1(s)``; such verdicts carry ``proxy=True``.
    """
    p, N = cfg.p, cfg.N
    out = []
    for node, a in first.values.items():
        if node not in second.values:
            break
        b = second.values[node]
        actual, limited = _diff_valuation(a, b, first.mode, p)
        loss = max(first.loss[node], second.loss[node])
        vq = max(first.denominator_valuations[node], second.denominator_valuations[node])
        if node in g:
            vg, proxy = valuation(g[node], p), False
        else:
            vg, proxy = apparent_valuation(a, first.mode, p), True
        out.append(_verdict(node, N, loss, vq, vg, actual, limited, proxy))
    return out


# -- regimens ---------------------------------------------------------------


@dataclass
class TrialOutcome:
    trial: int
    seeds: tuple
    verdicts: list
    aborted: Optional[str] = None
    abort_node: Optional[NodeId] = None
    events: int = 0
    replayed: bool = False

    @property
    def violations(self) -> list:
        return [v for v in self.verdicts if v.classification == "violation"]


def trial_seeds(campaign_seed: int, trial: int, pairwise: bool) -> tuple:
    if pairwise:
        return (derive_seed(campaign_seed, "trial", trial, "a"), derive_seed(campaign_seed, "trial", trial, "b"))
    return (derive_seed(campaign_seed, "trial", trial),)


def run_trial(
    spec: RecurrenceSpec,
    cfg: GremlinConfig,
    trial: int,
    g: Mapping,
    pairwise: bool,
    stars: Optional[StarAssignment] = None,
) -> TrialOutcome:
    """One solo (against ``g``) or pairwise trial; ``g`` may be partial in pairwise mode."""
    seeds = trial_seeds(cfg.seed, trial, pairwise) if stars is None else ()
    if pairwise and stars is None:
        r1 = run_mode(spec, cfg.with_seed(seeds[0]))
        r2 = run_mode(spec, cfg.with_seed(seeds[1]))
        verdicts = compare_pair(g, r1, r2, cfg)
        bad = r1 if not r1.completed else r2
        return TrialOutcome(trial, seeds, verdicts, bad.aborted, bad.abort_node,
                            len(r1.events) + len(r2.events))
    res = run_mode(spec, cfg.with_seed(seeds[0]) if seeds else cfg, stars)
    return TrialOutcome(trial, seeds, check_stability(g, res, cfg), res.aborted, res.abort_node,
                        len(res.events), replayed=stars is not None)


@dataclass
class NodeSummary:
    node: NodeId
    trials: int = 0
    violations: int = 0
    borderlines: int = 0
    no_claims: int = 0
    min_margin: Valuation = INF
    aborts: int = 0


@dataclass
class CampaignReport:
    spec_size: int
    outcomes: list
    summary: list  # NodeSummary in topological order

    @property
    def violation_count(self) -> int:
        return sum(s.violations for s in self.summary)

    @property
    def abort_count(self) -> int:
        return sum(1 for o in self.outcomes if o.aborted)


def summarize(spec: RecurrenceSpec, outcomes: Sequence[TrialOutcome]) -> list[NodeSummary]:
    rows = {nid: NodeSummary(nid) for nid in spec.ids}
    for o in outcomes:
        seen = set()
        for v in o.verdicts:
            row = rows[v.node]
            seen.add(v.node)
            row.trials += 1
            if v.classification == "violation":
                row.violations += 1
            elif v.classification == "borderline":
                row.borderlines += 1
            elif v.classification == "no-claim":
                row.no_claims += 1
            if v.classification in ("ok", "violation"):
                row.min_margin = min(row.min_margin, v.margin)
        if o.aborted:
            for nid in spec.ids:
                if nid not in seen:
                    rows[nid].aborts += 1
    return [rows[nid] for nid in spec.ids]


def _trial_job(args):
    return run_trial(*args)


def pairwise_regimen(
    spec: RecurrenceSpec,
    cfg: GremlinConfig,
    trials: int,
    g: Optional[Mapping] = None,
    pairwise: bool = True,
    replays: Sequence[StarAssignment] = (),
    jobs: int = 1,
) -> CampaignReport:
    """Run ``trials`` independent trials and aggregate per-node statistics.

    Replayed star assignments (exact mode) run first and take the lowest trial
    indices.  Results do not depend on ``jobs``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    g = g if g is not None else {}
    if not pairwise and len(g) < len(spec):
        raise ValueError("a solo regimen needs the full exact solution")
    tasks = [(spec, cfg, i, g, False, stars) for i, stars in enumerate(replays)]
    tasks += [(spec, cfg, len(replays) + i, g, pairwise, None) for i in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_trial_job, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        outcomes = [_trial_job(t) for t in tasks]
    return CampaignReport(len(spec), outcomes, summarize(spec, outcomes))
