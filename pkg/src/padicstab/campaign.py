"""Stability campaigns: configuration, trial files and summaries."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional

from .dsl import elaborate, parse
from .families import FamilyRequest, builtin_family
from .field import PrimeContext, format_valuation
from .perturb import (
    MODES,
    CampaignReport,
    GremlinConfig,
    StarAssignment,
    check_fixed_mode,
    pairwise_regimen,
    sparse_assignment,
)
from .recurrence import DivisionByZero, RecurrenceSpec, node_label, parse_node_label, solve_exact

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_SOLUTION = 2
EXIT_VIOLATION = 3

SUMMARY_COLUMNS = ("node", "trials", "violations", "borderlines", "no-claims", "min-margin", "aborts")


class ConfigError(ValueError):
    pass


@dataclass
class CampaignConfig:
    input: Optional[str] = None  # path to a .rec file
    family: Optional[str] = None
    family_params: dict = field(default_factory=dict)
    p: Optional[int] = None
    N: int = 8
    mode: str = "exact"
    trials: int = 100
    seed: int = 0
    depth: int = 8
    pairwise: bool = False
    out: str = "campaign-out"
    replay: list = field(default_factory=list)  # paths of star-assignment fixtures
    jobs: int = 1
    count_borderline: bool = False

    def validate(self) -> None:
        if (self.input is None) == (self.family is None):
            raise ConfigError("give exactly one of a .rec input or a family")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.N < 1 or self.depth < 1:
            raise ConfigError("N and depth must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        if self.replay and self.mode != "exact":
            raise ConfigError("replayed star assignments need exact mode")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "CampaignConfig":
        """Load a JSON config; relative ``input`` and ``replay`` paths are taken from its directory."""
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        base = path.parent
        if data.get("input"):
            data["input"] = str(base / data["input"])
        if data.get("replay"):
            data["replay"] = [str(base / r) for r in data["replay"]]
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def load_spec(input: Optional[str], family: Optional[str], family_params: dict,
              p: Optional[int]) -> tuple[RecurrenceSpec, PrimeContext]:
    """Build a spec from a ``.rec`` file or a family; ``p`` overrides a declared prime."""
    if input is not None:
        raw = Path(input).read_bytes().decode("utf-8")
        prog = parse(raw)
        prime = p if p is not None else (prog.prime if prog.prime is not None else 2)
        ctx = PrimeContext(prime)
        return elaborate(prog, ctx), ctx
    ctx = PrimeContext(p if p is not None else 2)
    return builtin_family(FamilyRequest(family, dict(family_params)), ctx), ctx


def default_replay_path() -> Path:
    """The documented counterexample perturbation shipped with the package."""
    return Path(str(resources.files("padicstab") / "data" / "counterexample_perturbation.json"))


def load_replay(path: str | Path, spec: RecurrenceSpec) -> StarAssignment:
    """Read a star-assignment fixture; unlisted coefficients get star 0."""
    data = json.loads(Path(path).read_text())
    overrides = {}
    for item in data["stars"]:
        node = parse_node_label(item["node"])
        if node not in spec:
            raise ConfigError(f"replay names unknown node {item['node']}")
        overrides[(node, item["poly"], tuple(item["exponents"]))] = Fraction(item["star"])
    try:
        return sparse_assignment(spec, overrides)
    except ValueError as exc:
        raise ConfigError(f"replay does not match the recurrence: {exc}") from None


def trial_record(outcome, cfg: GremlinConfig, pairwise: bool) -> dict:
    return {
        "trial": outcome.trial,
        "seeds": [str(s) for s in outcome.seeds],
        "mode": cfg.mode,
        "p": cfg.p,
        "N": cfg.N,
        "pairwise": pairwise and not outcome.replayed,
        "replayed": outcome.replayed,
        "aborted": outcome.aborted,
        "abort_node": node_label(outcome.abort_node) if outcome.abort_node is not None else None,
        "nodes": [v.as_record() for v in outcome.verdicts],
    }


def write_reports(report: CampaignReport, cfg: GremlinConfig, pairwise: bool, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trials.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for o in report.outcomes:
            fh.write(json.dumps(trial_record(o, cfg, pairwise), separators=(",", ":")) + "\n")
    with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in report.summary:
            w.writerow([node_label(row.node), row.trials, row.violations, row.borderlines,
                        row.no_claims, format_valuation(row.min_margin), row.aborts])


@dataclass
class CampaignResult:
    report: CampaignReport
    pairwise: bool
    exact_solution: bool
    exit_code: int


def run_campaign(cc: CampaignConfig) -> CampaignResult:
    """Run and write a campaign.  Raises ``ConfigError`` and parse errors to the caller."""
    cc.validate()
    spec, ctx = load_spec(cc.input, cc.family, cc.family_params, cc.p)
    if cc.mode == "fixed":
        check_fixed_mode(spec)
    cfg = GremlinConfig(ctx, cc.N, cc.depth, cc.seed, cc.mode)
    try:
        g = solve_exact(spec)
        exact = True
    except DivisionByZero as exc:
        log.warning("no exact solution (%s); falling back to pairwise comparison", exc)
        g = exc.partial
        exact = False
    pairwise = cc.pairwise or not exact
    replays = [load_replay(path, spec) for path in cc.replay]
    if replays and not exact:
        raise ConfigError("replayed trials are compared against the exact solution, which does not exist")
    report = pairwise_regimen(spec, cfg, cc.trials, g, pairwise=pairwise, replays=replays, jobs=cc.jobs)
    out = Path(cc.out)
    try:
        write_reports(report, cfg, pairwise, out)
    except OSError as exc:
        raise ConfigError(f"cannot write reports to {out}: {exc}") from None
    bad = report.violation_count
    if cc.count_borderline:
        bad += sum(1 for o in report.outcomes for v in o.verdicts
                   if v.classification == "borderline" and v.margin < 0)
    return CampaignResult(report, pairwise, exact, EXIT_VIOLATION if bad else EXIT_OK)
