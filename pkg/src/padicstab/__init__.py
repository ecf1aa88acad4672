"""Exact-arithmetic laboratory for p-adic stability of nonlinear recurrences."""
from .field import INF, PrimeContext, normalize_coefficients, valuation
from .families import FamilyRequest, builtin_family
from .perturb import (
    GremlinConfig,
    check_stability,
    compare_pair,
    pairwise_regimen,
    perturb_exact,
    projected_loss,
    run_fixed,
    run_float,
)
from .pfloat import PFloat, float_arith, round_exact, same_representation
from .recurrence import DivisionByZero, build_spec, solve_exact

__all__ = [
    "INF",
    "PrimeContext",
    "normalize_coefficients",
    "valuation",
    "FamilyRequest",
    "builtin_family",
    "GremlinConfig",
    "check_stability",
    "compare_pair",
    "pairwise_regimen",
    "perturb_exact",
    "projected_loss",
    "run_fixed",
    "run_float",
    "PFloat",
    "float_arith",
    "round_exact",
    "same_representation",
    "DivisionByZero",
    "build_spec",
    "solve_exact",
]
