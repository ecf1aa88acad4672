"""Generators for the built-in recurrence families."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

from .field import PrimeContext, valuation
from .recurrence import NodeDef, Poly, RecurrenceSpec, build_spec

FAMILIES = ("counterexample", "frieze", "somos", "fz54", "dodgson", "polynomial-demo")


class FamilyError(ValueError):
    pass


@dataclass(frozen=True)
class FamilyRequest:
    name: str
    params: dict = field(default_factory=dict)


def _x(*idx) -> Poly:
    return Poly.var(("x", *idx))


def counterexample_defs() -> list[NodeDef]:
    defs = [NodeDef.constant(("x", 0), 5), NodeDef.constant(("x", 1), -5)]
    for n in range(2, 8):
        defs.append(NodeDef.from_fraction(("x", n), _x(n - 1) - Poly.const(1), _x(n - 2)))
    return defs


def frieze_defs(c: Sequence, ctx: PrimeContext | None = None) -> list[NodeDef]:
    n = len(c)
    if n < 1:
        raise FamilyError("frieze needs at least one c value")
    c = [Fraction(x) for x in c]
    if ctx is not None:
        for b, cb in enumerate(c):
            if valuation(cb, ctx) < 0:
                raise FamilyError(f"c_{b} = {cb} has negative {ctx.p}-adic valuation")
    defs = [NodeDef.constant(("x", 0, b), 1) for b in range(n + 1)]
    defs += [NodeDef.constant(("x", 1, b), c[b]) for b in range(n)]
    for a in range(2, n + 1):
        for b in range(n - a + 1):
            num = _x(a - 1, b) * _x(a - 1, b + 1) - Poly.const(1)
            defs.append(NodeDef.from_fraction(("x", a, b), num, _x(a - 2, b + 1)))
    return defs


def somos_defs(k: int, a: Sequence, length: int) -> list[NodeDef]:
    if k < 2:
        raise FamilyError("Somos order k must be at least 2")
    if len(a) != k // 2:
        raise FamilyError(f"Somos-{k} takes {k // 2} coefficients, got {len(a)}")
    if length < k - 1:
        raise FamilyError("length must reach the initial terms")
    defs = [NodeDef.constant(("x", i), 1) for i in range(k)]
    for m in range(k, length + 1):
        n = m - k
        num = Poly()
        for i, ai in enumerate(a, start=1):
            num = num + Poly.const(ai) * _x(n + i) * _x(n + k - i)
        defs.append(NodeDef.from_fraction(("x", m), num, _x(n)))
    return defs


def fz54_defs(c, d, x0=1, x1=1, length: int = 10) -> list[NodeDef]:
    if length < 1:
        raise FamilyError("length must be at least 1")
    defs = [NodeDef.constant(("x", 0), x0), NodeDef.constant(("x", 1), x1)]
    for m in range(2, length + 1):
        prev = _x(m - 1)
        num = prev * prev + Poly.const(c) * prev + Poly.const(d)
        defs.append(NodeDef.from_fraction(("x", m), num, _x(m - 2)))
    return defs


def dodgson_defs(matrix: Sequence[Sequence]) -> list[NodeDef]:
    """Condensation nodes ``(k, i, j)``: level ``k`` holds the k-by-k connected minors."""
    n = len(matrix)
    if n < 1 or any(len(row) != n for row in matrix):
        raise FamilyError("dodgson needs a square, non-empty matrix")
    defs = [NodeDef.constant(("x", 0, i, j), 1) for i in range(n + 1) for j in range(n + 1)]
    defs += [NodeDef.constant(("x", 1, i, j), matrix[i][j]) for i in range(n) for j in range(n)]
    for k in range(2, n + 1):
        for i in range(n - k + 1):
            for j in range(n - k + 1):
                num = _x(k - 1, i, j) * _x(k - 1, i + 1, j + 1) - _x(k - 1, i, j + 1) * _x(k - 1, i + 1, j)
                defs.append(NodeDef.from_fraction(("x", k, i, j), num, _x(k - 2, i + 1, j + 1)))
    return defs


def polynomial_demo_defs(length: int = 8, a=1, b=1, x0=1, x1=2) -> list[NodeDef]:
    """Division-free ``x[n] = x[n-1]*x[n-2] + a*x[n-1] + b``."""
    for name, val in (("a", a), ("b", b), ("x0", x0), ("x1", x1)):
        if Fraction(val).denominator != 1:
            raise FamilyError(f"polynomial-demo parameter {name} must be an integer")
    defs = [NodeDef.constant(("x", 0), x0), NodeDef.constant(("x", 1), x1)]
    for n in range(2, length + 1):
        num = _x(n - 1) * _x(n - 2) + Poly.const(a) * _x(n - 1) + Poly.const(b)
        defs.append(NodeDef.from_fraction(("x", n), num, Poly.const(1)))
    return defs


_DEFAULTS: dict[str, dict[str, Any]] = {
    "counterexample": {},
    "frieze": {"c": None},
    "somos": {"k": 4, "a": None, "length": 20},
    "fz54": {"c": 1, "d": 1, "x0": 1, "x1": 1, "length": 10},
    "dodgson": {"matrix": None},
    "polynomial-demo": {"length": 8, "a": 1, "b": 1, "x0": 1, "x1": 2},
}


def family_defs(req: FamilyRequest, ctx: PrimeContext | None = None) -> list[NodeDef]:
    if req.name not in _DEFAULTS:
        raise FamilyError(f"unknown family {req.name!r}; choose from {', '.join(FAMILIES)}")
    allowed = _DEFAULTS[req.name]
    extra = set(req.params) - set(allowed) - {"n"}
    if extra:
        raise FamilyError(f"{req.name} does not take parameter(s) {sorted(extra)}")
    params = {**allowed, **req.params}
    name = req.name
    if name == "counterexample":
        return counterexample_defs()
    if name == "frieze":
        c = params["c"]
        if c is None:
            raise FamilyError("frieze needs c values")
        if params.get("n") is not None and int(params["n"]) != len(c):
            raise FamilyError(f"frieze n = {params['n']} but {len(c)} c values given")
        return frieze_defs(c, ctx)
    if name == "somos":
        k = int(params["k"])
        a = params["a"] if params["a"] is not None else [1] * (k // 2)
        return somos_defs(k, a, int(params["length"]))
    if name == "fz54":
        return fz54_defs(params["c"], params["d"], params["x0"], params["x1"], int(params["length"]))
    if name == "dodgson":
        if params["matrix"] is None:
            raise FamilyError("dodgson needs a matrix")
        return dodgson_defs(params["matrix"])
    return polynomial_demo_defs(int(params["length"]), params["a"], params["b"], params["x0"], params["x1"])


def builtin_family(req: FamilyRequest, ctx: PrimeContext) -> RecurrenceSpec:
    return build_spec(family_defs(req, ctx), ctx)


def _fmt(x) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator) if x >= 0 else f"({x.numerator})"
    return f"({x.numerator}/{x.denominator})"


def family_source(req: FamilyRequest, p: int | None = None) -> str:
    """``.rec`` text for a family; loops are used where the family has them."""
    family_defs(req)  # validates arity
    params = {**_DEFAULTS[req.name], **req.params}
    lines = [f"# {req.name} family"]
    if p is not None:
        lines.append(f"prime {p};")
    name = req.name
    if name == "counterexample":
        lines += ["x[0] = 5;", "x[1] = -5;", "x[n] = (x[n-1] - 1) / x[n-2] for n in 2..7;"]
    elif name == "frieze":
        c = params["c"]
        n = len(c)
        lines.append(f"x[0, b] = 1 for b in 0..{n};")
        lines += [f"x[1, {b}] = {_fmt(cb)};" for b, cb in enumerate(c)]
        for a in range(2, n + 1):
            lines.append(f"x[{a}, b] = (x[{a - 1}, b] * x[{a - 1}, b + 1] - 1) / x[{a - 2}, b + 1] for b in 0..{n - a};")
    elif name == "somos":
        k = int(params["k"])
        a = params["a"] if params["a"] is not None else [1] * (k // 2)
        length = int(params["length"])
        for i, ai in enumerate(a, start=1):
            lines.append(f"param a{i} = {Fraction(ai)};")
        lines.append(f"x[n] = 1 for n in 0..{k - 1};")
        if length >= k:
            terms = " + ".join(f"a{i} * x[n - {k - i}] * x[n - {i}]" for i in range(1, len(a) + 1))
            lines.append(f"x[n] = ({terms}) / x[n - {k}] for n in {k}..{length};")
    elif name == "fz54":
        lines += [f"param c = {Fraction(params['c'])};", f"param d = {Fraction(params['d'])};",
                  f"x[0] = {_fmt(params['x0'])};", f"x[1] = {_fmt(params['x1'])};",
                  f"x[n] = (x[n-1]^2 + c * x[n-1] + d) / x[n-2] for n in 2..{int(params['length'])};"]
    elif name == "dodgson":
        M = params["matrix"]
        n = len(M)
        for i in range(n + 1):
            lines.append(f"x[0, {i}, j] = 1 for j in 0..{n};")
        for i in range(n):
            for j in range(n):
                lines.append(f"x[1, {i}, {j}] = {_fmt(M[i][j])};")
        for k in range(2, n + 1):
            for i in range(n - k + 1):
                lines.append(
                    f"x[{k}, {i}, j] = (x[{k - 1}, {i}, j] * x[{k - 1}, {i + 1}, j + 1]"
                    f" - x[{k - 1}, {i}, j + 1] * x[{k - 1}, {i + 1}, j]) / x[{k - 2}, {i + 1}, j + 1]"
                    f" for j in 0..{n - k};")
    else:
        lines += [f"param a = {Fraction(params['a'])};", f"param b = {Fraction(params['b'])};",
                  f"x[0] = {_fmt(params['x0'])};", f"x[1] = {_fmt(params['x1'])};",
                  f"x[n] = x[n-1] * x[n-2] + a * x[n-1] + b for n in 2..{int(params['length'])};"]
    return "\n".join(lines) + "\n"
