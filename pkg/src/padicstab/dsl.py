"""The ``.rec`` text format for recurrences.

Example::

    # the counterexample
    x[0] = 5;
    x[1] = -5;
    x[n] = (x[n-1] - 1) / x[n-2] for n in 2..7;

Grammar::

    program := (prime | param | rule)*
    prime   := "prime" INT ";"
    param   := "param" IDENT "=" rational ";"?
    rule    := var "=" expr ("for" IDENT "in" INT ".." INT)? ";"
    var     := IDENT ("[" affine ("," affine)* "]")?
    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" INT)?
    atom    := INT | IDENT | var | "(" expr ")"

Index expressions must be affine in the rule's loop variable.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Union

from .field import PrimeContext
from .recurrence import NodeDef, Poly, RecurrenceError, RecurrenceSpec, build_spec, node_label

DEFAULT_MONOMIAL_CAP = 100_000


class DslError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.col = col


class LexError(DslError):
    pass


class DslSyntaxError(DslError):
    pass


class UnknownIdentifierError(DslError):
    pass


class NonAffineIndexError(DslError):
    pass


class ElaborationError(DslError):
    pass


# -- syntax tree ------------------------------------------------------------


@dataclass(frozen=True)
class Affine:
    const: int
    coeffs: tuple = ()  # ((loop variable, coefficient), ...), sorted, nonzero

    def eval(self, env: dict) -> int:
        return self.const + sum(c * env[v] for v, c in self.coeffs)


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Name:
    """A bare identifier: a parameter, the loop variable, or a scalar node."""

    name: str


@dataclass(frozen=True)
class Ref:
    name: str
    indices: tuple  # of Affine


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


Expr = Union[Num, Name, Ref, Neg, BinOp, Pow]


@dataclass(frozen=True)
class Loop:
    var: str
    lo: int
    hi: int


@dataclass(frozen=True)
class Rule:
    target: Union[Ref, Name]
    expr: Expr
    loop: Optional[Loop] = None
    line: int = 0

    def __eq__(self, other):
        # source position is not part of the structure
        return isinstance(other, Rule) and (self.target, self.expr, self.loop) == (
            other.target, other.expr, other.loop)

    def __hash__(self):
        return hash((self.target, self.expr, self.loop))


@dataclass(frozen=True)
class DslProgram:
    params: tuple = ()  # ((name, Fraction), ...)
    rules: tuple = ()
    prime: Optional[int] = None

    @property
    def param_map(self) -> dict:
        return dict(self.params)


# -- lexer ------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<range>\.\.)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^=;,\[\]()])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"param", "for", "in", "prime"}


@dataclass(frozen=True)
class Token:
    kind: str  # int | ident | keyword | op | range | eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise LexError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and chunk in _KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# -- parser -----------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, msg: str, tok: Token | None = None, cls=DslSyntaxError):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return cls(f"{msg} (found {found})", tok.line, tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "keyword", "range"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.tok
        if not self.accept(text):
            raise self.error(f"expected {text!r}")
        return tok

    def expect_kind(self, kind: str, what: str) -> Token:
        tok = self.tok
        if tok.kind != kind:
            raise self.error(f"expected {what}")
        self.i += 1
        return tok

    def program(self) -> DslProgram:
        params: dict = {}
        rules = []
        prime = None
        while self.tok.kind != "eof":
            if self.accept("param"):
                name_tok = self.expect_kind("ident", "parameter name")
                if name_tok.text in params:
                    raise self.error(f"parameter {name_tok.text!r} declared twice", name_tok)
                self.expect("=")
                params[name_tok.text] = self.rational()
                self.accept(";")
            elif self.accept("prime"):
                prime = int(self.expect_kind("int", "a prime").text)
                self.expect(";")
            else:
                rules.append(self.rule())
        return DslProgram(tuple(params.items()), tuple(rules), prime)

    def rational(self) -> Fraction:
        sign = -1 if self.accept("-") else 1
        num = int(self.expect_kind("int", "an integer").text)
        den = 1
        if self.accept("/"):
            tok = self.expect_kind("int", "a denominator")
            den = int(tok.text)
            if den == 0:
                raise self.error("zero denominator", tok)
        return sign * Fraction(num, den)

    def rule(self) -> Rule:
        start = self.tok
        target = self.var()
        self.expect("=")
        expr = self.expr()
        loop = None
        if self.accept("for"):
            var = self.expect_kind("ident", "loop variable").text
            self.expect("in")
            lo = self.signed_int()
            self.expect("..")
            hi = self.signed_int()
            loop = Loop(var, lo, hi)
        self.expect(";")
        return Rule(target, expr, loop, start.line)

    def signed_int(self) -> int:
        sign = -1 if self.accept("-") else 1
        return sign * int(self.expect_kind("int", "an integer").text)

    def var(self) -> Union[Ref, Name]:
        name = self.expect_kind("ident", "a variable name").text
        if not self.accept("["):
            return Name(name)
        indices = [self.affine()]
        while self.accept(","):
            indices.append(self.affine())
        self.expect("]")
        return Ref(name, tuple(indices))

    # index expressions: parsed as linear forms {var: coeff, "": const}
    def affine(self) -> Affine:
        lin = self.index_sum()
        const = lin.pop("", 0)
        return Affine(const, tuple(sorted((v, c) for v, c in lin.items() if c)))

    def index_sum(self) -> dict:
        lin = self.index_product()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            sign = 1 if self.tok.text == "+" else -1
            self.i += 1
            rhs = self.index_product()
            for k, v in rhs.items():
                lin[k] = lin.get(k, 0) + sign * v
        return lin

    def index_product(self) -> dict:
        start = self.tok
        lin = self.index_atom()
        while self.tok.text == "*" and self.tok.kind == "op":
            self.i += 1
            rhs = self.index_atom()
            if set(lin) - {""} and set(rhs) - {""}:
                raise NonAffineIndexError("index expression is not affine", start.line, start.col)
            if set(rhs) - {""}:
                lin, rhs = rhs, lin
            factor = rhs.get("", 0)
            lin = {k: v * factor for k, v in lin.items()}
        return lin

    def index_atom(self) -> dict:
        tok = self.tok
        if self.accept("-"):
            return {k: -v for k, v in self.index_atom().items()}
        if self.accept("("):
            lin = self.index_sum()
            self.expect(")")
            return lin
        if tok.kind == "int":
            self.i += 1
            return {"": int(tok.text)}
        if tok.kind == "ident":
            self.i += 1
            return {tok.text: 1}
        if tok.text in ("/", "^"):
            raise NonAffineIndexError("index expression is not affine", tok.line, tok.col)
        raise self.error("expected an index expression")

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            tok = self.expect_kind("int", "a nonnegative integer exponent")
            return Pow(base, int(tok.text))
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "int":
            self.i += 1
            return Num(int(tok.text))
        if tok.kind == "ident":
            return self.var()
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        raise self.error("expected an expression")


def _walk(expr: Expr) -> Iterator[Expr]:
    yield expr
    if isinstance(expr, Neg):
        yield from _walk(expr.operand)
    elif isinstance(expr, BinOp):
        yield from _walk(expr.left)
        yield from _walk(expr.right)
    elif isinstance(expr, Pow):
        yield from _walk(expr.base)


def _check_names(prog: DslProgram) -> None:
    params = prog.param_map
    scalars = {r.target.name for r in prog.rules if isinstance(r.target, Name)}
    arrays = {r.target.name for r in prog.rules if isinstance(r.target, Ref)}
    for rule in prog.rules:
        loop_var = rule.loop.var if rule.loop else None
        refs = [rule.target] + list(_walk(rule.expr))
        for node in refs:
            if isinstance(node, Ref):
                if node.name not in arrays:
                    raise UnknownIdentifierError(f"unknown indexed variable {node.name!r}", rule.line)
                for aff in node.indices:
                    for v, _ in aff.coeffs:
                        if v != loop_var:
                            raise UnknownIdentifierError(f"unknown index variable {v!r}", rule.line)
            elif isinstance(node, Name) and node is not rule.target:
                if node.name not in params and node.name not in scalars and node.name != loop_var:
                    raise UnknownIdentifierError(f"unknown identifier {node.name!r}", rule.line)
        if isinstance(rule.target, Name) and rule.target.name in params:
            raise DslSyntaxError(f"{rule.target.name!r} is a parameter and cannot be defined", rule.line)


def parse(text: str) -> DslProgram:
    """Parse ``.rec`` source text; ranges are recorded, not expanded."""
    if text.startswith("﻿"):
        text = text[1:]
    prog = _Parser(text).program()
    _check_names(prog)
    return prog


# -- printer ----------------------------------------------------------------


def _fmt_affine(a: Affine) -> str:
    parts = []
    for v, c in a.coeffs:
        term = v if abs(c) == 1 else f"{abs(c)}*{v}"
        if not parts:
            parts.append(term if c > 0 else f"-{term}")
        else:
            parts.append(f" + {term}" if c > 0 else f" - {term}")
    if a.const or not parts:
        if not parts:
            parts.append(str(a.const))
        else:
            parts.append(f" + {a.const}" if a.const > 0 else f" - {-a.const}")
    return "".join(parts)


def _fmt_var(v: Union[Ref, Name]) -> str:
    if isinstance(v, Name):
        return v.name
    return f"{v.name}[{', '.join(_fmt_affine(a) for a in v.indices)}]"


def format_expr(e: Expr) -> str:
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, (Name, Ref)):
        return _fmt_var(e)
    if isinstance(e, Neg):
        inner = format_expr(e.operand)
        if isinstance(e.operand, (BinOp, Neg)):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Pow):
        base = format_expr(e.base)
        if not isinstance(e.base, (Num, Name, Ref)):
            base = f"({base})"
        return f"{base}^{e.exponent}"
    left = format_expr(e.left)
    right = format_expr(e.right)
    # parenthesize so the printed text reparses to the same tree
    if e.op in "*/" and isinstance(e.left, BinOp) and e.left.op in "+-":
        left = f"({left})"
    if isinstance(e.right, BinOp) and (e.op in "*/" or e.right.op in "+-"):
        right = f"({right})"
    elif isinstance(e.right, Neg):
        right = f"({right})"
    return f"{left} {e.op} {right}"


def format_program(prog: DslProgram) -> str:
    lines = []
    if prog.prime is not None:
        lines.append(f"prime {prog.prime};")
    for name, value in prog.params:
        lines.append(f"param {name} = {value};")
    for rule in prog.rules:
        line = f"{_fmt_var(rule.target)} = {format_expr(rule.expr)}"
        if rule.loop:
            line += f" for {rule.loop.var} in {rule.loop.lo}..{rule.loop.hi}"
        lines.append(line + ";")
    return "\n".join(lines) + "\n"


# -- elaboration ------------------------------------------------------------

class _Elaborator:
    def __init__(self, prog: DslProgram, cap: int):
        self.params = prog.param_map
        self.scalars = {r.target.name for r in prog.rules if isinstance(r.target, Name)}
        self.cap = cap

    def check(self, poly: Poly, where: str) -> Poly:
        if len(poly) > self.cap:
            raise ElaborationError(f"{where}: expansion exceeds {self.cap} monomials")
        return poly

    def reduce(self, e: Expr, env: dict, where: str) -> tuple[Poly, Poly]:
        if isinstance(e, Num):
            return Poly.const(e.value), Poly.const(1)
        if isinstance(e, Name):
            if e.name in env:
                return Poly.const(env[e.name]), Poly.const(1)
            if e.name in self.params:
                val = self.params[e.name]
                return Poly.const(val.numerator), Poly.const(val.denominator)
            return Poly.var((e.name,)), Poly.const(1)
        if isinstance(e, Ref):
            return Poly.var((e.name, *(a.eval(env) for a in e.indices))), Poly.const(1)
        if isinstance(e, Neg):
            n, d = self.reduce(e.operand, env, where)
            return -n, d
        if isinstance(e, Pow):
            n, d = self.reduce(e.base, env, where)
            return self.check(n**e.exponent, where), self.check(d**e.exponent, where)
        ln, ld = self.reduce(e.left, env, where)
        rn, rd = self.reduce(e.right, env, where)
        if e.op in "+-":
            if e.op == "-":
                rn = -rn
            if ld == rd:
                return self.check(ln + rn, where), ld
            return self.check(ln * rd + rn * ld, where), self.check(ld * rd, where)
        if e.op == "*":
            return self.check(ln * rn, where), self.check(ld * rd, where)
        if rn.is_zero():
            raise ElaborationError(f"{where}: division by an expression that is identically zero")
        return self.check(ln * rd, where), self.check(ld * rn, where)


def expand_rules(prog: DslProgram) -> Iterator[tuple]:
    """Yield ``(node id, expression, loop environment, rule)`` after range expansion."""
    for rule in prog.rules:
        if rule.loop is None:
            envs = [{}]
        else:
            if rule.loop.hi < rule.loop.lo:
                raise ElaborationError(
                    f"range {rule.loop.lo}..{rule.loop.hi} is empty or descending", rule.line)
            envs = [{rule.loop.var: k} for k in range(rule.loop.lo, rule.loop.hi + 1)]
        for env in envs:
            t = rule.target
            node = (t.name,) if isinstance(t, Name) else (t.name, *(a.eval(env) for a in t.indices))
            yield node, rule.expr, env, rule


def elaborate(prog: DslProgram, ctx: PrimeContext, monomial_cap: int = DEFAULT_MONOMIAL_CAP) -> RecurrenceSpec:
    el = _Elaborator(prog, monomial_cap)
    defs = []
    seen: dict = {}
    for node, expr, env, rule in expand_rules(prog):
        label = node_label(node)
        if node in seen:
            raise ElaborationError(f"{label} is defined more than once", rule.line)
        seen[node] = rule
        num, den = el.reduce(expr, env, label)
        if den.is_zero():
            raise ElaborationError(f"{label}: denominator reduces to the zero polynomial", rule.line)
        defs.append(NodeDef.from_fraction(node, num, den))
    try:
        return build_spec(defs, ctx)
    except RecurrenceError as exc:
        raise ElaborationError(str(exc)) from None


def program_prime(prog: DslProgram, default: int | None = None) -> int | None:
    return prog.prime if prog.prime is not None else default
