"""Recurrences over finite posets and their exact solutions.

A node is identified by a tuple ``(tag, *indices)``, e.g. ``("x", 3)`` or
``("x", 2, 1)``.  Each node carries a rational function ``P/Q`` in its
predecessors, stored as expanded monomial sums so that every coefficient can
later receive its own gremlin factor.  The partial order is always derived from
the dependencies.
"""
from __future__ import annotations

import graphlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .field import DegenerateInputError, PrimeContext, Rational, normalize_coefficients

NodeId = tuple  # (tag: str, *indices: int)
Monomial = tuple  # sorted ((NodeId, exponent), ...)


class RecurrenceError(ValueError):
    pass


class CyclicDependencyError(RecurrenceError):
    pass


class UndefinedNodeError(RecurrenceError):
    pass


class DivisionByZero(ArithmeticError):
    """The exact denominator of ``node`` vanishes, so no solution exists."""

    def __init__(self, node: NodeId, partial: dict | None = None):
        super().__init__(f"denominator of {node_label(node)} vanishes")
        self.node = node
        self.partial = partial or {}


def node_label(node: NodeId) -> str:
    tag, *idx = node
    if not idx:
        return tag
    return f"{tag}[{','.join(str(i) for i in idx)}]"


def parse_node_label(label: str) -> NodeId:
    label = label.strip()
    if "[" not in label:
        return (label,)
    tag, rest = label.split("[", 1)
    inner = rest.rstrip("]")
    return (tag.strip(), *(int(i) for i in inner.split(",")))


class Poly:
    """Multivariate polynomial over Q keyed by node variables.

    Used while building recurrences (DSL elaboration, family generators);
    :class:`NodeDef` converts it to exponent tuples over a fixed predecessor
    list.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, Rational] | None = None):
        self.terms: dict[Monomial, Fraction] = {}
        for m, c in (terms or {}).items():
            if c != 0:
                self.terms[m] = Fraction(c)

    @classmethod
    def const(cls, c: Rational) -> "Poly":
        return cls({(): c})

    @classmethod
    def var(cls, node: NodeId) -> "Poly":
        return cls({((node, 1),): 1})

    def is_zero(self) -> bool:
        return not self.terms

    def variables(self) -> set:
        return {n for m in self.terms for n, _ in m}

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __len__(self):
        return len(self.terms)

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Poly(out)

    def __pow__(self, k: int) -> "Poly":
        if k < 0:
            raise ValueError("negative power of a polynomial")
        out, base = Poly.const(1), self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __repr__(self):
        return f"Poly({self.terms!r})"


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    exps = dict(m1)
    for n, e in m2:
        exps[n] = exps.get(n, 0) + e
    return tuple(sorted(exps.items()))


@dataclass(frozen=True)
class SparsePoly:
    """Sum of ``coeff * x**exps`` with ``exps`` indexed by a predecessor list.

    Terms are kept sorted by exponent tuple; zero coefficients are never stored.
    """

    terms: tuple = ()  # ((exps, Fraction), ...)

    @classmethod
    def from_poly(cls, poly: Poly, preds: Sequence[NodeId]) -> "SparsePoly":
        pos = {n: i for i, n in enumerate(preds)}
        terms = []
        for m, c in poly.terms.items():
            exps = [0] * len(preds)
            for n, e in m:
                exps[pos[n]] = e
            terms.append((tuple(exps), c))
        return cls(tuple(sorted(terms)))

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not any(exps) for exps, _ in self.terms)

    @property
    def coefficients(self) -> list[Fraction]:
        return [c for _, c in self.terms]

    def scaled(self, factor: Fraction) -> "SparsePoly":
        return SparsePoly(tuple((e, c * factor) for e, c in self.terms))

    def __len__(self):
        return len(self.terms)


def monomial_value(exps: Sequence[int], point: Sequence[Fraction]) -> Fraction:
    out = Fraction(1)
    for e, x in zip(exps, point):
        if e:
            out *= x**e
    return out


@dataclass(frozen=True)
class NodeDef:
    id: NodeId
    predecessors: tuple
    P: SparsePoly
    Q: SparsePoly

    @classmethod
    def from_fraction(cls, node: NodeId, num: Poly, den: Poly) -> "NodeDef":
        if den.is_zero():
            raise RecurrenceError(f"denominator of {node_label(node)} is the zero polynomial")
        preds = tuple(sorted(num.variables() | den.variables()))
        return cls(node, preds, SparsePoly.from_poly(num, preds), SparsePoly.from_poly(den, preds))

    @classmethod
    def constant(cls, node: NodeId, value: Rational) -> "NodeDef":
        value = Fraction(value)
        return cls.from_fraction(node, Poly.const(value.numerator), Poly.const(value.denominator))

    @property
    def is_initial(self) -> bool:
        return not self.predecessors


def eval_fraction(node: NodeDef, values: Mapping[NodeId, Fraction]) -> tuple[Fraction, Fraction]:
    """Exact ``(P(values), Q(values))``, unreduced."""
    point = [values[t] for t in node.predecessors]
    P = sum((c * monomial_value(e, point) for e, c in node.P.terms), Fraction(0))
    Q = sum((c * monomial_value(e, point) for e, c in node.Q.terms), Fraction(0))
    return P, Q


@dataclass(frozen=True)
class RecurrenceSpec:
    ctx: PrimeContext
    nodes: tuple  # NodeDefs in topological order
    below: Mapping = field(repr=False)  # node -> frozenset of strictly smaller nodes
    normalization: Mapping = field(repr=False)  # node -> power of p divided out of (P, Q)

    @property
    def ids(self) -> list:
        return [d.id for d in self.nodes]

    def __getitem__(self, node: NodeId) -> NodeDef:
        return self._index[node]

    def __contains__(self, node) -> bool:
        return node in self._index

    def __len__(self):
        return len(self.nodes)

    @property
    def _index(self) -> dict:
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {d.id: d for d in self.nodes}
            object.__setattr__(self, "_idx", idx)
        return idx

    def less(self, t: NodeId, s: NodeId) -> bool:
        return t in self.below[s]

    def leq(self, t: NodeId, s: NodeId) -> bool:
        return t == s or t in self.below[s]

    def initial_nodes(self) -> list:
        return [d.id for d in self.nodes if d.is_initial]

    def is_division_free(self) -> bool:
        return all(len(d.Q) == 1 and d.Q.terms[0] == (tuple([0] * len(d.predecessors)), 1)
                   for d in self.nodes)


def build_spec(defs: Iterable[NodeDef], ctx: PrimeContext) -> RecurrenceSpec:
    """Validate, normalize and topologically order a list of node definitions."""
    defs = list(defs)
    by_id: dict = {}
    for d in defs:
        if d.id in by_id:
            raise RecurrenceError(f"node {node_label(d.id)} defined twice")
        by_id[d.id] = d
    for d in defs:
        if d.Q.is_zero():
            raise RecurrenceError(f"denominator of {node_label(d.id)} is the zero polynomial")
        for t in d.predecessors:
            if t not in by_id:
                raise UndefinedNodeError(f"{node_label(d.id)} refers to undefined node {node_label(t)}")
        if d.is_initial != (d.P.is_constant() and d.Q.is_constant()):
            raise RecurrenceError(f"predecessor list of {node_label(d.id)} does not match its polynomials")

    sorter = graphlib.TopologicalSorter({d.id: d.predecessors for d in defs})
    try:
        raw_order = list(sorter.static_order())
    except graphlib.CycleError as exc:
        cycle = " -> ".join(node_label(n) for n in exc.args[1])
        raise CyclicDependencyError(f"cyclic dependencies: {cycle}") from None

    depth: dict = {}
    below: dict = {}
    for s in raw_order:
        preds = by_id[s].predecessors
        depth[s] = 1 + max((depth[t] for t in preds), default=-1)
        acc = set(preds)
        for t in preds:
            acc |= below[t]
        below[s] = frozenset(acc)
    order = sorted(raw_order, key=lambda s: (depth[s], s))

    normalized = []
    shifts = {}
    for s in order:
        d = by_id[s]
        coeffs = d.P.coefficients + d.Q.coefficients
        try:
            _, k = normalize_coefficients(coeffs, ctx)
        except DegenerateInputError:
            raise RecurrenceError(f"node {node_label(s)} has no nonzero coefficient") from None
        shifts[s] = k
        if k:
            scale = Fraction(ctx.p) ** -k
            d = NodeDef(d.id, d.predecessors, d.P.scaled(scale), d.Q.scaled(scale))
        normalized.append(d)
    return RecurrenceSpec(ctx, tuple(normalized), below, shifts)


def solve_exact(spec: RecurrenceSpec) -> dict:
    """The unique exact solution, computed in topological order."""
    g: dict = {}
    for d in spec.nodes:
        P, Q = eval_fraction(d, g)
        if Q == 0:
            raise DivisionByZero(d.id, dict(g))
        g[d.id] = P / Q
    return g
