"""Emulated p-adic floating point with N-digit mantissas.

A :class:`PFloat` of kind ``NUMBER`` is a pair (mantissa, exponent) standing
for every p-adic number ``u * p**exponent`` with ``u`` a unit congruent to the
mantissa mod ``p**N``.  When an addition cancels leading digits the vacated
high-order digits are unknown; they are filled from a :class:`DigitSource`.

Fixed-point arithmetic (plain residues mod ``p**N``) lives at the bottom of
this module.
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .field import INF, Rational, Valuation, int_valuation, valuation


class PrecisionFailure(ArithmeticError):
    """Division by an exact zero or by a value whose digits were all lost."""


class FixedPointDivisionError(ArithmeticError):
    pass


class Kind(enum.Enum):
    NUMBER = "number"
    ZERO = "zero"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class PFloat:
    p: int
    N: int
    kind: Kind
    mantissa: int = 0
    # for UNKNOWN this is a lower bound on the valuation
    exponent: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.kind is Kind.NUMBER:
            if not (0 < self.mantissa < self.p**self.N) or self.mantissa % self.p == 0:
                raise ValueError(f"mantissa {self.mantissa} is not a unit mod {self.p}^{self.N}")

    @classmethod
    def zero(cls, p: int, N: int) -> "PFloat":
        return cls(p, N, Kind.ZERO)

    @classmethod
    def unknown(cls, p: int, N: int, bound: int) -> "PFloat":
        return cls(p, N, Kind.UNKNOWN, 0, bound)

    @property
    def modulus(self) -> int:
        return self.p**self.N

    def representative(self) -> Fraction:
        """A concrete rational represented by this value (0 for the sentinels)."""
        if self.kind is not Kind.NUMBER:
            return Fraction(0)
        return self.mantissa * Fraction(self.p) ** self.exponent

    def uncertainty(self) -> Valuation:
        """Valuation bound on ``true value - representative()``."""
        if self.kind is Kind.ZERO:
            return INF
        if self.kind is Kind.UNKNOWN:
            return self.exponent
        return self.exponent + self.N

    def valuation(self) -> Valuation:
        """Valuation of the value, or its lower bound for ``UNKNOWN``."""
        if self.kind is Kind.ZERO:
            return INF
        return self.exponent

    def __str__(self):
        if self.kind is Kind.ZERO:
            return "0"
        if self.kind is Kind.UNKNOWN:
            return f"O({self.p}^{self.exponent})"
        return f"{self.mantissa}*{self.p}^{self.exponent}"


def round_exact(x: Rational, p: int, N: int) -> PFloat:
    x = Fraction(x)
    if x == 0:
        return PFloat.zero(p, N)
    e = valuation(x, p)
    M = p**N
    num, den = x.numerator, x.denominator
    if e >= 0:
        num //= p**e
    else:
        den //= p ** (-e)
    return PFloat(p, N, Kind.NUMBER, num * pow(den, -1, M) % M, e)


def same_representation(x: Rational, y: Rational, p: int, N: int) -> bool:
    x, y = Fraction(x), Fraction(y)
    if x == 0 or y == 0:
        raise ValueError("same_representation is defined for nonzero values only")
    return valuation(y / x - 1, p) >= N


def _digest_int(*parts) -> int:
    h = hashlib.blake2b(repr(parts).encode(), digest_size=16)
    return int.from_bytes(h.digest(), "big")


def derive_seed(*parts) -> int:
    """64-bit seed derived from arbitrary hashable material."""
    return _digest_int("seed", *parts) & 0xFFFFFFFFFFFFFFFF


@dataclass
class DigitSource:
    """Deterministic stream of base-p digits addressed by (seed, position)."""

    p: int
    seed: int
    position: int = 0

    def digit_at(self, position: int) -> int:
        # 128-bit draw; bias against uniform is below 2^-100 for small p
        return _digest_int("digit", self.seed, position) % self.p

    def take(self, k: int) -> int:
        """Next ``k`` digits packed as an integer in ``[0, p**k)``, low digit first."""
        out = 0
        for i in range(k):
            out += self.digit_at(self.position) * self.p**i
            self.position += 1
        return out


class ZeroDigits(DigitSource):
    """A digit source that always emits 0."""

    def __init__(self, p: int):
        super().__init__(p, 0)

    def digit_at(self, position: int) -> int:
        return 0


@dataclass(frozen=True)
class ArithEvent:
    """Something notable that happened during one floating-point operation.

    ``witness`` is an integer ``t`` such that replacing the left operand by
    ``rep(x) + t * p**(exponent(x) + N)`` (a value still represented by ``x``)
    makes the exact result represented by the output.
    """

    kind: str  # "cancellation" | "total_cancellation" | "unknown_fill"
    digits: int
    witness: int = 0
    detail: dict = field(default_factory=dict, compare=False)


def _neg(x: PFloat) -> PFloat:
    if x.kind is not Kind.NUMBER:
        return x
    return PFloat(x.p, x.N, Kind.NUMBER, (-x.mantissa) % x.modulus, x.exponent)


def _add_numbers(x: PFloat, y: PFloat, digits: DigitSource) -> tuple[PFloat, list[ArithEvent]]:
    p, N, M = x.p, x.N, x.modulus
    if x.exponent > y.exponent:
        x, y = y, x
    d = y.exponent - x.exponent
    # exact sum of the representatives is p^e * S
    S = x.mantissa + y.mantissa * p**d
    if d > 0:
        return PFloat(p, N, Kind.NUMBER, S % M, x.exponent), []
    k = int_valuation(S, p)
    if k >= N:
        ev = ArithEvent("total_cancellation", N, 0, {"bound": x.exponent + N})
        return PFloat.unknown(p, N, x.exponent + N), [ev]
    if k == 0:
        return PFloat(p, N, Kind.NUMBER, S % M, x.exponent), []
    low_mod = p ** (N - k)
    shifted = S // p**k
    low = shifted % low_mod
    fill = digits.take(k)
    mant = low + low_mod * fill
    # witness: x~ = rep(x) + t p^(e+N) makes (S + p^N t) / p^k == mant mod p^N
    t = (fill - shifted // low_mod) % p**k
    ev = ArithEvent("cancellation", k, t)
    return PFloat(p, N, Kind.NUMBER, mant, x.exponent + k), [ev]


def _add_unknown(x: PFloat, u: PFloat, digits: DigitSource) -> tuple[PFloat, list[ArithEvent]]:
    """``x + u`` where ``u`` is UNKNOWN and ``x`` is a NUMBER."""
    p, N = x.p, x.N
    b = u.exponent
    if x.exponent >= b:
        return PFloat.unknown(p, N, b), []
    known = b - x.exponent
    if known >= N:
        return x, []
    low_mod = p**known
    fill = digits.take(N - known)
    mant = x.mantissa % low_mod + low_mod * fill
    ev = ArithEvent("unknown_fill", N - known, 0, {"bound": b})
    return PFloat(p, N, Kind.NUMBER, mant, x.exponent), [ev]


def float_arith(op: str, x: PFloat, y: PFloat, digits: DigitSource) -> tuple[PFloat, list[ArithEvent]]:
    """Apply ``op`` in {"add", "sub", "mul", "div"} to two PFloats."""
    if (x.p, x.N) != (y.p, y.N):
        raise ValueError("operands carry different (p, N)")
    p, N = x.p, x.N
    if op == "sub":
        return float_arith("add", x, _neg(y), digits)
    if op == "add":
        if x.kind is Kind.ZERO:
            return y, []
        if y.kind is Kind.ZERO:
            return x, []
        if x.kind is Kind.UNKNOWN and y.kind is Kind.UNKNOWN:
            return PFloat.unknown(p, N, min(x.exponent, y.exponent)), []
        if y.kind is Kind.UNKNOWN:
            return _add_unknown(x, y, digits)
        if x.kind is Kind.UNKNOWN:
            return _add_unknown(y, x, digits)
        return _add_numbers(x, y, digits)
    if op == "mul":
        if Kind.ZERO in (x.kind, y.kind):
            return PFloat.zero(p, N), []
        if Kind.UNKNOWN in (x.kind, y.kind):
            return PFloat.unknown(p, N, x.exponent + y.exponent), []
        return PFloat(p, N, Kind.NUMBER, x.mantissa * y.mantissa % x.modulus, x.exponent + y.exponent), []
    if op == "div":
        if y.kind is Kind.ZERO:
            raise PrecisionFailure("division by exact zero")
        if y.kind is Kind.UNKNOWN:
            raise PrecisionFailure("division by a value with no significant digits")
        if x.kind is Kind.ZERO:
            return x, []
        if x.kind is Kind.UNKNOWN:
            return PFloat.unknown(p, N, x.exponent - y.exponent), []
        M = x.modulus
        return PFloat(p, N, Kind.NUMBER, x.mantissa * pow(y.mantissa, -1, M) % M, x.exponent - y.exponent), []
    raise ValueError(f"unknown operation {op!r}")


# -- fixed point ----------------------------------------------------------


@dataclass(frozen=True)
class Residue:
    """An integer modulo ``p**N``, stored as its least nonnegative representative."""

    value: int
    p: int
    N: int

    def __post_init__(self):
        object.__setattr__(self, "value", self.value % self.p**self.N)

    @classmethod
    def from_rational(cls, x: Rational, p: int, N: int) -> "Residue":
        x = Fraction(x)
        if valuation(x, p) < 0:
            raise ValueError(f"{x} is not p-integral for p = {p}")
        M = p**N
        return cls(x.numerator * pow(x.denominator, -1, M), p, N)

    def valuation(self) -> Valuation:
        """Valuation of the least representative; ``INF`` for the zero class."""
        return int_valuation(self.value, self.p)

    def is_unit(self) -> bool:
        return self.value % self.p != 0


def fixed_arith(op: str, x: Residue, y: Residue) -> Residue:
    if (x.p, x.N) != (y.p, y.N):
        raise ValueError("operands carry different (p, N)")
    M = x.p**x.N
    if op == "add":
        return Residue(x.value + y.value, x.p, x.N)
    if op == "sub":
        return Residue(x.value - y.value, x.p, x.N)
    if op == "mul":
        return Residue(x.value * y.value, x.p, x.N)
    if op == "div":
        if not y.is_unit():
            raise FixedPointDivisionError(f"{y.value} is not a unit mod {x.p}^{x.N}")
        return Residue(x.value * pow(y.value, -1, M), x.p, x.N)
    raise ValueError(f"unknown operation {op!r}")


def fixed_divide_shifted(
    x: Residue, y: Residue, digits: DigitSource
) -> tuple[Residue, Optional[int]]:
    """Divide by a nonzero non-unit residue ``y = p^k w``.

    The quotient is known only mod ``p^(N-k)``; the top ``k`` digits come from
    ``digits``.  Returns ``(quotient, k)``.  Raises ``FixedPointDivisionError``
    if ``y`` is zero or ``x`` is not divisible by ``p^k`` (the quotient would
    not be p-integral).
    """
    p, N = x.p, x.N
    k = y.valuation()
    if k == INF:
        raise FixedPointDivisionError("division by the zero residue")
    if k == 0:
        return fixed_arith("div", x, y), 0
    if x.value % p**k:
        raise FixedPointDivisionError("quotient has negative valuation")
    low_mod = p ** (N - k)
    w = y.value // p**k
    q = (x.value // p**k) * pow(w, -1, low_mod) % low_mod
    return Residue(q + low_mod * digits.take(k), p, N), k
