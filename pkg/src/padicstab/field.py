"""Exact rationals with p-adic valuations.

Rationals are plain :class:`fractions.Fraction` values.  A valuation is an
``int`` or the float ``INF`` (for zero); ``INF`` compares and adds correctly
against ints, which keeps the formulas elsewhere readable.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

INF = float("inf")

Valuation = Union[int, float]
Rational = Union[int, Fraction]

# Deterministic Miller-Rabin witnesses, valid for n < 3.3e24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
_MR_LIMIT = 3317044064679887385961981


class DegenerateInputError(ValueError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    if n >= _MR_LIMIT:
        raise ValueError(f"primality of {n} is outside the deterministic range")
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class PrimeContext:
    """The prime defining the valuation in use."""

    p: int

    def __post_init__(self):
        if not isinstance(self.p, int) or not is_prime(self.p):
            raise ValueError(f"p = {self.p!r} is not a prime")

    def v(self, x: Rational) -> Valuation:
        return valuation(x, self)


def int_valuation(n: int, p: int) -> Valuation:
    """Exponent of ``p`` in the integer ``n`` (``INF`` for 0)."""
    if n == 0:
        return INF
    n = abs(n)
    k = 0
    # strip p^(2^j) chunks first so huge powers of p stay cheap
    chunks = [p]
    while n % chunks[-1] == 0 and chunks[-1] <= n:
        chunks.append(chunks[-1] * chunks[-1])
    for j in range(len(chunks) - 1, -1, -1):
        q = chunks[j]
        while n % q == 0:
            n //= q
            k += 1 << j
    return k


def valuation(x: Rational, ctx: PrimeContext | int) -> Valuation:
    p = ctx.p if isinstance(ctx, PrimeContext) else ctx
    x = Fraction(x)
    if x == 0:
        return INF
    return int_valuation(x.numerator, p) - int_valuation(x.denominator, p)


def unit_part(x: Rational, p: int) -> tuple[Fraction, int]:
    """Split nonzero ``x`` as ``u * p**k`` with ``v(u) == 0``; returns ``(u, k)``."""
    x = Fraction(x)
    if x == 0:
        raise ValueError("zero has no unit part")
    k = valuation(x, p)
    return x / Fraction(p) ** k, k


def normalize_coefficients(
    coeffs: Sequence[Rational], ctx: PrimeContext
) -> tuple[list[Fraction], int]:
    """Divide ``coeffs`` by ``p**k`` so that their minimum valuation is 0.

    Returns the rescaled list and ``k``.  Zero entries are allowed as long as
    at least one coefficient is nonzero.
    """
    if not coeffs:
        raise DegenerateInputError("empty coefficient list")
    vals = [valuation(c, ctx) for c in coeffs]
    k = min(vals)
    if k == INF:
        raise DegenerateInputError("all coefficients are zero")
    scale = Fraction(ctx.p) ** k
    return [Fraction(c) / scale for c in coeffs], k


def min_valuation(xs: Iterable[Rational], ctx: PrimeContext) -> Valuation:
    return min((valuation(x, ctx) for x in xs), default=INF)


def format_rational(x: Rational) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(text: str) -> Fraction:
    return Fraction(text.strip())


def format_valuation(v: Valuation):
    """JSON-friendly valuation: ints stay ints, infinity becomes ``"inf"``."""
    if v == INF:
        return "inf"
    if v == -INF:
        return "-inf"
    return int(v)
