import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from padicstab.field import (
    INF,
    DegenerateInputError,
    PrimeContext,
    format_rational,
    format_valuation,
    is_prime,
    min_valuation,
    normalize_coefficients,
    parse_rational,
    unit_part,
    valuation,
)

P2, P3, P5 = PrimeContext(2), PrimeContext(3), PrimeContext(5)

rationals = st.fractions(max_denominator=10**6).filter(lambda x: abs(x.numerator) < 10**12)


def naive_valuation(x: Fraction, p: int):
    # independent oracle: strip factors one at a time
    if x == 0:
        return INF
    v, a, b = 0, abs(x.numerator), x.denominator
    while a % p == 0:
        a //= p
        v += 1
    while b % p == 0:
        b //= p
        v -= 1
    return v


@pytest.mark.parametrize("x, ctx, expected", [
    (Fraction(663, 140), P2, -2),
    (Fraction(-40, 33), P2, 3),
    (Fraction(0), P3, INF),
    (Fraction(1, 243), P3, -5),
    (-7, P5, 0),
])
def test_valuation_examples(x, ctx, expected):
    assert valuation(x, ctx) == expected


def test_prime_context_rejects_composites():
    for bad in (0, 1, 4, 9, 561, -3):
        with pytest.raises(ValueError):
            PrimeContext(bad)


def test_is_prime_against_sieve():
    sieve = [True] * 2000
    sieve[0] = sieve[1] = False
    for i in range(2, 2000):
        if sieve[i]:
            for j in range(i * i, 2000, i):
                sieve[j] = False
    assert [n for n in range(2000) if is_prime(n)] == [n for n in range(2000) if sieve[n]]
    assert is_prime(2**61 - 1) and not is_prime((2**31 - 1) * (2**19 - 1))


def test_valuation_matches_naive_oracle():
    rng = random.Random(1)
    for _ in range(2000):
        p = rng.choice([2, 3, 5, 7, 11])
        x = Fraction(rng.randint(-10**9, 10**9), rng.randint(1, 10**9)) * Fraction(p) ** rng.randint(-20, 20)
        assert valuation(x, p) == naive_valuation(x, p)


def test_ultrametric_and_multiplicative_random_pairs():
    # 10^4 random pairs
    rng = random.Random(7)
    for _ in range(10_000):
        p = rng.choice([2, 3, 5])
        x = Fraction(rng.randint(-999, 999), rng.randint(1, 999)) * Fraction(p) ** rng.randint(-6, 6)
        y = Fraction(rng.randint(-999, 999), rng.randint(1, 999)) * Fraction(p) ** rng.randint(-6, 6)
        vx, vy = valuation(x, p), valuation(y, p)
        assert valuation(x + y, p) >= min(vx, vy)
        if vx != vy:
            assert valuation(x + y, p) == min(vx, vy)
        assert valuation(x * y, p) == vx + vy


@given(rationals.filter(lambda x: x != 0), st.sampled_from([2, 3, 5, 7]))
def test_unit_part_recombines(x, p):
    u, e = unit_part(x, p)
    assert valuation(u, p) == 0
    assert u * Fraction(p) ** e == x


@pytest.mark.parametrize("coeffs, ctx, expected", [
    ([Fraction(1, 2), 3], P2, ([1, 6], -1)),
    ([4, 8, 12], P2, ([1, 2, 3], 2)),
    ([Fraction(9, 7), 0, Fraction(-27)], P3, ([Fraction(1, 7), 0, -3], 2)),
])
def test_normalize_examples(coeffs, ctx, expected):
    out, k = normalize_coefficients([Fraction(c) for c in coeffs], ctx)
    assert (out, k) == ([Fraction(c) for c in expected[0]], expected[1])


def test_normalize_all_zero_rejected():
    with pytest.raises(DegenerateInputError):
        normalize_coefficients([Fraction(0), Fraction(0)], P2)


@given(st.lists(rationals, min_size=1, max_size=6).filter(any), st.sampled_from([2, 3, 5]))
def test_normalize_properties(coeffs, p):
    ctx = PrimeContext(p)
    out, k = normalize_coefficients(coeffs, ctx)
    assert min_valuation(out, ctx) == 0
    assert [c * Fraction(p) ** k for c in out] == list(coeffs)
    again, k2 = normalize_coefficients(out, ctx)
    assert (again, k2) == (out, 0)


@given(rationals)
def test_rational_text_round_trip(x):
    assert parse_rational(format_rational(x)) == x


def test_format_valuation():
    assert format_valuation(INF) == "inf"
    assert format_valuation(-3) == -3
