import random
from fractions import Fraction

import pytest

from padicstab.field import valuation
from padicstab.pfloat import (
    DigitSource,
    FixedPointDivisionError,
    Kind,
    PFloat,
    PrecisionFailure,
    Residue,
    ZeroDigits,
    derive_seed,
    fixed_arith,
    fixed_divide_shifted,
    float_arith,
    round_exact,
    same_representation,
)


def represents(z: PFloat, value: Fraction) -> bool:
    """Definitional: does the float ``z`` stand for the exact ``value``?"""
    if z.kind is Kind.ZERO:
        return value == 0
    if z.kind is Kind.UNKNOWN:
        return valuation(value, z.p) >= z.exponent
    return value != 0 and valuation(value / z.representative() - 1, z.p) >= z.N


def rand_rational(rng, p, spread=6):
    num = rng.randint(-10**6, 10**6) or 1
    return Fraction(num, rng.randint(1, 10**6)) * Fraction(p) ** rng.randint(-spread, spread)


@pytest.mark.parametrize("x, p, N, mant, exp", [
    (5, 3, 4, 5, 0),
    (Fraction(-6, 5), 2, 6, 25, 1),
    (Fraction(1, 9), 3, 2, 1, -2),
    (-1, 5, 3, 124, 0),
])
def test_round_exact_examples(x, p, N, mant, exp):
    z = round_exact(x, p, N)
    assert (z.kind, z.mantissa, z.exponent) == (Kind.NUMBER, mant, exp)


def test_round_exact_modular_inverse_oracle():
    # -6/5 = 2 * (-3/5); 5^-1 = 13 mod 64
    assert 5 * 13 % 64 == 1
    assert round_exact(Fraction(-6, 5), 2, 6).mantissa == (-3 * 13) % 64


def test_round_exact_zero():
    assert round_exact(0, 7, 3).kind is Kind.ZERO


def test_round_exact_invariant_under_gremlins():
    rng = random.Random(3)
    for _ in range(1000):
        p, N = rng.choice([2, 3, 5]), rng.randint(1, 10)
        x = rand_rational(rng, p)
        u = Fraction(rng.randint(-10**5, 10**5), rng.randint(1, 10**5))
        if valuation(u, p) < 0:
            continue
        y = x * (1 + Fraction(p) ** N * u)
        assert round_exact(x, p, N) == round_exact(y, p, N)
        assert represents(round_exact(x, p, N), x)


@pytest.mark.parametrize("x, y, p, N, expected", [
    (1, 1 + 2**6, 2, 6, True),
    (1, 1 + 2**5, 2, 6, False),
    (Fraction(1, 3), Fraction(1, 3) * (1 + 3**4 * 7), 3, 4, True),
    (10, -10, 5, 1, False),
])
def test_same_representation_examples(x, y, p, N, expected):
    assert same_representation(x, y, p, N) is expected


def test_same_representation_rejects_zero():
    with pytest.raises(ValueError):
        same_representation(0, 1, 2, 4)


def test_same_representation_matches_rounding():
    # definitional predicate vs equality of rounded forms
    rng = random.Random(11)
    for _ in range(1000):
        p, N = rng.choice([2, 3, 5, 7]), rng.randint(1, 8)
        x = rand_rational(rng, p)
        y = x * (1 + rand_rational(rng, p, 3) * Fraction(p) ** rng.randint(0, N + 2))
        if y == 0:
            continue
        pred = valuation(y / x - 1, p) >= N
        assert same_representation(x, y, p, N) is pred
        assert (round_exact(x, p, N) == round_exact(y, p, N)) is pred


def test_mul_example():
    z, ev = float_arith("mul", round_exact(3, 2, 4), round_exact(10, 2, 4), ZeroDigits(2))
    assert (z.mantissa, z.exponent, ev) == (15, 1, [])


def test_total_cancellation_gives_unknown():
    z, ev = float_arith("add", round_exact(1, 2, 4), round_exact(15, 2, 4), ZeroDigits(2))
    assert z.kind is Kind.UNKNOWN and z.exponent == 4
    assert z.uncertainty() == 4
    assert [e.kind for e in ev] == ["total_cancellation"]


def test_partial_cancellation_fills_digits():
    src = DigitSource(3, 42)
    z, ev = float_arith("sub", round_exact(10, 3, 3), round_exact(1, 3, 3), src)
    assert z.kind is Kind.NUMBER and z.exponent == 2
    assert ev[0].kind == "cancellation" and ev[0].digits == 2
    assert z.mantissa % 3 == 1  # 9 = 3^2 * 1, the known digit


def test_division_by_zero_and_unknown_fail():
    one = round_exact(1, 2, 4)
    with pytest.raises(PrecisionFailure):
        float_arith("div", one, PFloat.zero(2, 4), ZeroDigits(2))
    with pytest.raises(PrecisionFailure):
        float_arith("div", one, PFloat.unknown(2, 4, 3), ZeroDigits(2))


def test_mixed_parameters_rejected():
    with pytest.raises(ValueError):
        float_arith("add", round_exact(1, 2, 4), round_exact(1, 2, 5), ZeroDigits(2))


@pytest.mark.parametrize("op", ["add", "sub", "mul", "div"])
def test_float_arith_soundness(op):
    # 10^3 pairs overall; each result must represent op applied to some
    # operands represented by the inputs (the witness names one for cancellations)
    rng = random.Random(hash(op) & 0xFFFF)
    for i in range(250):
        p, N = rng.choice([2, 3, 5]), rng.randint(1, 8)
        x = rand_rational(rng, p, 3)
        y = rand_rational(rng, p, 3)
        if op in ("add", "sub") and rng.random() < 0.4:
            y = (-x if op == "add" else x) * (1 + Fraction(p) ** rng.randint(0, N + 1) * rng.randint(1, 9))
        X, Y = round_exact(x, p, N), round_exact(y, p, N)
        Z, events = float_arith(op, X, Y, DigitSource(p, i))
        xt, yt = X.representative(), Y.representative()
        if op == "sub":
            # subtraction adds the rounded negation, whose representative
            # differs from -rep(Y) by a multiple of p^(e+N)
            M = p**N
            yt = -PFloat(p, N, Kind.NUMBER, -Y.mantissa % M, Y.exponent).representative()
        for e in events:
            if e.kind == "cancellation":
                xt = xt + e.witness * Fraction(p) ** (X.exponent + N)
        assert represents(X, xt) and represents(Y, yt)
        exact = {"add": xt + yt, "sub": xt - yt, "mul": xt * yt, "div": xt / yt}[op]
        assert represents(Z, exact), (op, x, y, p, N, Z, events)


def test_unknown_arithmetic():
    u = PFloat.unknown(3, 4, 2)
    x = round_exact(1, 3, 4)
    z, ev = float_arith("add", x, u, DigitSource(3, 0))
    assert z.kind is Kind.NUMBER and z.mantissa % 9 == 1 and ev[0].kind == "unknown_fill"
    assert float_arith("mul", u, round_exact(9, 3, 4), ZeroDigits(3))[0] == PFloat.unknown(3, 4, 4)
    assert float_arith("add", u, PFloat.unknown(3, 4, 5), ZeroDigits(3))[0].exponent == 2


def test_digit_source_is_deterministic():
    a, b = DigitSource(5, 99), DigitSource(5, 99)
    assert a.take(20) == b.take(20)
    assert all(0 <= DigitSource(7, 1).digit_at(i) < 7 for i in range(50))
    assert derive_seed(1, "x") == derive_seed(1, "x") != derive_seed(2, "x")


def test_fixed_examples():
    five, thirteen = Residue(5, 2, 6), Residue(13, 2, 6)
    assert fixed_arith("mul", five, thirteen).value == 1
    assert fixed_arith("div", Residue(1, 2, 6), five) == thirteen
    with pytest.raises(FixedPointDivisionError):
        fixed_arith("div", Residue(1, 2, 6), Residue(6, 2, 6))
    assert Residue.from_rational(Fraction(-1, 5), 2, 6).value == (-13) % 64
    with pytest.raises(ValueError):
        Residue.from_rational(Fraction(1, 2), 2, 6)


def test_fixed_shifted_division():
    # 12 / 6 = 2 mod 2^5 up to the top digit
    q, k = fixed_divide_shifted(Residue(12, 2, 6), Residue(6, 2, 6), ZeroDigits(2))
    assert k == 1 and q.value % 32 == 2
    with pytest.raises(FixedPointDivisionError):
        fixed_divide_shifted(Residue(1, 2, 6), Residue(6, 2, 6), ZeroDigits(2))
    with pytest.raises(FixedPointDivisionError):
        fixed_divide_shifted(Residue(4, 2, 6), Residue(0, 2, 6), ZeroDigits(2))


def test_fixed_agrees_with_exact_on_integers():
    rng = random.Random(5)
    for _ in range(500):
        p, N = rng.choice([2, 3, 5]), rng.randint(1, 6)
        a, b = rng.randint(-10**4, 10**4), rng.randint(-10**4, 10**4)
        A, B = Residue(a, p, N), Residue(b, p, N)
        assert fixed_arith("add", A, B) == Residue(a + b, p, N)
        assert fixed_arith("mul", A, B) == Residue(a * b, p, N)
        if b % p:
            assert fixed_arith("div", A, B) == Residue.from_rational(Fraction(a, b), p, N)
