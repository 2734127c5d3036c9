from __future__ import annotations

import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from polylat import f2poly

X = 0b10
X2_X_1 = 0b111


def schoolbook_mul(a: int, b: int) -> int:
    """Coefficient convolution mod 2 on explicit coefficient lists."""
    ca = [(a >> i) & 1 for i in range(max(a.bit_length(), 1))]
    cb = [(b >> i) & 1 for i in range(max(b.bit_length(), 1))]
    out = [0] * (len(ca) + len(cb))
    for i, x in enumerate(ca):
        for j, y in enumerate(cb):
            out[i + j] ^= x & y
    return sum(c << i for i, c in enumerate(out))


def long_division_remainder(a: int, p: int) -> int:
    dp = p.bit_length() - 1
    while a and a.bit_length() - 1 >= dp:
        a ^= p << (a.bit_length() - 1 - dp)
    return a


def trial_division_irreducible(p: int) -> bool:
    d = p.bit_length() - 1
    if d < 1:
        return False
    for f in range(2, 1 << (d // 2 + 1)):
        if 1 <= f.bit_length() - 1 <= d // 2 and long_division_remainder(p, f) == 0:
            return False
    return True


def laurent_by_long_division(a: int, p: int, mprime: int) -> tuple[int, ...]:
    """Digits of a/p from multiplying the remainder by x and reading off the quotient bit."""
    dp = p.bit_length() - 1
    r = long_division_remainder(a, p)
    digits = []
    for _ in range(mprime):
        r = r << 1
        q, r = (1, long_division_remainder(r, p)) if r.bit_length() - 1 >= dp else (0, r)
        digits.append(q)
    return tuple(digits)


# examples


def test_add_examples():
    assert f2poly.add(0b101, 0b110) == 0b11
    assert f2poly.add(0b1011, 0b1011) == 0
    assert f2poly.add(0b1011, 0) == 0b1011


def test_mul_mod_examples():
    assert f2poly.mul_mod(X, X, X2_X_1) == 0b11
    assert f2poly.mul_mod(0b1101, 1, X2_X_1) == long_division_remainder(0b1101, X2_X_1)
    expected = long_division_remainder(schoolbook_mul(0b11, 0b11), X2_X_1)
    assert expected == X
    assert f2poly.mul_mod(0b11, 0b11, X2_X_1) == expected


def test_divrem_examples():
    # x^3 + x = (x + 1)(x^2 + x + 1) + (x + 1)
    q, r = f2poly.divrem(0b1010, X2_X_1)
    assert (q, r) == (0b11, 0b11)
    assert schoolbook_mul(q, X2_X_1) ^ r == 0b1010
    assert f2poly.divrem(0b110101, 1) == (0b110101, 0)
    assert f2poly.divrem(0, 0b1011) == (0, 0)


def test_irreducible_examples():
    assert f2poly.is_irreducible(X2_X_1)
    assert not f2poly.is_irreducible(0b101)
    assert f2poly.is_irreducible(0b10011) == trial_division_irreducible(0b10011) is True


def test_find_irreducible_examples():
    assert f2poly.find_irreducible(2) == X2_X_1
    assert f2poly.find_irreducible(1) == X
    first = next(p for p in range(16, 32) if trial_division_irreducible(p))
    assert f2poly.find_irreducible(4) == first == 0b10011


def test_find_primitive_examples():
    assert f2poly.find_primitive(X2_X_1) == X
    g = f2poly.find_primitive(0b10011)
    assert g == X
    powers = [1]
    for _ in range(15):
        powers.append(long_division_remainder(schoolbook_mul(powers[-1], g), 0b10011))
    assert powers[15] == 1 and len(set(powers[:15])) == 15
    assert f2poly.find_primitive(X) == 1


def test_laurent_examples():
    assert f2poly.laurent_digits(1, X2_X_1, 2) == (0, 1) == laurent_by_long_division(1, X2_X_1, 2)
    assert f2poly.laurent_numerator(1, X2_X_1, 2) == 1  # 1/4
    assert f2poly.laurent_digits(0, X2_X_1, 5) == (0,) * 5
    assert f2poly.laurent_digits(X, X2_X_1, 2) == (1, 1) == laurent_by_long_division(X, X2_X_1, 2)
    # longer expansion of 1/p: x^-2 + x^-3 + x^-5 + x^-6 + ...
    assert f2poly.laurent_digits(1, X2_X_1, 6) == (0, 1, 1, 0, 1, 1)


def test_truncation_examples():
    assert f2poly.truncate_integer_to_poly(13, 3) == 0b101
    assert f2poly.truncate_integer_to_poly(0, 5) == 0
    assert f2poly.truncate_integer_to_poly(1 << 7, 7) == 0


def test_factor_examples():
    assert f2poly.factor(15) == {3: 1, 5: 1}
    assert f2poly.factor(3) == {3: 1}
    fac = f2poly.factor(2047)
    assert fac == {23: 1, 89: 1}
    assert all(all(p % d for d in range(2, math.isqrt(p) + 1)) for p in fac)


def test_degree_sentinel_and_hex():
    assert f2poly.degree(0) == f2poly.NEG_INF
    assert f2poly.degree(0b10011) == 4
    assert f2poly.to_hex(0b10011) == "13"
    assert f2poly.from_hex("13") == 0b10011


def test_limits_rejected():
    with pytest.raises(ValueError):
        f2poly.find_irreducible(0)
    with pytest.raises(ValueError):
        f2poly.find_primitive(0b101)


# invariants

polys = st.integers(min_value=0, max_value=(1 << 30) - 1)
moduli = st.integers(min_value=2, max_value=(1 << 16) - 1)


@given(polys, polys, moduli)
def test_mul_mod_commutes_and_matches_schoolbook(a, b, p):
    r = f2poly.mul_mod(a, b, p)
    assert r == f2poly.mul_mod(b, a, p)
    assert r == long_division_remainder(schoolbook_mul(a, b), p)


@given(polys, st.integers(min_value=1, max_value=(1 << 16) - 1))
def test_divrem_reconstructs(a, b):
    q, r = f2poly.divrem(a, b)
    assert schoolbook_mul(q, b) ^ r == a
    assert r == 0 or r.bit_length() < b.bit_length()


def test_primitive_element_generates_group():
    for d in range(1, 13):
        p = f2poly.find_irreducible(d)
        g = f2poly.find_primitive(p)
        table = f2poly.power_table(g, p)
        assert len(set(table)) == (1 << d) - 1
        assert 0 not in table


def test_laurent_injective():
    for d in range(1, 11):
        p = f2poly.find_irreducible(d)
        images = {f2poly.laurent_numerator(a, p, d) for a in range(1 << d)}
        assert len(images) == 1 << d


def test_laurent_matches_long_division():
    for d in range(1, 8):
        p = f2poly.find_irreducible(d)
        for a in range(1 << d):
            assert f2poly.laurent_digits(a, p, d + 3) == laurent_by_long_division(a, p, d + 3)


def test_irreducibility_against_trial_division():
    for p in range(2, 1 << 13):
        assert f2poly.is_irreducible(p) == trial_division_irreducible(p), p


@given(st.integers(min_value=1, max_value=(1 << 40) - 1))
def test_factor_reconstructs(n):
    fac = f2poly.factor(n)
    assert math.prod(p**e for p, e in fac.items()) == n


def test_factor_reconstructs_mersenne():
    for d in range(1, 41):
        n = (1 << d) - 1
        assert math.prod(p**e for p, e in f2poly.factor(n).items()) == n


@given(polys, polys)
def test_add_is_xor_group(a, b):
    assert f2poly.add(f2poly.add(a, b), b) == a
    assert f2poly.degree(f2poly.add(a, b)) <= max(f2poly.degree(a), f2poly.degree(b))


def test_hex_round_trip():
    for a in itertools.chain(range(300), [1 << 39, (1 << 40) - 1]):
        assert f2poly.from_hex(f2poly.to_hex(a)) == a
