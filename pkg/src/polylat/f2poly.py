"""Arithmetic with polynomials over GF(2) and in the fields GF(2)[x]/(p).

Polynomials are plain nonnegative integers: bit i holds the coefficient of
x^i, so the polynomial n(x) associated with an integer n is n itself.
The zero polynomial has degree ``NEG_INF``.
"""

from __future__ import annotations

from functools import lru_cache

NEG_INF = float("-inf")
MAX_MPRIME = 40


def degree(a: int):
    """Degree of ``a``; ``NEG_INF`` for the zero polynomial."""
    if a < 0:
        raise ValueError("polynomials are nonnegative integers")
    return a.bit_length() - 1 if a else NEG_INF


def add(a: int, b: int) -> int:
    return a ^ b


def mul(a: int, b: int) -> int:
    if a < b:
        a, b = b, a
    c = 0
    while b:
        if b & 1:
            c ^= a
        a <<= 1
        b >>= 1
    return c


def divrem(a: int, b: int) -> tuple[int, int]:
    """Quotient and remainder of ``a`` by ``b``."""
    if b == 0:
        raise ZeroDivisionError("division by the zero polynomial")
    db = b.bit_length() - 1
    q = 0
    while a and a.bit_length() - 1 >= db:
        shift = a.bit_length() - 1 - db
        q |= 1 << shift
        a ^= b << shift
    return q, a


def mod(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("division by the zero polynomial")
    db = b.bit_length() - 1
    while a and a.bit_length() - 1 >= db:
        a ^= b << (a.bit_length() - 1 - db)
    return a


def mul_mod(a: int, b: int, p: int) -> int:
    """(a*b) mod p; ``p`` must have degree >= 1."""
    if p < 2:
        raise ValueError("modulus must have degree >= 1")
    dp = p.bit_length() - 1
    a = mod(a, p)
    b = mod(b, p)
    top = 1 << dp
    c = 0
    while b:
        if b & 1:
            c ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= p
    return c


def pow_mod(a: int, e: int, p: int) -> int:
    if e < 0:
        raise ValueError("negative exponent")
    result = mod(1, p)
    a = mod(a, p)
    while e:
        if e & 1:
            result = mul_mod(result, a, p)
        a = mul_mod(a, a, p)
        e >>= 1
    return result


def gcd(a: int, b: int) -> int:
    while b:
        a, b = b, mod(a, b)
    return a


def is_irreducible(p: int) -> bool:
    """Ben-Or test: ``p`` of degree d is irreducible iff
    gcd(x^(2^i) - x, p) = 1 for every 1 <= i <= d/2."""
    d = degree(p)
    if d == NEG_INF or d < 1:
        raise ValueError("irreducibility is defined for degree >= 1")
    if d == 1:
        return True
    if not p & 1:
        return False
    x = 0b10
    t = x
    for _ in range(d // 2):
        t = mul_mod(t, t, p)
        if gcd(p, t ^ x) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def find_irreducible(mprime: int) -> int:
    """Irreducible polynomial of degree ``mprime`` with the smallest encoding."""
    if mprime < 1:
        raise ValueError("degree must be positive")
    for p in range(1 << mprime, 1 << (mprime + 1)):
        if is_irreducible(p):
            return p
    raise AssertionError("unreachable: irreducibles exist in every degree")


def factor(n: int) -> dict[int, int]:
    """Prime factorization of ``n`` by trial division.

    Intended for n = 2^m' - 1 with m' <= 40 (n < 2^40, so at most 2^20 trial
    divisors).
    """
    if n < 1:
        raise ValueError("factor expects a positive integer")
    if n >= 1 << MAX_MPRIME:
        raise ValueError(f"trial division is capped at 2^{MAX_MPRIME}")
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


@lru_cache(maxsize=None)
def find_primitive(p: int) -> int:
    """Generator of the multiplicative group of GF(2)[x]/(p), smallest encoding."""
    d = degree(p)
    if d == NEG_INF or d < 1 or not is_irreducible(p):
        raise ValueError("find_primitive needs an irreducible modulus")
    if d > MAX_MPRIME:
        raise ValueError(f"m' > {MAX_MPRIME} is not supported")
    order = (1 << d) - 1
    if order == 1:
        return 1
    primes = list(factor(order))
    for g in range(2, 1 << d):
        if all(pow_mod(g, order // f, p) != 1 for f in primes):
            return g
    raise AssertionError("unreachable: the group is cyclic")


def laurent_digits(a: int, p: int, mprime: int) -> tuple[int, ...]:
    """First ``mprime`` coefficients t_1..t_mprime of a(x)/p(x) = sum t_l x^-l.

    ``a`` is reduced mod ``p`` first (the polynomial part of a/p does not
    contribute to negative powers).
    """
    if p == 0:
        raise ZeroDivisionError("zero modulus")
    dp = p.bit_length() - 1
    r = mod(a, p)
    top = 1 << dp
    digits = []
    for _ in range(mprime):
        r <<= 1
        if r & top:
            digits.append(1)
            r ^= p
        else:
            digits.append(0)
    return tuple(digits)


def laurent_numerator(a: int, p: int, mprime: int) -> int:
    """Integer sum t_l 2^(mprime-l), i.e. v_mprime(a/p) * 2^mprime."""
    out = 0
    for t in laurent_digits(a, p, mprime):
        out = (out << 1) | t
    return out


def truncate_integer_to_poly(k: int, mprime: int) -> int:
    """Polynomial built from the lowest ``mprime`` binary digits of ``k``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return k & ((1 << mprime) - 1)


def to_hex(a: int) -> str:
    return format(a, "x")


def from_hex(s: str) -> int:
    value = int(s, 16)
    if value < 0:
        raise ValueError("negative polynomial encoding")
    return value


def power_table(g: int, p: int) -> list[int]:
    """[g^0 mod p, g^1 mod p, ..., g^(2^d - 2) mod p]."""
    d = degree(p)
    order = (1 << d) - 1
    dp_top = 1 << d
    out = [0] * order
    cur = 1
    # Multiplication by a fixed g via shift-and-add would be generic; the common
    # case g = x is a shift plus one conditional reduction.
    if g == 0b10:
        for j in range(order):
            out[j] = cur
            cur <<= 1
            if cur & dp_top:
                cur ^= p
    else:
        for j in range(order):
            out[j] = cur
            cur = mul_mod(cur, g, p)
    return out
