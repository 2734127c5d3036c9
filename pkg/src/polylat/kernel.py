"""Walsh analysis and reproducing-kernel quantities for smoothness alpha.

Everything here is a function of alpha (and of a dyadic argument): the
digit-sum set E, mu_alpha, Walsh functions, the constants D_alpha and
A_{alpha,lambda,1/2}, the function

    omega_alpha(x) = sum_{k in E} 2^(-2 mu_alpha(floor(k/2))) wal_k(x),

Bernoulli polynomials and the reproducing kernel of the weighted unanchored
Sobolev space.  Constants are built with ``fractions.Fraction`` and only
converted to float at the end.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_GENERAL_WEIGHT_DIM = 20


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightModel:
    """Weights gamma_u for subsets u of {1..s} (1-based coordinates).

    Use :meth:`product_weights` for gamma_u = prod_{j in u} gamma_j or
    :meth:`general_weights` for an explicit table.  Subsets missing from a
    general table have weight 0, except gamma_emptyset which defaults to 1.
    """

    s: int
    product: tuple[float, ...] | None = None
    general: Mapping[frozenset, float] | None = field(default=None, hash=False)

    def __post_init__(self):
        if (self.product is None) == (self.general is None):
            raise ValueError("exactly one of product/general must be given")
        if self.product is not None:
            if len(self.product) != self.s:
                raise ValueError("need one product weight per coordinate")
            if any(not (g >= 0) for g in self.product):
                raise ValueError("weights must be nonnegative")
        else:
            if self.s > MAX_GENERAL_WEIGHT_DIM:
                raise ValueError(f"general weights only for s <= {MAX_GENERAL_WEIGHT_DIM}")
            for u, g in self.general.items():
                if not (g >= 0):
                    raise ValueError("weights must be nonnegative")
                if any(j < 1 or j > self.s for j in u):
                    raise ValueError(f"subset {sorted(u)} outside 1..{self.s}")

    @classmethod
    def product_weights(cls, gammas: Iterable[float]) -> "WeightModel":
        g = tuple(float(x) for x in gammas)
        return cls(s=len(g), product=g)

    @classmethod
    def general_weights(cls, s: int, table: Mapping[Iterable[int], float]) -> "WeightModel":
        return cls(s=s, general={frozenset(u): float(v) for u, v in table.items()})

    @property
    def is_product(self) -> bool:
        return self.product is not None

    @property
    def gamma_empty(self) -> float:
        if self.product is not None:
            return 1.0
        return float(self.general.get(frozenset(), 1.0))

    def gamma(self, u: Iterable[int]) -> float:
        u = frozenset(u)
        if self.product is not None:
            return math.prod(self.product[j - 1] for j in u)
        if not u:
            return self.gamma_empty
        return float(self.general.get(u, 0.0))

    def nonempty_subsets(self, upto: int | None = None):
        """(u, gamma_u) for nonempty u within {1..upto} with gamma_u > 0."""
        upto = self.s if upto is None else upto
        if self.product is not None:
            for r in range(1, upto + 1):
                for u in itertools.combinations(range(1, upto + 1), r):
                    g = self.gamma(u)
                    if g > 0:
                        yield frozenset(u), g
        else:
            for u, g in sorted(self.general.items(), key=lambda kv: (len(kv[0]), sorted(kv[0]))):
                if u and g > 0 and max(u) <= upto:
                    yield u, g

    def restrict(self, tau: int) -> "WeightModel":
        """Weights of the first ``tau`` coordinates."""
        if self.product is not None:
            return WeightModel(s=tau, product=self.product[:tau])
        table = {u: g for u, g in self.general.items() if not u or max(u) <= tau}
        return WeightModel(s=tau, general=table)

    def to_general(self) -> "WeightModel":
        if self.product is None:
            return self
        table = {frozenset(): 1.0}
        table.update(dict(self.nonempty_subsets()))
        return WeightModel(s=self.s, general=table)


# ---------------------------------------------------------------------------
# digit functions


def sum_of_digits(k: int) -> int:
    if k < 0:
        raise ValueError("k must be nonnegative")
    return bin(k).count("1")


def in_E(k: int) -> bool:
    """k >= 1 with an even number of binary ones."""
    return k >= 1 and sum_of_digits(k) % 2 == 0


def mu_alpha(alpha: int, k: int) -> int:
    """Sum of the min(alpha, v) largest 1-based bit positions of k >= 1."""
    if k < 1:
        raise ValueError("mu_alpha is only defined for k >= 1")
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    total = 0
    for _ in range(alpha):
        if not k:
            break
        a = k.bit_length()
        total += a
        k ^= 1 << (a - 1)
    return total


def mu_alpha_array(alpha: int, k: np.ndarray) -> np.ndarray:
    """Vectorised mu_alpha; entries with k == 0 map to 0."""
    k = np.asarray(k, dtype=np.int64).copy()
    total = np.zeros_like(k)
    for _ in range(alpha):
        nz = k > 0
        if not nz.any():
            break
        # frexp exponent is the bit length for 0 < k < 2^53
        _, e = np.frexp(k[nz].astype(np.float64))
        e = e.astype(np.int64)
        total[nz] += e
        k[nz] -= np.left_shift(np.int64(1), e - 1)
    return total


def popcount_array(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=np.uint64)
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(k).astype(np.int64)
    out = np.zeros(k.shape, dtype=np.int64)
    k = k.copy()
    while k.any():
        out += (k & np.uint64(1)).astype(np.int64)
        k >>= np.uint64(1)
    return out


def _reverse_bits(value: int, width: int) -> int:
    out = 0
    for _ in range(width):
        out = (out << 1) | (value & 1)
        value >>= 1
    return out


def walsh(k: int, numerator: int, precision: int) -> int:
    """wal_k(x) for x = numerator / 2^precision in [0, 1).

    Digit xi_{i+1} of x pairs with bit kappa_i of k; digits of x beyond
    ``precision`` are zero.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if precision < 0 or not 0 <= numerator < (1 << precision):
        raise ValueError("x must lie in [0, 1)")
    kt = k & ((1 << precision) - 1)
    rev = _reverse_bits(numerator, precision)
    return -1 if bin(kt & rev).count("1") & 1 else 1


def walsh_multi(ks: Sequence[int], numerators: Sequence[int], precision: int) -> int:
    out = 1
    for k, x in zip(ks, numerators):
        out *= walsh(k, x, precision)
    return out


def reverse_bits_array(values: np.ndarray, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.uint64)
    out = np.zeros_like(values)
    for i in range(width):
        out |= ((values >> np.uint64(i)) & np.uint64(1)) << np.uint64(width - 1 - i)
    return out


# ---------------------------------------------------------------------------
# constants


@dataclass(frozen=True)
class SmoothnessConstants:
    alpha: int
    D_alpha: Fraction
    C_tau: tuple[Fraction, ...]  # C_1 .. C_alpha
    C_tilde_2alpha: Fraction
    nu_star: int  # nu attaining the max in D_alpha

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "D_alpha": str(self.D_alpha),
            "D_alpha_float": float(self.D_alpha),
            "C_tau": [str(c) for c in self.C_tau],
            "C_tilde_2alpha": str(self.C_tilde_2alpha),
            "nu_star": self.nu_star,
        }


def _c_tau(tau: int) -> Fraction:
    if tau == 1:
        return Fraction(1, 2)
    return Fraction(1, 2**tau) * Fraction(5, 3) ** (tau - 2)


@lru_cache(maxsize=None)
def d_alpha(alpha: int) -> SmoothnessConstants:
    if alpha < 2:
        raise ValueError("alpha must be >= 2")
    c = tuple(_c_tau(t) for t in range(1, alpha + 1))
    c_tilde = Fraction(1, 2 ** (2 * alpha - 1)) * Fraction(5, 3) ** (2 * alpha - 2)
    best, nu_star = None, None
    for nu in range(1, alpha + 1):
        c_prime = sum(c[t - 1] ** 2 * Fraction(1, 4 ** (t - nu)) for t in range(nu, alpha + 1))
        val = c_prime + c_tilde * Fraction(1, 4 ** (alpha - nu))
        if best is None or val > best:
            best, nu_star = val, nu
    return SmoothnessConstants(alpha, best, c, c_tilde, nu_star)


def _four_pow(lam, i: int):
    """2^(2*lam*i), exact when 2*lam is an integer."""
    two_lam = 2 * lam
    if isinstance(lam, (int, Fraction)) and Fraction(two_lam).denominator == 1:
        return Fraction(2) ** (int(two_lam) * i)
    return 2.0 ** (2.0 * float(lam) * i)


def _check_lambda(alpha: int, lam) -> None:
    if alpha < 2:
        raise ValueError("alpha must be >= 2")
    if not (Fraction(1, 2 * alpha) < Fraction(lam) <= 1):
        raise ValueError(f"lambda must lie in (1/(2 alpha), 1] = ({1 / (2 * alpha)}, 1]")


def a_lambda_1(alpha: int, lam=1):
    """Sum over k in E of 2^(-2 lam mu_alpha(floor(k/2))) in closed form.

    Exact ``Fraction`` when 2*lam is an integer and ``lam`` is given as an
    int/Fraction; float otherwise.
    """
    _check_lambda(alpha, lam)
    total = 0
    prod = 1
    for v in range(1, alpha):
        prod = prod / (_four_pow(lam, v) - 1)
        total += prod
    total += prod / (_four_pow(lam, alpha) - 2)
    return total


def a_lambda_2(alpha: int, lam=1):
    """Constant bounding 2^(4 lam m') * sum_{k in E, p | tr(k)} 2^(-2 lam mu(floor(k/2)))."""
    _check_lambda(alpha, lam)
    f = _four_pow(lam, 1)
    total = 0
    prod = 1
    for v in range(1, (alpha - 1) // 2 + 1):
        for i in (2 * v - 1, 2 * v):
            prod = prod * f / (_four_pow(lam, i) - 1)
        total += prod
    tail = f / (_four_pow(lam, alpha) - 2)
    for i in range(1, alpha):
        tail = tail * f / (_four_pow(lam, i) - 1)
    return total + tail


# ---------------------------------------------------------------------------
# omega_alpha: closed form


@dataclass(frozen=True)
class OmegaTables:
    """U and U~(xi_1) vectors for a fixed (alpha, m')."""

    alpha: int
    mprime: int
    U: tuple[float, ...]  # U_0 .. U_{alpha-1}
    U_tilde: tuple[tuple[float, ...], tuple[float, ...]]  # indexed [xi_1][t]
    U_tilde0_minus1: tuple[float, float]


@lru_cache(maxsize=None)
def omega_tables(alpha: int, mprime: int) -> OmegaTables:
    if mprime < 2:
        raise ValueError("closed form needs m' >= 2")
    U = [Fraction(1)]
    prod = Fraction(1)
    for t in range(1, alpha):
        prod /= 4**t - 1
        U.append(prod / Fraction(4) ** (t * (mprime - 1)))
    ut = []
    ut0 = []
    for xi in (0, 1):
        sign = lambda v: -1 if (v * xi) & 1 else 1  # noqa: E731
        ut.append(tuple(float(sum(sign(v) * U[v - t] for v in range(t, alpha))) for t in range(alpha)))
        ut0.append(float(sum(sign(v) * U[v] for v in range(1, alpha))))
    return OmegaTables(alpha, mprime, tuple(float(u) for u in U), (ut[0], ut[1]), (ut0[0], ut0[1]))


def omega_values(alpha: int, numerators, mprime: int) -> np.ndarray:
    """omega_alpha(l / 2^m') for an array of numerators l, in O(alpha m') per entry.

    V_t and V~_t are built by one ascending pass over the digit index a,
    carrying alpha running elementary-symmetric accumulators.

    The indicator inside V~_t is the digit condition xi_2 = ... = xi_a = xi_1.
    For xi_1 = 0 this is phi(x) < 2^(1-a); for xi_1 = 1 it is
    phi(x) <= 2^(1-a) (strict inequality misses x = 1/2 and the points
    0.1..1**).  With that condition, evaluating on m'+1 digits (last digit 0)
    makes every term with a_alpha >= m'+1 vanish, so no remainder is dropped.
    """
    if alpha < 2:
        raise ValueError("alpha must be >= 2")
    l = np.asarray(numerators, dtype=np.int64)
    if (l < 0).any() or (l >= (1 << mprime)).any():
        raise ValueError("numerators must lie in [0, 2^m')")
    prec = max(mprime, 1) + 1
    l = l << (prec - mprime)
    tabs = omega_tables(alpha, prec)
    xi1 = (l >> (prec - 1)) & 1
    half = 1 << (prec - 1)
    phi = np.where(l < half, 2 * l, (1 << (prec + 1)) - 2 * l)

    E = [np.ones(l.shape)] + [np.zeros(l.shape) for _ in range(alpha - 1)]
    F = [None] + [np.zeros(l.shape) for _ in range(alpha)]
    for a in range(1, prec):
        bit = (l >> (prec - 1 - a)) & 1  # xi_{a+1}
        e = np.where(bit == 1, -1.0, 1.0) * 4.0 ** (-a)
        thr = 1 << (prec - a + 1)
        cond = np.where(xi1 == 1, phi <= thr, phi < thr)
        h = np.where(cond, 2.0 ** (a - 1), 0.0)
        for j in range(alpha, 1, -1):
            F[j] += F[j - 1] * e
        F[1] += h * e
        for j in range(alpha - 1, 0, -1):
            E[j] += E[j - 1] * e

    U = tabs.U
    out = np.zeros(l.shape)
    for xi in (0, 1):
        mask = xi1 == xi
        if not mask.any():
            continue
        ut = tabs.U_tilde[xi]
        val = sum(ut[t] * E[t][mask] for t in range(1, alpha))
        val = val + tabs.U_tilde0_minus1[xi]
        tilde = sum(U[alpha - t] * F[t][mask] for t in range(1, alpha + 1))
        sign = -1.0 if (alpha * xi) & 1 else 1.0
        out[mask] = val + sign * tilde
    out[l == 0] = float(a_lambda_1(alpha, 1))
    return out


def omega_alpha(alpha: int, numerator: int, precision: int) -> float:
    """omega_alpha(numerator / 2^precision)."""
    if precision == 0:
        if numerator != 0:
            raise ValueError("x must lie in [0, 1)")
        return float(a_lambda_1(alpha, 1))
    return float(omega_values(alpha, np.array([numerator]), precision)[0])


@lru_cache(maxsize=64)
def _omega_table_cached(alpha: int, mprime: int) -> np.ndarray:
    t = omega_values(alpha, np.arange(1 << mprime, dtype=np.int64), mprime)
    t.setflags(write=False)
    return t


def omega_table(alpha: int, mprime: int) -> np.ndarray:
    """omega_alpha(l / 2^m') for every l in [0, 2^m')."""
    if mprime > 24:
        raise ValueError("table only for m' <= 24; use omega_values")
    return _omega_table_cached(alpha, mprime)


# ---------------------------------------------------------------------------
# omega_alpha: truncated Walsh series (oracle)


@dataclass(frozen=True)
class SeriesTruncation:
    """Coefficients c(k) = 2^(-2 mu(floor(k/2))) on k in E, k < K_max."""

    alpha: int
    K_max: int
    coeffs: np.ndarray  # length K_max, zero off E
    mu: np.ndarray  # mu_alpha(floor(k/2)), -1 off E
    partial: Fraction  # exact sum of coeffs
    tail: Fraction  # exact: A_{alpha,1,1} - partial


@lru_cache(maxsize=8)
def series_truncation(alpha: int, K_max: int) -> SeriesTruncation:
    if K_max < 4:
        raise ValueError("K_max must be >= 4")
    k = np.arange(K_max, dtype=np.int64)
    inE = (popcount_array(k) % 2 == 0) & (k > 0)
    mu = np.where(inE, mu_alpha_array(alpha, k >> 1), -1)
    coeffs = np.where(inE, np.ldexp(1.0, -2 * np.maximum(mu, 0)), 0.0)
    counts = np.bincount(mu[inE])
    partial = sum(Fraction(int(c), 4**t) for t, c in enumerate(counts) if c)
    tail = a_lambda_1(alpha, 1) - partial
    coeffs.setflags(write=False)
    mu.setflags(write=False)
    return SeriesTruncation(alpha, K_max, coeffs, mu, partial, tail)


def residue_sums(alpha: int, K_max: int, mprime: int) -> np.ndarray:
    """S(r) = sum of c(k) over k in E, k < K_max, k = r mod 2^m'.

    Each S(r) is assembled from exact counts per value of mu, so it is
    correct to a few ulps regardless of K_max.
    """
    tr = series_truncation(alpha, K_max)
    size = 1 << mprime
    sel = tr.mu >= 0
    r = np.flatnonzero(sel) & (size - 1)
    mu = tr.mu[sel]
    width = int(mu.max()) + 1
    counts = np.bincount(r * width + mu, minlength=size * width).reshape(size, width)
    powers = np.ldexp(1.0, -2 * np.arange(width))
    # ascending powers of 1/4 summed smallest-first
    return (counts[:, ::-1] * powers[::-1]).sum(axis=1)


def omega_series_oracle(alpha: int, numerator: int, precision: int, K_max: int = 1 << 22) -> tuple[float, float]:
    """Partial Walsh sum over k in E, k < K_max, and a rigorous bound on the rest.

    The bound is sum_{k in E, k >= K_max} c(k) = A_{alpha,1,1} - partial, which
    dominates the absolute tail since |wal_k| = 1.
    """
    tr = series_truncation(alpha, K_max)
    rev = _reverse_bits(numerator, precision)
    k = np.arange(K_max, dtype=np.uint64) & np.uint64((1 << precision) - 1)
    signs = 1.0 - 2.0 * (popcount_array(k & np.uint64(rev)) & 1)
    return math.fsum(tr.coeffs * signs), float(tr.tail)


def omega_series_table(alpha: int, mprime: int, K_max: int = 1 << 22) -> tuple[np.ndarray, float]:
    """Series oracle at every l / 2^m' at once.

    wal_k(x) only sees the low m' bits of k when x has m' digits, so the
    partial sum collapses to sum_r S(r) wal_r(x).
    """
    if mprime > 12:
        raise ValueError("oracle table limited to m' <= 12")
    S = residue_sums(alpha, K_max, mprime)
    r = np.arange(1 << mprime, dtype=np.uint64)
    rev = reverse_bits_array(np.arange(1 << mprime), mprime)
    signs = 1.0 - 2.0 * (popcount_array(rev[:, None] & r[None, :]) & 1)
    return signs @ S, float(series_truncation(alpha, K_max).tail)


# ---------------------------------------------------------------------------
# Bernoulli polynomials and the kernel


@lru_cache(maxsize=None)
def bernoulli_numbers(n: int) -> tuple[Fraction, ...]:
    """B_0..B_n with B_1 = -1/2."""
    B = [Fraction(1)]
    for m in range(1, n + 1):
        B.append(-sum(math.comb(m + 1, k) * B[k] for k in range(m)) / (m + 1))
    return tuple(B)


@lru_cache(maxsize=None)
def bernoulli_coefficients(tau: int) -> tuple[Fraction, ...]:
    """Coefficients of B_tau(x), constant term first."""
    B = bernoulli_numbers(tau)
    return tuple(math.comb(tau, j) * B[tau - j] for j in range(tau + 1))


def bernoulli(tau: int, x):
    """B_tau(x); exact for Fraction/int x, float/ndarray otherwise."""
    if tau < 0:
        raise ValueError("degree must be >= 0")
    coeffs = bernoulli_coefficients(tau)
    if isinstance(x, (Fraction, int)):
        acc = Fraction(0)
        for c in reversed(coeffs):
            acc = acc * x + c
        return acc
    x = np.asarray(x, dtype=np.float64) if not isinstance(x, float) else x
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + float(c)
    return acc


def kernel_1d(alpha: int, x, y):
    """K_{1,alpha,(1)}(x, y) on [0,1]^2 (without the constant 1)."""
    exact = isinstance(x, (Fraction, int)) and isinstance(y, (Fraction, int))
    total = 0
    for tau in range(1, alpha + 1):
        f = math.factorial(tau) ** 2
        term = bernoulli(tau, x) * bernoulli(tau, y)
        total = total + (term / f if exact else term / float(f))
    d = abs(x - y) if exact else np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    sign = 1 if (alpha + 1) % 2 == 0 else -1
    last = bernoulli(2 * alpha, d)
    f2 = math.factorial(2 * alpha)
    return total + sign * (last / f2 if exact else last / float(f2))


def kernel_s(alpha: int, weights: WeightModel, x, y):
    """K_{s,alpha,gamma}(x, y) = sum_u gamma_u prod_{j in u} K_1(x_j, y_j).

    ``x`` and ``y`` are arrays whose last axis has length s; leading axes
    broadcast.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != weights.s or y.shape[-1] != weights.s:
        raise ValueError("point dimension does not match the weights")
    k1 = [kernel_1d(alpha, x[..., j], y[..., j]) for j in range(weights.s)]
    if weights.is_product:
        out = np.ones(np.broadcast(x[..., 0], y[..., 0]).shape)
        for j, g in enumerate(weights.product):
            out = out * (1.0 + g * k1[j])
        return out
    out = weights.gamma_empty * np.ones(np.broadcast(x[..., 0], y[..., 0]).shape)
    for u, g in weights.nonempty_subsets():
        term = g
        for j in u:
            term = term * k1[j - 1]
        out = out + term
    return out
