"""The quality criterion B of a polynomial lattice rule and its bounds.

``b_points`` evaluates the criterion as an average over the points of the
rule.  ``b_dual_oracle`` evaluates the same quantity as a sum over the dual
lattice, truncated at a frequency bound, and returns a rigorous bound on what
the truncation left out.  The two routes share only the coefficient
definitions, so agreement between them is a meaningful test.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import f2poly
from .kernel import (
    WeightModel,
    a_lambda_1,
    a_lambda_2,
    d_alpha,
    omega_table,
    omega_values,
    popcount_array,
    residue_sums,
    reverse_bits_array,
    series_truncation,
)
from .points import RuleSpec, generate_point_set

ORACLE_MAX_S = 4
ORACLE_MAX_MPRIME = 8
_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class CriterionResult:
    value: float
    decomposition: np.ndarray | None = field(default=None, repr=False)
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DualTruncation:
    """Truncated dual-lattice sum.

    ``tail`` bounds |B - value|: the part of the series beyond ``K_max``
    (``truncation_tail``) plus a bound on floating rounding in ``value``.
    """

    K_max: int
    value: float
    tail: float
    truncation_tail: float
    rounding: float


def weights_digest(weights: WeightModel) -> str:
    if weights.is_product:
        doc = {"type": "product", "gammas": [repr(g) for g in weights.product]}
    else:
        items = sorted((sorted(u), repr(g)) for u, g in weights.general.items())
        doc = {"type": "general", "s": weights.s, "table": items}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def rule_metadata(rule: RuleSpec) -> dict:
    return {
        "s": rule.s,
        "m": rule.m,
        "mprime": rule.mprime,
        "alpha": rule.alpha,
        "modulus_hex": f2poly.to_hex(rule.modulus),
        "generators_hex": [f2poly.to_hex(q) for q in rule.generators],
        "weights_digest": weights_digest(rule.weights),
    }


# ---------------------------------------------------------------------------
# dual lattice


def dual_membership(k: Sequence[int], rule: RuleSpec) -> bool:
    """Whether sum_j tr_m'(k_j) q_j mod p has degree < m' - m."""
    if len(k) != rule.s:
        raise ValueError("k must have one entry per coordinate")
    mask = (1 << rule.mprime) - 1
    acc = 0
    for kj, q in zip(k, rule.generators):
        if kj < 0:
            raise ValueError("k must be nonnegative")
        acc ^= f2poly.mul_mod(kj & mask, q, rule.modulus)
    return acc >> (rule.mprime - rule.m) == 0


def character_sum(k: Sequence[int], rule: RuleSpec, points=None) -> Fraction:
    """(1/2^m) sum_n wal_k(x_n), in integer arithmetic."""
    if len(k) != rule.s:
        raise ValueError("k must have one entry per coordinate")
    pts = generate_point_set(rule) if points is None else points
    mask = (1 << rule.mprime) - 1
    parity = np.zeros(len(pts), dtype=np.uint64)
    for j, kj in enumerate(k):
        if kj < 0:
            raise ValueError("k must be nonnegative")
        # digit i+1 of x pairs with bit i of k: reverse the m' digits of x
        rev = reverse_bits_array(pts.numerators[:, j], rule.mprime).astype(np.uint64)
        parity ^= popcount_array(rev & np.uint64(kj & mask)).astype(np.uint64) & np.uint64(1)
    odd = int(parity.sum())
    return Fraction(len(pts) - 2 * odd, len(pts))


# ---------------------------------------------------------------------------
# point form


def nonnegative(value: float) -> float:
    """Clamp a criterion estimate at 0.

    The exact criterion is a sum of nonnegative terms, but the point form
    cancels O(1) quantities, so values below ~eps * max|omega| come out as
    rounding noise of either sign; 0 is never farther from the truth.
    """
    return value if value > 0.0 else 0.0


def omega_at(alpha: int, numerators: np.ndarray, mprime: int) -> np.ndarray:
    """omega_alpha at numerators / 2^m' (table lookup when the table fits)."""
    if mprime <= 16:
        return omega_table(alpha, mprime)[numerators.astype(np.int64)]
    return omega_values(alpha, numerators, mprime)


def b_points(rule: RuleSpec, keep_decomposition: bool = False) -> CriterionResult:
    """Criterion as an average over the 2^m points.

    Product weights: B = (1/N) sum_n (prod_j [1 + gamma_j D w_nj] - 1).
    General weights: B = (1/N) sum_n sum_{u != {}} gamma_u D^|u| prod_{j in u} w_nj.
    Here w_nj = omega_alpha(x_{n,j}).
    """
    pts = generate_point_set(rule)
    D = float(d_alpha(rule.alpha).D_alpha)
    W = omega_at(rule.alpha, pts.numerators, rule.mprime)
    n = len(pts)
    meta = rule_metadata(rule)
    if rule.weights.is_product:
        P = np.ones(n)
        for j, g in enumerate(rule.weights.product):
            P = P * (1.0 + g * D * W[:, j])
        value = nonnegative(math.fsum(P - 1.0) / n)
        return CriterionResult(value, P if keep_decomposition else None, meta)
    return subset_sum_criterion(W, rule.weights, D, n, keep_decomposition, meta)


def subset_sum_criterion(W, weights, D, n, keep, meta) -> CriterionResult:
    per_point = np.zeros(n)
    parts = []
    for u, g in weights.nonempty_subsets():
        t = np.full(n, g * D ** len(u))
        for j in sorted(u):
            t = t * W[:, j - 1]
        parts.append(t)
        per_point = per_point + t
    value = nonnegative(math.fsum(np.concatenate(parts)) / n) if parts else 0.0
    return CriterionResult(value, per_point if keep else None, meta)


def b_points_general_path(rule: RuleSpec) -> CriterionResult:
    """Subset-sum evaluation regardless of the weight model (used to cross-check
    the product formula)."""
    pts = generate_point_set(rule)
    D = float(d_alpha(rule.alpha).D_alpha)
    W = omega_at(rule.alpha, pts.numerators, rule.mprime)
    return subset_sum_criterion(W, rule.weights.to_general(), D, len(pts), False, rule_metadata(rule))


# ---------------------------------------------------------------------------
# dual form (oracle)


def _xor_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """c[y] = sum_{y1 ^ y2 = y} a[y1] b[y2] by direct pairing."""
    size = a.shape[0]
    idx = np.arange(size)
    return np.bincount((idx[:, None] ^ idx[None, :]).ravel(), weights=np.outer(a, b).ravel(), minlength=size)


def b_dual_oracle(rule: RuleSpec, K_max: int = 1 << 16) -> DualTruncation:
    """Criterion as a truncated dual-lattice sum over k_j in E, k_j < K_max.

    Frequencies are grouped by their residue r = k mod 2^m' (only tr_m'(k)
    enters the membership test); each group carries the exact-count sum S(r)
    of its coefficients.  Coordinate j maps r to r q_j mod p, and a subset u
    contributes the mass of sum_j r_j q_j on polynomials of degree < m' - m.
    """
    if rule.s > ORACLE_MAX_S or rule.mprime > ORACLE_MAX_MPRIME:
        raise ValueError(f"oracle limited to s <= {ORACLE_MAX_S}, m' <= {ORACLE_MAX_MPRIME}")
    alpha, mp = rule.alpha, rule.mprime
    D = float(d_alpha(alpha).D_alpha)
    S = residue_sums(alpha, K_max, mp)
    size = 1 << mp
    images = []
    for q in rule.generators:
        dest = np.array([f2poly.mul_mod(r, q, rule.modulus) for r in range(size)])
        images.append(np.bincount(dest, weights=S, minlength=size))
    low = 1 << (mp - rule.m)

    tr = series_truncation(alpha, K_max)
    A = a_lambda_1(alpha, 1)
    partial = tr.partial
    total_terms = []
    trunc_tail = Fraction(0)
    abs_scale = 0.0
    for u, g in rule.weights.nonempty_subsets():
        members = sorted(u)
        h = images[members[0] - 1]
        for j in members[1:]:
            h = _xor_convolve(h, images[j - 1])
        mass = math.fsum(h[:low])
        total_terms.append(g * D ** len(u) * mass)
        trunc_tail += Fraction(g) * Fraction(d_alpha(alpha).D_alpha) ** len(u) * (A ** len(u) - partial ** len(u))
        abs_scale += g * D ** len(u) * float(partial) ** len(u)
    value = math.fsum(total_terms)
    # each stage (residue sums, images, convolutions, partial sums) is a sum of
    # nonnegative terms; 64 eps per stage times the largest possible total is
    # far above the accumulated relative error.
    stages = 4 + rule.s
    rounding = float(64 * stages * _EPS * abs_scale)
    tt = float(trunc_tail)
    return DualTruncation(K_max, value, tt + rounding, tt, rounding)


# ---------------------------------------------------------------------------
# bounds


def lambda_grid(alpha: int, step: float = 0.02) -> list[float]:
    """{1/(2 alpha) + 0.01, + step, ...} up to 1, with 1 always included."""
    start = 1.0 / (2 * alpha) + 0.01
    count = int(math.floor((1.0 - start) / step + 1e-9)) + 1
    grid = [round(start + i * step, 12) for i in range(count)]
    if grid[-1] < 1.0 - 1e-12:
        grid.append(1.0)
    else:
        grid[-1] = 1.0
    return grid


def _lambda_arg(lam):
    if isinstance(lam, float) and lam == 1.0:
        return 1
    return lam


def _bound(alpha: int, weights: WeightModel, m: int, mprime: int, lam, combine) -> float:
    lam = _lambda_arg(lam)
    a1 = float(a_lambda_1(alpha, lam))
    a2 = float(a_lambda_2(alpha, lam))
    lamf = float(lam)
    D = float(d_alpha(alpha).D_alpha)
    if weights.is_product:
        x = [g**lamf * D**lamf for g in weights.product]
        inner = combine(x, a1, a2)
    else:
        inner = math.fsum(
            g**lamf * D ** (lamf * len(u)) * combine.term(len(u), a1, a2) for u, g in weights.nonempty_subsets()
        )
    return 2.0 ** (-min(m / lamf, 4 * mprime)) * inner ** (1.0 / lamf)


def _prod_minus_one(x, a: float) -> float:
    # prod(1 + x_i a) - 1 without cancellation for tiny weights
    return math.expm1(math.fsum(math.log1p(xi * a) for xi in x))


class _Existence:
    def __call__(self, x, a1, a2):
        return _prod_minus_one(x, a1) + _prod_minus_one(x, a2)

    @staticmethod
    def term(size, a1, a2):
        return a1**size + a2**size


class _Cbc:
    def __call__(self, x, a1, a2):
        return _prod_minus_one(x, a1 + a2)

    @staticmethod
    def term(size, a1, a2):
        return (a1 + a2) ** size


def existence_bound(alpha: int, weights: WeightModel, m: int, mprime: int, lam) -> float:
    """Upper bound on the smallest criterion value over all generating vectors."""
    return _bound(alpha, weights, m, mprime, lam, _Existence())


def cbc_bound(alpha: int, weights: WeightModel, m: int, mprime: int, lam) -> float:
    """Upper bound on the criterion of the component-by-component choice."""
    return _bound(alpha, weights, m, mprime, lam, _Cbc())


def bound_table(alpha: int, weights: WeightModel, m: int, mprime: int, grid: Sequence[float] | None = None) -> list[dict]:
    grid = lambda_grid(alpha) if grid is None else grid
    return [
        {
            "lambda": lam,
            "cbc_bound": cbc_bound(alpha, weights, m, mprime, lam),
            "existence_bound": existence_bound(alpha, weights, m, mprime, lam),
        }
        for lam in grid
    ]
