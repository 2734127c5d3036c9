"""Randomized QMC integration with constructed rules and error studies.

The squared worst-case error of a realized point set z_0..z_{N-1} in the
weighted Sobolev space of smoothness alpha is

    e^2 = (1/N^2) sum_{n,n'} K(z_n, z_n') - gamma_emptyset,

since every Bernoulli term of the kernel integrates to zero.  It is computed
here without the constant, as the average of K - gamma_emptyset, to keep the
cancellation small.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cbc import CbcParams, accurate_row_sums, cbc_fast, default_mprime
from .criterion import b_points
from .kernel import WeightModel, bernoulli, kernel_1d
from .points import PointSet, RuleSpec, digital_shift, draw_shift, generate_point_set, tent_transform, zero_shift

EXACT_KERNEL_MAX_POINTS = 1 << 12
_BLOCK_ELEMENTS = 1 << 20


@dataclass(frozen=True)
class Integrand:
    name: str
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]  # (N, s) -> (N,)
    exact: float | None = None


def constant_integrand(s: int) -> Integrand:
    return Integrand("constant", s, lambda x: np.ones(x.shape[0]), 1.0)


def linear_integrand(s: int) -> Integrand:
    """prod_j x_j, integral 2^-s."""
    return Integrand("linear", s, lambda x: np.prod(x, axis=1), 2.0**-s)


def b2_product_integrand(s: int, coeffs: Sequence[float] | None = None) -> Integrand:
    """prod_j (1 + c_j B_2(x_j)) with c_j = 2^-j by default; integral 1."""
    c = np.array([2.0**-j for j in range(1, s + 1)] if coeffs is None else coeffs, dtype=float)
    if c.shape != (s,):
        raise ValueError("need one coefficient per coordinate")
    return Integrand("b2prod", s, lambda x: np.prod(1.0 + c * bernoulli(2, x), axis=1), 1.0)


INTEGRANDS = {"constant": constant_integrand, "linear": linear_integrand, "b2prod": b2_product_integrand}


def make_integrand(name: str, s: int) -> Integrand:
    if name not in INTEGRANDS:
        raise ValueError(f"unknown integrand {name!r}; choose from {sorted(INTEGRANDS)}")
    return INTEGRANDS[name](s)


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class IntegrationResult:
    estimate: float
    stderr: float
    rms_error: float | None
    estimates: np.ndarray = field(repr=False)
    seed: int
    R: int


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


def rule_average(points: PointSet, integrand: Integrand) -> float:
    return math.fsum(integrand.fn(points.values())) / len(points)


def integrate(
    rule: RuleSpec,
    integrand: Integrand,
    R: int,
    seed: int,
    precision: int = 53,
    unshifted: bool = False,
    threads: int = 1,
) -> IntegrationResult:
    """Average of the rule over R shift-and-fold randomizations.

    Randomization r uses shift number r of ``seed``.  With ``unshifted`` the
    shift is forced to zero (R must then be 1), giving the folded rule.
    """
    if integrand.dim != rule.s:
        raise ValueError("integrand dimension does not match the rule")
    if R < 1:
        raise ValueError("R must be >= 1")
    if unshifted and R != 1:
        raise ValueError("an unshifted rule is deterministic; use R = 1")
    base = generate_point_set(rule)
    precision = max(precision, rule.mprime)

    def one(r):
        sigma = zero_shift(rule.s, precision) if unshifted else draw_shift(rule.s, seed, precision, r)
        return rule_average(tent_transform(digital_shift(base, sigma)), integrand)

    est = np.array(_map(one, range(R), threads))
    mean = math.fsum(est) / R
    stderr = float(np.std(est, ddof=1) / math.sqrt(R)) if R > 1 else 0.0
    rms = None
    if integrand.exact is not None:
        rms = math.sqrt(math.fsum((est - integrand.exact) ** 2) / R)
    return IntegrationResult(mean, stderr, rms, est, seed, R)


# ---------------------------------------------------------------------------
# worst-case error


def _k1_matrix(alpha: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """K_1(x_a, y_b) for all pairs; the Bernoulli products are separable."""
    out = np.zeros((x.shape[0], y.shape[0]))
    for tau in range(1, alpha + 1):
        f = float(math.factorial(tau) ** 2)
        out += np.outer(bernoulli(tau, x), bernoulli(tau, y)) / f
    sign = 1.0 if alpha % 2 == 1 else -1.0
    out += sign * bernoulli(2 * alpha, np.abs(x[:, None] - y[None, :])) / float(math.factorial(2 * alpha))
    return out


def _kernel_minus_constant(alpha: int, weights: WeightModel, za: np.ndarray, zb: np.ndarray) -> np.ndarray:
    k1 = [_k1_matrix(alpha, za[:, j], zb[:, j]) for j in range(weights.s)]
    if weights.is_product:
        out = np.ones((za.shape[0], zb.shape[0]))
        for j, g in enumerate(weights.product):
            out *= 1.0 + g * k1[j]
        return out - 1.0
    out = np.zeros((za.shape[0], zb.shape[0]))
    for u, g in weights.nonempty_subsets():
        t = np.full_like(out, g)
        for j in u:
            t *= k1[j - 1]
        out += t
    return out


def worst_case_error_kernel(points: PointSet | np.ndarray, alpha: int, weights: WeightModel) -> float:
    """Squared worst-case error e^2 of a (folded) point set, O(N^2 s)."""
    z = points.values() if isinstance(points, PointSet) else np.asarray(points, dtype=float)
    if z.ndim != 2 or z.shape[1] != weights.s:
        raise ValueError("points must be an (N, s) array matching the weights")
    n = z.shape[0]
    if n < 1:
        raise ValueError("need at least one point")
    rows = max(1, _BLOCK_ELEMENTS // n)
    sums = []
    for start in range(0, n, rows):
        block = _kernel_minus_constant(alpha, weights, z[start : start + rows], z)
        sums.extend(accurate_row_sums(block))
    return math.fsum(sums) / (n * n)


def worst_case_error_estimate(
    points: PointSet | np.ndarray, alpha: int, weights: WeightModel, n_pairs: int = 1 << 20, seed: int = 0
) -> float:
    """Unbiased estimate of e^2 from random index pairs (never used in assertions)."""
    z = points.values() if isinstance(points, PointSet) else np.asarray(points, dtype=float)
    rng = np.random.default_rng(seed)
    a = rng.integers(0, z.shape[0], n_pairs)
    b = rng.integers(0, z.shape[0], n_pairs)
    vals = np.empty(n_pairs)
    for start in range(0, n_pairs, 1 << 16):
        sl = slice(start, start + (1 << 16))
        za, zb = z[a[sl]], z[b[sl]]
        k = np.ones(za.shape[0]) if weights.is_product else None
        if weights.is_product:
            for j, g in enumerate(weights.product):
                k *= 1.0 + g * kernel_1d(alpha, za[:, j], zb[:, j])
            vals[sl] = k - 1.0
        else:
            acc = np.zeros(za.shape[0])
            for u, g in weights.nonempty_subsets():
                t = np.full(za.shape[0], g)
                for j in u:
                    t *= kernel_1d(alpha, za[:, j - 1], zb[:, j - 1])
                acc += t
            vals[sl] = acc
    return math.fsum(vals) / n_pairs


@dataclass(frozen=True)
class MseComparison:
    mean: float
    stderr: float
    B: float
    R: int
    seed: int
    holds: bool
    exact: bool


class MeanSquareBoundViolation(AssertionError):
    """Mean squared worst-case error significantly above the criterion."""


def shifted_errors(rule: RuleSpec, R: int, seed: int, precision: int = 53, threads: int = 1) -> tuple[np.ndarray, bool]:
    exact = rule.n_points <= EXACT_KERNEL_MAX_POINTS
    base = generate_point_set(rule)
    precision = max(precision, rule.mprime)

    def one(r):
        z = tent_transform(digital_shift(base, draw_shift(rule.s, seed, precision, r)))
        if exact:
            return worst_case_error_kernel(z, rule.alpha, rule.weights)
        return worst_case_error_estimate(z, rule.alpha, rule.weights, seed=seed + r)

    return np.array(_map(one, range(R), threads)), exact


def mse_vs_bound(rule: RuleSpec, R: int, seed: int, strict: bool = True, threads: int = 1) -> MseComparison:
    """Mean of e^2 over R random shifts against the criterion B.

    B bounds the expectation, so mean - 3 stderr <= B must hold; with
    ``strict`` a violation raises.
    """
    e2, exact = shifted_errors(rule, R, seed, threads=threads)
    mean = math.fsum(e2) / R
    stderr = float(np.std(e2, ddof=1) / math.sqrt(R)) if R > 1 else 0.0
    B = b_points(rule).value
    holds = mean - 3 * stderr <= B
    out = MseComparison(mean, stderr, B, R, seed, holds, exact)
    if strict and exact and not holds:
        raise MeanSquareBoundViolation(f"mean e^2 = {mean!r} (stderr {stderr!r}) exceeds B = {B!r}")
    return out


# ---------------------------------------------------------------------------
# convergence


def fit_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log2(y) against x."""
    x = np.asarray(xs, dtype=float)
    y = np.log2(np.asarray(ys, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class ErrorStudy:
    s: int
    alpha: int
    records: list[dict] = field(default_factory=list)
    slopes: dict = field(default_factory=dict)

    CSV_COLUMNS = ("m", "N", "mprime", "B", "mse_mean", "mse_stderr", "mse_exact", "rms_err")

    def to_csv(self) -> str:
        lines = [",".join(self.CSV_COLUMNS + tuple(sorted(self.slopes)))]
        slope_vals = [format(self.slopes[k], ".17g") for k in sorted(self.slopes)]
        for rec in self.records:
            vals = [rec[c] for c in self.CSV_COLUMNS]
            lines.append(",".join(format(v, ".17g") if isinstance(v, float) else str(v) for v in vals + slope_vals))
        return "\n".join(lines) + "\n"


def convergence_study(
    s: int,
    alpha: int,
    weights: WeightModel,
    m_range: Sequence[int],
    R: int = 16,
    seed: int = 0,
    integrand: str = "b2prod",
    mprime_for: Callable[[int], int] | None = None,
    kernel_mse: bool = True,
    threads: int = 1,
) -> ErrorStudy:
    """Construct a rule per m and record B, kernel MSE and RMS integration error.

    Slopes (log2 scale, per unit m) are fitted over the full m-range and over
    its upper half.
    """
    m_range = list(m_range)
    if len(m_range) < 2:
        raise ValueError("need at least two values of m")
    mprime_for = (lambda m: default_mprime(alpha, m)) if mprime_for is None else mprime_for
    f = make_integrand(integrand, s)
    study = ErrorStudy(s, alpha)
    for m in m_range:
        rule, _ = cbc_fast(CbcParams(s, m, mprime_for(m), alpha, weights))
        B = b_points(rule).value
        if kernel_mse:
            e2, exact = shifted_errors(rule, R, seed, threads=threads)
            mse_mean = math.fsum(e2) / R
            mse_stderr = float(np.std(e2, ddof=1) / math.sqrt(R)) if R > 1 else 0.0
        else:
            mse_mean, mse_stderr, exact = float("nan"), float("nan"), False
        res = integrate(rule, f, R, seed, threads=threads)
        study.records.append(
            {
                "m": m,
                "N": 1 << m,
                "mprime": rule.mprime,
                "B": B,
                "mse_mean": mse_mean,
                "mse_stderr": mse_stderr,
                "mse_exact": int(exact),
                "rms_err": res.rms_error,
            }
        )
    ms = [r["m"] for r in study.records]
    half = ms[len(ms) // 2 :] if len(ms) >= 4 else ms
    sel = [r for r in study.records if r["m"] in half]
    for key in ("B", "rms_err") + (("mse_mean",) if kernel_mse else ()):
        vals = [r[key] for r in study.records]
        if all(v > 0 for v in vals):
            study.slopes[f"slope_{key}_full"] = fit_slope(ms, vals)
            study.slopes[f"slope_{key}_upper"] = fit_slope(half, [r[key] for r in sel])
    return study
