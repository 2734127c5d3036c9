"""Quick end-to-end checks, each pairing an implementation with an independent oracle."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction
from typing import Callable

import numpy as np

from . import f2poly
from .cbc import CbcParams, cbc_fast, cbc_slow, verify_construction
from .criterion import b_dual_oracle, b_points, character_sum, dual_membership
from .kernel import (
    WeightModel,
    a_lambda_1,
    a_lambda_2,
    d_alpha,
    kernel_1d,
    omega_alpha,
    omega_series_table,
    omega_table,
)
from .points import RuleSpec, generate_point_set
from .qmc import worst_case_error_kernel


def _moebius(n: int) -> int:
    out, d = 1, 2
    while d * d <= n:
        if n % d == 0:
            n //= d
            if n % d == 0:
                return 0
            out = -out
        d += 1
    return -out if n > 1 else out


def check_irreducible_counts() -> tuple[bool, str]:
    """Irreducible counts per degree against (1/d) sum_{k|d} mu(d/k) 2^k."""
    for d in range(1, 11):
        found = sum(f2poly.is_irreducible(p) for p in range(1 << d, 1 << (d + 1)))
        expected = sum(_moebius(d // k) * 2**k for k in range(1, d + 1) if d % k == 0) // d
        if found != expected:
            return False, f"degree {d}: {found} != {expected}"
    return True, "degrees 1..10"


def check_division() -> tuple[bool, str]:
    rng = random.Random(7)
    for _ in range(500):
        a, b = rng.getrandbits(40), rng.getrandbits(20) | 1
        q, r = f2poly.divrem(a, b)
        if f2poly.mul(q, b) ^ r != a or r.bit_length() >= b.bit_length():
            return False, f"a={a} b={b}"
    return True, "500 random pairs"


def check_constants() -> tuple[bool, str]:
    ok = (
        d_alpha(2).D_alpha == Fraction(59, 144)
        and a_lambda_1(2, 1) == Fraction(5, 14)
        and a_lambda_2(2, 1) == Fraction(8, 21)
        and abs(omega_alpha(2, 0, 3) - 5 / 14) < 1e-12
    )
    return ok, "D_2 = 59/144, A_{2,1,1} = omega_2(0) = 5/14, A_{2,1,2} = 8/21"


def check_omega() -> tuple[bool, str]:
    worst = -np.inf
    for alpha in (2, 3):
        for mp in range(2, 7):
            series, tail = omega_series_table(alpha, mp, 1 << 18)
            gap = np.abs(omega_table(alpha, mp) - series).max() - tail
            worst = max(worst, gap)
    return worst <= 1e-10, f"max(|closed - series| - tail) = {worst:.3g}"


def _random_rule(rng: random.Random, s: int, m: int, mp: int, alpha: int = 2, weights=None) -> RuleSpec:
    w = weights or WeightModel.product_weights([2.0**-j for j in range(1, s + 1)])
    return RuleSpec(s, m, mp, f2poly.find_irreducible(mp), tuple(rng.randrange(1 << mp) for _ in range(s)), alpha, w)


def check_net_closure() -> tuple[bool, str]:
    rule = _random_rule(random.Random(3), 3, 6, 8)
    rows = {tuple(r) for r in generate_point_set(rule).numerators.tolist()}
    ok = all(tuple(a ^ b for a, b in zip(x, y)) in rows for x in rows for y in rows)
    return ok and len(rows) == 64, "x XOR y stays in the point set (s=3, m=6)"


def check_character_sums() -> tuple[bool, str]:
    rule = _random_rule(random.Random(5), 2, 2, 3)
    pts = generate_point_set(rule)
    for k in itertools.product(range(1 << 5), repeat=2):
        cs = character_sum(k, rule, pts)
        if cs not in (0, 1) or (cs == 1) != dual_membership(k, rule):
            return False, f"k={k}"
    return True, "s=2, m=2, m'=3, all k < 32"


def check_dual_form() -> tuple[bool, str]:
    rule = _random_rule(random.Random(11), 2, 3, 4)
    o = b_dual_oracle(rule, 1 << 18)
    diff = abs(b_points(rule).value - o.value)
    return diff <= o.tail, f"|point - dual| = {diff:.3g}, tail = {o.tail:.3g}"


def check_fast_slow() -> tuple[bool, str]:
    params = CbcParams(3, 4, 5, 2, WeightModel.product_weights([0.5, 0.25, 0.125]))
    (r1, a), (r2, b) = cbc_slow(params), cbc_fast(params)
    ok = r1.generators == r2.generators and np.allclose(a.B_trace, b.B_trace, rtol=1e-9, atol=0)
    return ok, f"generators {list(r2.generators)}"


def check_bound() -> tuple[bool, str]:
    rule, _ = cbc_fast(CbcParams(3, 6, 6, 2, WeightModel.product_weights([0.5, 0.25, 0.125])))
    rep = verify_construction(rule, strict=False)
    return rep["holds"], f"B = {rep['B']:.3g} <= {rep['min_cbc_bound']:.3g}"


def check_kernel_error() -> tuple[bool, str]:
    exact = kernel_1d(2, Fraction(0), Fraction(0))
    e2 = worst_case_error_kernel(np.zeros((1, 1)), 2, WeightModel.product_weights([1.0]))
    return exact == Fraction(31, 120) and abs(e2 - 31 / 120) < 1e-14, "N=1 at the origin: e^2 = 31/120"


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "f2poly.irreducible_counts": check_irreducible_counts,
    "f2poly.division": check_division,
    "kernel.constants": check_constants,
    "kernel.omega_closed_form": check_omega,
    "points.net_closure": check_net_closure,
    "criterion.character_sums": check_character_sums,
    "criterion.dual_form": check_dual_form,
    "cbc.fast_equals_slow": check_fast_slow,
    "cbc.bound": check_bound,
    "qmc.kernel_error": check_kernel_error,
}


def run_all() -> list[dict]:
    out = []
    for name, fn in CHECKS.items():
        try:
            passed, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        out.append({"check": name, "passed": bool(passed), "detail": detail})
    return out


def constants_table(alphas=(2, 3, 4)) -> list[dict]:
    rows = []
    for alpha in alphas:
        c = d_alpha(alpha)
        a1, a2 = a_lambda_1(alpha, 1), a_lambda_2(alpha, 1)
        rows.append(
            {
                **c.as_dict(),
                "A_1": str(a1),
                "A_1_float": float(a1),
                "A_2": str(a2),
                "A_2_float": float(a2),
            }
        )
    return rows
