"""Acceptance criteria, each at its stated tolerance and time limit.

Every test prints one ``ACCEPTANCE <n> PASS|FAIL`` line (also collected into
the terminal summary) before asserting.
"""

from __future__ import annotations

import gc
import math
import random
import statistics
import time
from fractions import Fraction

import numpy as np
import pytest

from polylat import f2poly
from polylat.cbc import CbcParams, ConstructionReport, FastCbc, cbc_fast, cbc_slow, default_mprime, verify_construction
from polylat.criterion import b_dual_oracle, b_points, character_sum, dual_membership, lambda_grid
from polylat.kernel import WeightModel, a_lambda_1, d_alpha, omega_alpha, omega_series_oracle, omega_series_table, omega_table
from polylat.points import RuleSpec, generate_point_set
from polylat.qmc import convergence_study, mse_vs_bound

from conftest import ACCEPTANCE_LINES, halving_weights, random_rule

pytestmark = pytest.mark.acceptance


def report(number: int, ok: bool, detail: str, seconds: float, limit: float | None) -> None:
    timing = f"{seconds:.1f}s" + (f" (limit {limit:.0f}s)" if limit is not None else "")
    line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {detail}; {timing}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_1_omega_closed_form_vs_series():
    t0 = time.perf_counter()
    K = 1 << 22
    worst = -math.inf
    checked = 0
    rng = random.Random(1)
    for alpha in (2, 3):
        for mp in range(2, 9):
            series, tail = omega_series_table(alpha, mp, K)
            closed = omega_table(alpha, mp)
            ls = range(1 << mp) if mp <= 6 else rng.sample(range(1 << mp), min(1000, 1 << mp))
            for l in ls:
                worst = max(worst, abs(closed[l] - series[l]) - tail)
                checked += 1
            # the grouped table against the plain k-by-k partial sum
            for l in rng.sample(range(1 << mp), 2):
                direct, _ = omega_series_oracle(alpha, l, mp, K)
                worst = max(worst, abs(omega_alpha(alpha, l, mp) - direct) - tail)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 120
    report(1, ok, f"{checked} points, max(|closed - series| - tail) = {worst:.2e} <= 1e-10", dt, 120)


def test_2_constants():
    t0 = time.perf_counter()
    D = d_alpha(2).D_alpha
    A = a_lambda_1(2, 1)
    A_float = a_lambda_1(2, 1.0)  # float path
    w0 = omega_alpha(2, 0, 4)
    checks = {
        "omega_2(0) = 5/14": abs(w0 - 5 / 14) <= 1e-12,
        "A_{2,1,1} = 5/14": A == Fraction(5, 14) and abs(float(A_float) - 5 / 14) <= 1e-12,
        "D_2 = 59/144": D == Fraction(59, 144) and abs(float(D) - 59 / 144) <= 1e-12,
    }
    dt = time.perf_counter() - t0
    report(2, all(checks.values()), ", ".join(f"{k}: {'ok' if v else 'bad'}" for k, v in checks.items()), dt, None)


def test_3_dual_lattice_consistency():
    t0 = time.perf_counter()
    rng = random.Random(3)
    bad = total = 0
    for s in (1, 2):
        for mp in range(1, 6):
            for m in range(0, min(mp, 4) + 1):
                for rule in (random_rule(rng, s, m, mp), random_rule(rng, s, m, mp)):
                    pts = generate_point_set(rule)
                    for k in np.ndindex(*([1 << (mp + 2)] * s)):
                        cs = character_sum(k, rule, pts)
                        total += 1
                        if cs not in (0, 1) or (cs == 1) != dual_membership(k, rule):
                            bad += 1
    dt = time.perf_counter() - t0
    report(3, bad == 0 and dt < 60, f"{total} frequency vectors, {bad} mismatches", dt, 60)


def test_4_criterion_equivalence():
    t0 = time.perf_counter()
    w = WeightModel.product_weights([1.0, 0.5])
    rng = random.Random(4)
    worst_ratio = 0.0
    cases = 0
    for mp in range(3, 7):
        rules = [cbc_fast(CbcParams(2, 3, mp, 2, w))[0]] + [random_rule(rng, 2, 3, mp, weights=w) for _ in range(3)]
        for rule in rules:
            o = b_dual_oracle(rule, 1 << 20)
            worst_ratio = max(worst_ratio, abs(b_points(rule).value - o.value) / o.tail)
            cases += 1
    dt = time.perf_counter() - t0
    report(4, worst_ratio <= 1.0 and dt < 120, f"{cases} rules, max |point - dual| / tail = {worst_ratio:.3f}", dt, 120)


def test_5_fast_slow_equivalence():
    t0 = time.perf_counter()
    runs = mismatches = 0
    for s in range(1, 5):
        w = halving_weights(s)
        for m in range(0, 7):
            for alpha in (2, 3):
                for mp in sorted({max(m, 1), default_mprime(alpha, m), 7}):
                    params = CbcParams(s, m, mp, alpha, w)
                    (r1, a), (r2, b) = cbc_slow(params), cbc_fast(params)
                    same = r1.generators == r2.generators and all(
                        abs(x - y) <= 1e-9 * abs(x) for x, y in zip(a.B_trace, b.B_trace)
                    )
                    runs += 1
                    mismatches += not same
    dt = time.perf_counter() - t0
    report(5, mismatches == 0 and dt < 300, f"{runs} parameter sets, {mismatches} mismatches", dt, 300)


def test_6_cbc_bound():
    t0 = time.perf_counter()
    weight_sets = {
        "2^-j": lambda s: halving_weights(s),
        "j^-2": lambda s: WeightModel.product_weights([j**-2.0 for j in range(1, s + 1)]),
        "1": lambda s: WeightModel.product_weights([1.0] * s),
    }
    rules = violations = unresolved = 0
    tightest = math.inf
    for alpha in (2, 3):
        grid = lambda_grid(alpha)
        for name, make in weight_sets.items():
            for s in range(1, 6):
                for m in range(1, 11):
                    rule, _ = cbc_fast(CbcParams(s, m, default_mprime(alpha, m), alpha, make(s)))
                    rep = verify_construction(rule, grid, strict=False)
                    rules += 1
                    violations += not rep["holds"]
                    if rep["B"] > 0:
                        tightest = min(tightest, rep["min_cbc_bound"] / rep["B"])
                    else:
                        unresolved += 1
    dt = time.perf_counter() - t0
    report(6, violations == 0 and dt < 120, f"{rules} rules, {violations} violations, min bound/B = {tightest:.3g} ({unresolved} with B below float resolution)", dt, 120)


def test_7_mean_square_bound():
    t0 = time.perf_counter()
    parts = []
    ok = True
    for m in (6, 8, 10):
        rule, _ = cbc_fast(CbcParams(2, m, default_mprime(2, m), 2, halving_weights(2)))
        cmp = mse_vs_bound(rule, 64, 7, strict=False)
        ok &= cmp.holds and cmp.exact
        parts.append(f"m={m}: {cmp.mean:.3e} - 3*{cmp.stderr:.1e} <= {cmp.B:.3e}")
    dt = time.perf_counter() - t0
    report(7, ok and dt < 300, "; ".join(parts), dt, 300)


@pytest.fixture(scope="module")
def study():
    t0 = time.perf_counter()
    st = convergence_study(2, 2, halving_weights(2), range(6, 13), R=16, seed=0, kernel_mse=False)
    return st, time.perf_counter() - t0


def test_8_convergence_rate(study):
    st, dt = study
    ms = [r["m"] for r in st.records]
    upper = ms[ms.index(9) :]
    sB, sE = st.slopes["slope_B_upper"], st.slopes["slope_rms_err_upper"]
    ok = upper == [9, 10, 11, 12] and sB <= -3.3 and sE <= -1.5 and dt < 600
    report(8, ok, f"m=9..12: slope log2 B = {sB:.2f} (<= -3.3), slope log2 RMS = {sE:.2f} (<= -1.5)", dt, 600)


def test_9_reduced_degree_suffices(study):
    st, dt = study
    halved = all(2 * r["mprime"] == 2 * r["m"] for r in st.records)
    sB, sE = st.slopes["slope_B_upper"], st.slopes["slope_rms_err_upper"]
    ok = halved and sB <= -3.3 and sE <= -1.5
    report(9, ok, f"m' = alpha m / 2 throughout: {halved}; slopes {sB:.2f}, {sE:.2f} meet criterion 8", dt, None)


def _median_step_seconds(mprime: int, runs: int, steps: int = 10) -> float:
    w = halving_weights(steps)
    samples = []
    for _ in range(runs):
        gc.disable()
        try:
            runner = FastCbc(CbcParams(steps, mprime, mprime, 2, w))
            rep = ConstructionReport("cbc_fast")
            for _ in range(steps):
                runner.step(rep)
        finally:
            gc.enable()
        samples += rep.step_seconds[1:]
    return statistics.median(samples)


def test_10_performance_scaling():
    t0 = time.perf_counter()
    ratios = []
    for _ in range(3):
        ratios.append(_median_step_seconds(14, 2) / _median_step_seconds(12, 5))
    ratio = statistics.median(ratios)
    t1 = time.perf_counter()
    rule, _ = cbc_fast(CbcParams(10, 14, 14, 2, halving_weights(10)))
    full = time.perf_counter() - t1
    dt = time.perf_counter() - t0
    ok = 3.0 <= ratio <= 6.0 and full < 60
    detail = f"step time ratio m'=14 / m'=12 = {ratio:.2f} (trials {', '.join(f'{r:.2f}' for r in ratios)}), s=10 m'=14 build {full:.1f}s (< 60s)"
    report(10, ok, detail, dt, None)
