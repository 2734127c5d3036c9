from __future__ import annotations

import os
import random

import pytest
from hypothesis import HealthCheck, settings

from polylat import f2poly
from polylat.kernel import WeightModel
from polylat.points import RuleSpec

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


def halving_weights(s: int) -> WeightModel:
    return WeightModel.product_weights([2.0**-j for j in range(1, s + 1)])


def random_rule(rng: random.Random, s: int, m: int, mprime: int, alpha: int = 2, weights=None) -> RuleSpec:
    w = halving_weights(s) if weights is None else weights
    gens = tuple(rng.randrange(1 << mprime) for _ in range(s))
    return RuleSpec(s, m, mprime, f2poly.find_irreducible(mprime), gens, alpha, w)


@pytest.fixture
def rng():
    return random.Random(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
