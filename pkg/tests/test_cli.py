from __future__ import annotations

import io
import json
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polylat.cli import main
from polylat.kernel import WeightModel
from polylat.points import read_bin
from polylat.rulefile import RuleFile, WeightSpecError, parse_weight_spec

from conftest import random_rule


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def rule_path(tmp_path):
    path = tmp_path / "rule.json"
    code, out, _ = run("construct", "-s", "3", "-m", "6", "--weights", "prod:0.5^j", "-o", str(path))
    assert code == 0
    return path


def test_construct_degenerate():
    code, out, err = run("construct", "-s", "1", "-m", "0", "--alpha", "2", "--weights", "prod:1.0")
    assert code == 0, err
    doc = json.loads(out)
    rf = RuleFile.from_dict(doc["rule"])
    assert rf.rule.s == 1 and len(rf.rule.generators) == 1 and rf.rule.m == 0
    assert doc["rule"]["provenance"]["tie_break"] == "min_encoding"


def test_construct_writes_rule(rule_path):
    rf = RuleFile.load(rule_path)
    assert rf.rule.mprime == 6 and rf.construction == "cbc_fast"
    assert rule_path.read_text() == rf.to_json()


def test_construct_slow_matches_fast(tmp_path):
    _, fast, _ = run("construct", "-s", "3", "-m", "4", "--weights", "prod:0.5^j")
    _, slow, _ = run("construct", "-s", "3", "-m", "4", "--weights", "prod:0.5^j", "--slow")
    a, b = json.loads(fast), json.loads(slow)
    assert a["rule"]["generators_hex"] == b["rule"]["generators_hex"]
    assert b["rule"]["provenance"]["construction"] == "cbc_slow"


def test_selftest():
    code, out, _ = run("selftest")
    assert code == 0
    rows = [json.loads(line) for line in out.splitlines()]
    assert rows and all(r["passed"] for r in rows)
    code, out, _ = run("selftest", "--constants")
    assert code == 0 and json.loads(out)[0]["D_alpha"] == "59/144"


def test_criterion_deterministic(rule_path):
    a = run("criterion", "--rule", str(rule_path))
    b = run("criterion", "--rule", str(rule_path))
    assert a == b and a[0] == 0
    doc = json.loads(a[1])
    assert doc["value"] > 0 and doc["lambda_bounds"]


def test_criterion_oracle(tmp_path):
    path = tmp_path / "small.json"
    run("construct", "-s", "2", "-m", "3", "--weights", "prod:1*j^-1", "-o", str(path))
    code, out, _ = run("criterion", "--rule", str(path), "--oracle", "65536")
    doc = json.loads(out)
    assert code == 0 and abs(doc["value"] - doc["oracle_value"]) <= doc["tail"]


def test_points_csv_and_bin(rule_path, tmp_path):
    code, out, _ = run("points", "--rule", str(rule_path))
    rows = [line.split(",") for line in out.splitlines()]
    assert code == 0 and len(rows) == 64 and all(len(r) == 3 for r in rows)
    assert rows[0] == ["0", "0", "0"]
    binp = tmp_path / "pts.bin"
    code, _, _ = run("points", "--rule", str(rule_path), "--format", "bin", "--seed", "7", "-o", str(binp))
    pts, header = read_bin(binp.read_bytes())
    assert code == 0 and header["precision"] == 53 and len(pts) == 64
    assert np.all(pts.values() <= 1.0)
    code, _, err = run("points", "--rule", str(rule_path), "--format", "bin")
    assert code == 2 and json.loads(err)["error"] == "usage"


def test_integrate(rule_path):
    code, out, _ = run("integrate", "--rule", str(rule_path), "--fn", "b2prod", "-R", "8", "--seed", "42")
    doc = json.loads(out)
    assert code == 0 and doc["R"] == 8 and doc["exact"] == 1.0
    assert abs(doc["estimate"] - 1.0) < 1e-2
    again = run("--threads", "2", "integrate", "--rule", str(rule_path), "--fn", "b2prod", "-R", "8", "--seed", "42")
    assert json.loads(again[1]) == doc


def test_convergence(tmp_path):
    code, out, _ = run("convergence", "-s", "2", "--m", "3..5", "--weights", "prod:0.5^j", "-R", "4")
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("m,N,mprime,B,mse_mean,mse_stderr") and len(lines) == 4
    path = tmp_path / "study.csv"
    code, out, _ = run("convergence", "-s", "2", "--m", "3,4", "--weights", "prod:0.5^j", "-R", "2", "--no-mse", "-o", str(path))
    assert code == 0 and "slope_B_full" in json.loads(out) and path.exists()


def test_errors_are_json(tmp_path):
    code, _, err = run("construct", "-s", "2")
    assert code == 2 and json.loads(err)["error"] == "usage"
    code, _, err = run("criterion", "--rule", str(tmp_path / "missing.json"))
    assert code == 1 and "message" in json.loads(err)
    code, _, err = run("construct", "-s", "2", "-m", "3", "--weights", "bogus")
    assert code == 1 and json.loads(err)["error"] == "WeightSpecError"
    code, _, err = run("--threads", "0", "selftest")
    assert code == 2


# rule files and weight specs


def test_weight_specs(tmp_path):
    assert parse_weight_spec("prod:0.5^j", 3).product == (0.5, 0.25, 0.125)
    assert parse_weight_spec("prod:2*j^-2", 2).product == (2.0, 0.5)
    assert parse_weight_spec("prod:2*j^(-2)", 2).product == (2.0, 0.5)
    assert parse_weight_spec("prod:0.7", 2).product == (0.7, 0.7)
    assert parse_weight_spec("prod:[1,0.5]", 2).product == (1.0, 0.5)
    f = tmp_path / "w.json"
    f.write_text(json.dumps({"gamma_empty": 1.0, "subsets": [{"u": [1, 2], "gamma": 0.3}]}))
    w = parse_weight_spec(f"general:@{f}", 2)
    assert w.gamma((1, 2)) == 0.3 and w.gamma((1,)) == 0.0
    for bad in ("0.5^j", "prod:abc", "prod:[1,2,3]", "general:x.json", "prod:-1", "other:1"):
        with pytest.raises((WeightSpecError, ValueError)):
            parse_weight_spec(bad, 2)


@given(st.integers(0, 2**32), st.booleans())
def test_rule_file_round_trip(seed, general):
    rng = random.Random(seed)
    s = rng.randint(1, 4)
    if general:
        w = WeightModel.general_weights(s, {(): 1.0, (1,): rng.random(), tuple(range(1, s + 1)): rng.random()})
    else:
        w = WeightModel.product_weights([rng.random() for _ in range(s)])
    rule = random_rule(rng, s, rng.randint(0, 6), rng.randint(6, 12), alpha=rng.choice([2, 3]), weights=w)
    text = RuleFile(rule, "cbc_fast").to_json()
    back = RuleFile.from_json(text)
    assert back.rule.generators == rule.generators and back.rule.modulus == rule.modulus
    assert back.to_json() == text


def test_rule_file_validation():
    rule = random_rule(random.Random(0), 2, 3, 4)
    doc = RuleFile(rule).to_dict()
    bad = dict(doc, modulus_hex="15")  # x^4 + x^2 + 1 is reducible
    with pytest.raises(ValueError):
        RuleFile.from_dict(bad)
    with pytest.raises(ValueError):
        RuleFile.from_dict(dict(doc, generators_hex=["1f", "1"]))
    with pytest.raises(ValueError):
        RuleFile.from_dict(dict(doc, version=99))
