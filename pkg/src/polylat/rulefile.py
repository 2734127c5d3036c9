"""JSON rule files and the weight-spec mini language.

Weight specs::

    prod:0.5^j           gamma_j = 0.5^j
    prod:1*j^-2          gamma_j = 1 * j^-2
    prod:0.7             gamma_j = 0.7 for every j
    prod:[1,0.5,0.2]     explicit list (also without brackets)
    general:@file.json   {"gamma_empty": 1.0, "subsets": [{"u": [1, 2], "gamma": 0.3}, ...]}
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from . import __version__, f2poly
from .kernel import WeightModel
from .points import RuleSpec

RULE_FILE_VERSION = 1
_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_POWER = re.compile(rf"^({_NUM})\^j$")
_DECAY = re.compile(rf"^({_NUM})\*j\^\(?-({_NUM})\)?$")
_SCALAR = re.compile(rf"^{_NUM}$")


class WeightSpecError(ValueError):
    pass


def parse_weight_spec(spec: str, s: int) -> WeightModel:
    """Parse a weight spec for dimension ``s``."""
    kind, sep, body = spec.partition(":")
    if not sep:
        raise WeightSpecError(f"weight spec {spec!r} needs a 'prod:' or 'general:' prefix")
    body = body.strip().replace(" ", "")
    if kind == "prod":
        if m := _POWER.match(body):
            c = float(m.group(1))
            return WeightModel.product_weights([c**j for j in range(1, s + 1)])
        if m := _DECAY.match(body):
            c, k = float(m.group(1)), float(m.group(2))
            return WeightModel.product_weights([c * j ** (-k) for j in range(1, s + 1)])
        if _SCALAR.match(body):
            return WeightModel.product_weights([float(body)] * s)
        items = [x for x in body.strip("[]").split(",") if x]
        if items and all(_SCALAR.match(x) for x in items):
            if len(items) != s:
                raise WeightSpecError(f"explicit weight list has {len(items)} entries, need {s}")
            return WeightModel.product_weights([float(x) for x in items])
        raise WeightSpecError(f"cannot parse product weights {body!r}")
    if kind == "general":
        if not body.startswith("@"):
            raise WeightSpecError("general weights are read from a file: general:@file.json")
        try:
            doc = json.loads(Path(body[1:]).read_text())
        except OSError as exc:
            raise WeightSpecError(f"cannot read {body[1:]}: {exc}") from exc
        return _general_from_params(doc, s)
    raise WeightSpecError(f"unknown weight kind {kind!r}")


def _general_from_params(params: dict, s: int) -> WeightModel:
    table = {(): float(params.get("gamma_empty", 1.0))}
    for item in params.get("subsets", []):
        u = tuple(int(j) for j in item["u"])
        if not u:
            raise WeightSpecError("use gamma_empty for the empty set")
        table[u] = float(item["gamma"])
    return WeightModel.general_weights(s, table)


def weights_to_json(weights: WeightModel) -> dict:
    if weights.is_product:
        return {"type": "product", "params": {"gammas": list(weights.product)}}
    subsets = sorted(
        ({"u": sorted(u), "gamma": g} for u, g in weights.general.items() if u),
        key=lambda d: (len(d["u"]), d["u"]),
    )
    return {"type": "general", "params": {"gamma_empty": weights.gamma_empty, "subsets": subsets}}


def weights_from_json(doc: dict, s: int) -> WeightModel:
    if doc.get("type") == "product":
        return WeightModel.product_weights(doc["params"]["gammas"])
    if doc.get("type") == "general":
        return _general_from_params(doc["params"], s)
    raise WeightSpecError(f"unknown weight type {doc.get('type')!r}")


@dataclass(frozen=True)
class RuleFile:
    rule: RuleSpec
    construction: str = "cbc_fast"
    tool_version: str = __version__
    timestamp: str | None = None

    def to_dict(self) -> dict:
        r = self.rule
        return {
            "version": RULE_FILE_VERSION,
            "s": r.s,
            "m": r.m,
            "mprime": r.mprime,
            "alpha": r.alpha,
            "modulus_hex": f2poly.to_hex(r.modulus),
            "generators_hex": [f2poly.to_hex(q) for q in r.generators],
            "weights": weights_to_json(r.weights),
            "provenance": {
                "tool_version": self.tool_version,
                "construction": self.construction,
                "tie_break": "min_encoding",
                "timestamp": self.timestamp,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "RuleFile":
        if doc.get("version") != RULE_FILE_VERSION:
            raise ValueError(f"unsupported rule file version {doc.get('version')!r}")
        s = int(doc["s"])
        rule = RuleSpec(
            s=s,
            m=int(doc["m"]),
            mprime=int(doc["mprime"]),
            modulus=f2poly.from_hex(doc["modulus_hex"]),
            generators=tuple(f2poly.from_hex(h) for h in doc["generators_hex"]),
            alpha=int(doc["alpha"]),
            weights=weights_from_json(doc["weights"], s),
        )
        prov = doc.get("provenance", {})
        return cls(rule, prov.get("construction", "unknown"), prov.get("tool_version", "unknown"), prov.get("timestamp"))

    @classmethod
    def from_json(cls, text: str) -> "RuleFile":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "RuleFile":
        return cls.from_json(Path(path).read_text())
