"""Scenario files: JSON documents validated before any computation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import jsonschema

from .analytics import Scenario
from .channel import ChannelModel, NetworkSpec, build_network, db_to_linear
from .optimize import Objective
from .region import SequenceStrategy, order_users
from .simulator import SimConfig, TerminalBehavior


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "type": "object",
    "properties": {
        "users": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"id": {"type": ["string", "integer"]},
                               "mean_snr_db": {"type": "number"}},
                "required": ["mean_snr_db"],
                "additionalProperties": False,
            },
        },
        "network": {
            "type": "object",
            "properties": {
                "model": {"enum": ["identical", "model1", "model2"]},
                "M": {"type": "integer", "minimum": 1},
                "snr_min_db": {"type": "number"},
                "snr_max_db": {"type": "number"},
            },
            "required": ["model", "M", "snr_max_db"],
            "additionalProperties": False,
        },
        "sequence": {
            "oneOf": [
                {"enum": ["ascending", "descending"]},
                {"type": "array", "items": {"type": "integer"}, "minItems": 1},
            ],
        },
        "objective": {
            "oneOf": [
                {"enum": ["proportional_fair", "max_sum"]},
                {"type": "object",
                 "properties": {"weighted_sum": {"type": "array", "items": {"type": "number"}}},
                 "required": ["weighted_sum"], "additionalProperties": False},
            ],
        },
        "seed": {"type": "integer"},
        "sim": {
            "type": "object",
            "properties": {"resource_units": {"type": "integer", "minimum": 1},
                           "batches": {"type": "integer", "minimum": 1},
                           "epsilon": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
        "behaviors": {
            "type": "object",
            "additionalProperties": {"type": "number", "minimum": 0},
        },
        "region": {
            "type": "object",
            "properties": {"steps": {"type": "integer", "minimum": 2},
                           "rays": {"type": "array",
                                    "items": {"type": "array", "items": {"type": "number"}}}},
            "additionalProperties": False,
        },
    },
    "oneOf": [{"required": ["users"]}, {"required": ["network"]}],
    "additionalProperties": False,
}


@dataclass
class ScenarioFile:
    """Parsed scenario file.  ``models`` and ``ids`` are in user-index order;
    ``order`` lists 1-based user indices in feedback order."""

    models: list
    ids: list
    order: list
    sequence: SequenceStrategy
    objective: Objective
    seed: int = 0
    resource_units: int = 1_000_000
    batches: int = 16
    epsilon: float = 0.05
    behaviors: dict = field(default_factory=dict)
    region_steps: int = 101
    rays: Optional[list] = None

    @property
    def users(self) -> int:
        return len(self.models)

    def weights_by_index(self) -> list[float]:
        if self.objective.weights:
            return list(self.objective.weights)
        return [1.0] * self.users

    def scenario(self, weights=None) -> Scenario:
        """Scenario in feedback order."""
        w = self.weights_by_index() if weights is None else list(weights)
        pos = [k - 1 for k in self.order]
        return Scenario.from_models([self.models[k] for k in pos], [w[k] for k in pos],
                                    seed=self.seed, ids=[self.ids[k] for k in pos])

    def sim_config(self, seed: Optional[int] = None) -> SimConfig:
        # behaviors are keyed by user id; the simulator wants feedback positions
        pos_of = {self.ids[k - 1]: p for p, k in enumerate(self.order)}
        behaviors = {pos_of[uid]: TerminalBehavior(v) for uid, v in self.behaviors.items()}
        return SimConfig(self.resource_units, self.batches,
                         self.seed if seed is None else seed, behaviors, self.epsilon)


def parse_scenario(doc: dict) -> ScenarioFile:
    try:
        jsonschema.validate(doc, _SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid scenario file: {exc.message}") from None
    if "users" in doc:
        snrs = [u["mean_snr_db"] for u in doc["users"]]
        ids = [str(u.get("id", k + 1)) for k, u in enumerate(doc["users"])]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate user ids {ids}")
        models = [ChannelModel(float(g)) for g in db_to_linear(snrs)]
    else:
        net = doc["network"]
        hi = float(db_to_linear(net["snr_max_db"]))
        lo = float(db_to_linear(net.get("snr_min_db", net["snr_max_db"])))
        try:
            models = build_network(NetworkSpec(net["M"], net["model"], lo, hi))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        ids = [str(k + 1) for k in range(len(models))]
    m = len(models)

    seq = doc.get("sequence", "descending")
    strategy = SequenceStrategy.given(seq) if isinstance(seq, list) else SequenceStrategy(seq)
    try:
        order = order_users(models, strategy)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    obj = doc.get("objective", "max_sum")
    if obj == "proportional_fair":
        objective = Objective.proportional_fair()
    elif obj == "max_sum":
        objective = Objective.weighted_sum([1.0] * m)
    else:
        weights = obj["weighted_sum"]
        if len(weights) != m:
            raise ConfigError(f"{len(weights)} weights for {m} users")
        try:
            objective = Objective.weighted_sum(weights)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    sim = doc.get("sim", {})
    behaviors = {str(k): float(v) for k, v in doc.get("behaviors", {}).items()}
    unknown = set(behaviors) - set(ids)
    if unknown:
        raise ConfigError(f"behaviors for unknown users {sorted(unknown)}")
    region = doc.get("region", {})
    rays = region.get("rays")
    if rays is not None:
        for ray in rays:
            if len(ray) != m or any(x < 0 for x in ray) or not any(x > 0 for x in ray):
                raise ConfigError(f"bad weight ray {ray}")
    sf = ScenarioFile(models, ids, order, strategy, objective, int(doc.get("seed", 0)),
                      int(sim.get("resource_units", 1_000_000)), int(sim.get("batches", 16)),
                      float(sim.get("epsilon", 0.05)), behaviors,
                      int(region.get("steps", 101)), rays)
    try:
        sf.sim_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return sf


def load_scenario(path) -> ScenarioFile:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_scenario(doc)


def load_thresholds(path) -> list[float]:
    """Rate thresholds from an optimize output file (null = never flag)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
        rates = doc["thresholds_rate"]
        scale = 1.0 if doc.get("unit", "nats") == "nats" else math.log(2.0)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: not a thresholds file ({exc})") from None
    return [math.inf if r is None else float(r) * scale for r in rates]
