"""Reward-driven bandwidth-state -> strategy map for fluctuating links.

Reward of a strategy at a bandwidth state:

    exp(accuracy) + throughput_fps   if latency_ms <= requirement
    0                                otherwise

with throughput_fps = 1000 / latency_ms (one frame at a time, no pipelining).
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ParseError, ValidationError
from .latency_model import LatencyPredictor
from .model_graph import BranchyModel, branch
from .static_planner import model_costs


@dataclass(frozen=True, order=True)
class Strategy:
    exit_point: int
    partition_point: int

    def validate(self, model: BranchyModel) -> "Strategy":
        n = branch(model, self.exit_point).num_layers
        if not 0 <= self.partition_point <= n:
            raise ValidationError(f"partition point {self.partition_point} out of range 0..{n} for exit {self.exit_point}")
        return self


@dataclass(frozen=True)
class Reward:
    reward: float
    throughput_fps: float
    latency_ms: float
    accuracy: float

    @property
    def feasible(self) -> bool:
        return self.reward > 0


def reward_value(accuracy: float, latency_ms: float, latency_requirement_ms: float) -> float:
    if latency_ms <= latency_requirement_ms:
        return math.exp(accuracy) + throughput_fps(latency_ms)
    return 0.0


def throughput_fps(latency_ms: float) -> float:
    return math.inf if latency_ms == 0 else 1000.0 / latency_ms


def compute_reward(
    model: BranchyModel,
    predictor: LatencyPredictor,
    s: Strategy,
    bandwidth_kbps: float,
    latency_requirement_ms: float,
) -> Reward:
    s.validate(model)
    costs = model_costs(model, predictor)[s.exit_point - 1]
    latency = costs.latency(s.partition_point, bandwidth_kbps)
    return Reward(
        reward=reward_value(costs.accuracy, latency, latency_requirement_ms),
        throughput_fps=throughput_fps(latency),
        latency_ms=latency,
        accuracy=costs.accuracy,
    )


@dataclass(frozen=True)
class MapEntry:
    state_kbps: float
    strategy: Strategy
    reward: float
    accuracy: float
    throughput_fps: float
    feasible: bool

    def to_dict(self) -> dict:
        return {
            "state_kbps": self.state_kbps,
            "exit_point": self.strategy.exit_point,
            "partition_point": self.strategy.partition_point,
            "reward": self.reward,
            "accuracy": self.accuracy,
            "throughput_fps": self.throughput_fps,
            "feasible": self.feasible,
        }


class ConfigurationMap:
    """Sorted bandwidth-state entries with nearest-state lookup."""

    def __init__(self, entries: Iterable[MapEntry]):
        self.entries: tuple[MapEntry, ...] = tuple(entries)
        if not self.entries:
            raise ValidationError("configuration map needs at least one entry")
        states = [e.state_kbps for e in self.entries]
        if any(b <= a for a, b in zip(states, states[1:])):
            raise ValidationError("map states must be strictly increasing")
        if states[0] <= 0:
            raise ValidationError("map states must be positive")
        self._states = states

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def states(self) -> list[float]:
        return list(self._states)

    def lookup(self, bandwidth_kbps: float) -> MapEntry:
        return lookup(self, bandwidth_kbps)

    def to_list(self) -> list[dict]:
        return [e.to_dict() for e in self.entries]


def lookup(cmap: ConfigurationMap, bandwidth_kbps: float) -> MapEntry:
    """Entry whose state is nearest to `bandwidth_kbps`; ties go to the lower state.

    Queries outside the state range get the nearest endpoint.
    """
    states = cmap._states
    k = bisect.bisect_left(states, bandwidth_kbps)
    if k == 0:
        return cmap.entries[0]
    if k == len(states):
        return cmap.entries[-1]
    lo, hi = states[k - 1], states[k]
    if hi - bandwidth_kbps < bandwidth_kbps - lo:
        return cmap.entries[k]
    return cmap.entries[k - 1]


def enumerate_strategies(model: BranchyModel) -> list[Strategy]:
    """All (exit, partition) pairs, exit ascending then partition ascending."""
    return [
        Strategy(br.exit_index, p)
        for br in model.branches
        for p in range(br.num_layers + 1)
    ]


def best_for_state(
    model: BranchyModel,
    predictor: LatencyPredictor,
    state_kbps: float,
    latency_requirement_ms: float,
) -> MapEntry:
    costs = model_costs(model, predictor)
    reward_max = 0.0
    best = None
    fastest = None
    for s in enumerate_strategies(model):
        c = costs[s.exit_point - 1]
        lat = c.latency(s.partition_point, state_kbps)
        r = reward_value(c.accuracy, lat, latency_requirement_ms)
        # `<=` keeps the last maximal strategy in enumeration order.
        if r > 0 and reward_max <= r:
            reward_max, best = r, (s, lat, c.accuracy)
        if fastest is None or lat < fastest[1]:
            fastest = (s, lat, c.accuracy)
    if best is None:
        s, lat, acc = fastest
        return MapEntry(state_kbps, s, 0.0, acc, throughput_fps(lat), False)
    s, lat, acc = best
    return MapEntry(state_kbps, s, reward_max, acc, throughput_fps(lat), True)


def build_map(
    model: BranchyModel,
    predictor: LatencyPredictor,
    states: Sequence[float],
    latency_requirement_ms: float,
) -> ConfigurationMap:
    """Exhaustive reward maximization at each bandwidth state.

    States where nothing meets the deadline keep the fastest strategy with
    reward 0 and ``feasible=False`` so lookups never come back empty.
    """
    states = sorted(set(float(s) for s in states))
    if not states:
        raise ValidationError("need at least one bandwidth state")
    if states[0] <= 0:
        raise ValidationError("bandwidth states must be positive")
    return ConfigurationMap(best_for_state(model, predictor, s, latency_requirement_ms) for s in states)


def map_from_list(items: Sequence[dict]) -> ConfigurationMap:
    try:
        entries = [
            MapEntry(
                state_kbps=float(d["state_kbps"]),
                strategy=Strategy(int(d["exit_point"]), int(d["partition_point"])),
                reward=float(d["reward"]),
                accuracy=float(d["accuracy"]),
                throughput_fps=float(d["throughput_fps"]),
                feasible=bool(d["feasible"]),
            )
            for d in items
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"configuration map: bad or missing field {exc}") from None
    return ConfigurationMap(entries)


def load_map(path: str | Path) -> ConfigurationMap:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno) from None
    if not isinstance(data, list):
        raise ParseError("configuration map must be a JSON array", path=path)
    return map_from_list(data)


def write_map(cmap: ConfigurationMap, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cmap.to_list(), indent=2) + "\n")
