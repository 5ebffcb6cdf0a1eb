"""Joint exit-point / partition-point search for a fixed bandwidth.

Partition point ``p`` of a branch with ``N`` layers runs layers ``1..p`` on the
edge server and ``p+1..N`` on the device:

* ``p == 0``: device only, no transfer at all;
* ``0 < p < N``: the input goes up, layer ``p``'s output comes back down;
* ``p == N``: edge only, the input goes up and the final result is not charged.

Sizes are bytes and bandwidth is kbps, so ``bytes * 8 / kbps`` is milliseconds.
"""

from __future__ import annotations

from dataclasses import dataclass

from .latency_model import LatencyPredictor, Side, predict
from .model_graph import BranchyModel, branch


@dataclass(frozen=True)
class CoInferencePlan:
    exit_point: int
    partition_point: int
    predicted_latency_ms: float
    accuracy: float

    def to_dict(self) -> dict:
        return {
            "exit_point": self.exit_point,
            "partition_point": self.partition_point,
            "predicted_latency_ms": self.predicted_latency_ms,
            "accuracy": self.accuracy,
        }


@dataclass(frozen=True)
class BranchCosts:
    """Per-layer predicted latencies of one branch plus its transfer sizes."""

    exit_index: int
    accuracy: float
    input_bytes: int
    edge_ms: tuple[float, ...]
    device_ms: tuple[float, ...]
    output_bytes: tuple[int, ...]

    @property
    def num_layers(self) -> int:
        return len(self.edge_ms)

    def latency(self, p: int, bandwidth_kbps: float) -> float:
        n = self.num_layers
        if not 0 <= p <= n:
            raise IndexError(f"partition point {p} out of range 0..{n}")
        if bandwidth_kbps <= 0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth_kbps}")
        total = 0.0
        if p > 0:
            total += self.input_bytes * 8 / bandwidth_kbps
        total += sum(self.edge_ms[:p])
        if 0 < p < n:
            total += self.output_bytes[p - 1] * 8 / bandwidth_kbps
        total += sum(self.device_ms[p:])
        return total

    def best_partition(self, bandwidth_kbps: float) -> tuple[int, float]:
        """Latency-minimizing partition point; ties go to the smallest p."""
        best_p, best = 0, self.latency(0, bandwidth_kbps)
        for p in range(1, self.num_layers + 1):
            lat = self.latency(p, bandwidth_kbps)
            if lat < best:
                best_p, best = p, lat
        return best_p, best


def branch_costs(model: BranchyModel, predictor: LatencyPredictor, i: int) -> BranchCosts:
    br = branch(model, i)
    return BranchCosts(
        exit_index=i,
        accuracy=br.accuracy,
        input_bytes=model.input_bytes,
        edge_ms=tuple(predict(predictor, layer, Side.EDGE) for layer in br.layers),
        device_ms=tuple(predict(predictor, layer, Side.DEVICE) for layer in br.layers),
        output_bytes=tuple(layer.output_bytes for layer in br.layers),
    )


def model_costs(model: BranchyModel, predictor: LatencyPredictor) -> tuple[BranchCosts, ...]:
    """Costs of every branch, exit 1 first.

    Both inputs are immutable, so the result is memoized on the predictor
    object (keyed by model identity; the entry keeps the model alive).
    """
    cached = predictor._costs_cache.get(id(model))
    if cached is not None and cached[0] is model:
        return cached[1]
    costs = tuple(branch_costs(model, predictor, i) for i in range(1, model.num_exits + 1))
    predictor._costs_cache[id(model)] = (model, costs)
    return costs


def estimate_latency(
    model: BranchyModel,
    predictor: LatencyPredictor,
    i: int,
    p: int,
    bandwidth_kbps: float,
) -> float:
    return model_costs(model, predictor)[branch(model, i).exit_index - 1].latency(p, bandwidth_kbps)


def plan_static(
    model: BranchyModel,
    predictor: LatencyPredictor,
    bandwidth_kbps: float,
    latency_requirement_ms: float,
) -> CoInferencePlan | None:
    """Most accurate plan meeting the deadline, or None if none does.

    Branches are tried deepest first; within a branch the latency-minimizing
    partition is taken, and the first branch whose minimum fits is returned.
    """
    for costs in reversed(model_costs(model, predictor)):
        p, lat = costs.best_partition(bandwidth_kbps)
        if lat <= latency_requirement_ms:
            return CoInferencePlan(costs.exit_index, p, lat, costs.accuracy)
    return None


def fastest_strategy(model: BranchyModel, predictor: LatencyPredictor, bandwidth_kbps: float) -> CoInferencePlan:
    """Globally latency-minimizing (exit, partition); used as the fallback when
    nothing is feasible. Ties go to the lower exit, then smaller p."""
    best = None
    for costs in model_costs(model, predictor):
        p, lat = costs.best_partition(bandwidth_kbps)
        if best is None or lat < best.predicted_latency_ms:
            best = CoInferencePlan(costs.exit_index, p, lat, costs.accuracy)
    return best
