"""Discrete-time replay of bandwidth traces against the planners.

At every measurement interval the trace is sampled with step-and-hold
interpolation and the mode's strategy for that instant is scored with the
planner-layer latency and reward functions. Frames are processed one at a
time, so throughput is simply 1000 / latency.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .bandwidth import BandwidthTrace
from .changepoint import DetectorConfig
from .config_map import ConfigurationMap, Strategy, compute_reward
from .dynamic_planner import OnlineOptimizer
from .errors import ValidationError
from .latency_model import LatencyPredictor
from .model_graph import BranchyModel
from .static_planner import fastest_strategy, model_costs, plan_static

MODES = ("static", "dynamic", "device_only", "edge_only", "partition_only")
QUANTILE_POINTS = 100


@dataclass
class ReplayConfig:
    mode: str
    latency_requirement_ms: float
    trace: BandwidthTrace
    model: BranchyModel
    predictor: LatencyPredictor
    map: ConfigurationMap | None = None
    measurement_interval_ms: int = 1000
    detector_config: DetectorConfig | None = None

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if (self.map is not None) != (self.mode == "dynamic"):
            raise ValidationError("a configuration map is required for dynamic mode and only for it")
        if not self.latency_requirement_ms > 0:
            raise ValidationError("latency requirement must be positive")
        if self.measurement_interval_ms <= 0:
            raise ValidationError("measurement interval must be positive")


@dataclass(frozen=True)
class StepRecord:
    timestamp_ms: int
    bandwidth_kbps: float
    exit_point: int
    partition_point: int
    latency_ms: float
    throughput_fps: float
    reward: float
    feasible: bool
    # only filled in dynamic mode
    state_kbps: float | None = None
    switched: bool | None = None


@dataclass
class ReplayReport:
    mode: str
    model_name: str
    trace_source: str
    latency_requirement_ms: float
    measurement_interval_ms: int
    steps: list[StepRecord]
    summary: dict = field(default_factory=dict)

    @property
    def throughputs(self) -> list[float]:
        return [s.throughput_fps for s in self.steps]

    @property
    def rewards(self) -> list[float]:
        return [s.reward for s in self.steps]


def quantile_grid(n: int = QUANTILE_POINTS) -> list[float]:
    return [k / n for k in range(1, n + 1)]


def cdf_values(values: Sequence[float], n: int = QUANTILE_POINTS) -> list[float]:
    """Inverse empirical CDF at q = 1/n, 2/n, ..., 1: the smallest sample x
    with F(x) >= q."""
    if not values:
        raise ValueError("no values")
    xs = sorted(values)
    m = len(xs)
    return [xs[-(-k * m // n) - 1] for k in range(1, n + 1)]


def _median(values: Sequence[float]) -> float:
    xs = sorted(values)
    m = len(xs)
    mid = m // 2
    return xs[mid] if m % 2 else (xs[mid - 1] + xs[mid]) / 2


def summarize(steps: Sequence[StepRecord]) -> dict:
    tps = [s.throughput_fps for s in steps]
    switches = sum(
        1 for a, b in zip(steps, steps[1:])
        if (a.exit_point, a.partition_point) != (b.exit_point, b.partition_point)
    )
    return {
        "steps": len(steps),
        "mean_throughput_fps": math.fsum(tps) / len(tps),
        "median_throughput_fps": _median(tps),
        "feasible_percent": 100.0 * sum(s.feasible for s in steps) / len(steps),
        "switch_count": switches,
        "quantiles": quantile_grid(),
        "throughput_cdf": cdf_values(tps),
        "reward_cdf": cdf_values([s.reward for s in steps]),
    }


def sample_times(trace: BandwidthTrace, interval_ms: int) -> list[int]:
    t0, t1 = trace.timestamps_ms[0], trace.timestamps_ms[-1]
    return list(range(t0, t1 + 1, interval_ms))


class _FixedPolicy:
    def __init__(self, strategy: Strategy):
        self.strategy = strategy

    def __call__(self, bandwidth_kbps):
        return self.strategy, None


def _policy(cfg: ReplayConfig):
    model, predictor = cfg.model, cfg.predictor
    deepest = model.branches[-1]
    if cfg.mode == "device_only":
        return _FixedPolicy(Strategy(deepest.exit_index, 0))
    if cfg.mode == "edge_only":
        return _FixedPolicy(Strategy(deepest.exit_index, deepest.num_layers))
    if cfg.mode == "partition_only":
        costs = model_costs(model, predictor)[-1]

        def partition_only(bw):
            return Strategy(deepest.exit_index, costs.best_partition(bw)[0]), None

        return partition_only
    if cfg.mode == "static":

        def static(bw):
            plan = plan_static(model, predictor, bw, cfg.latency_requirement_ms)
            if plan is None:
                plan = fastest_strategy(model, predictor, bw)
            return Strategy(plan.exit_point, plan.partition_point), None

        return static
    opt = OnlineOptimizer(cfg.map, cfg.detector_config)

    def dynamic(bw):
        res = opt.step(bw)
        return res.strategy, (res.state_kbps, res.switched)

    return dynamic


def replay(cfg: ReplayConfig) -> ReplayReport:
    cfg.validate()
    policy = _policy(cfg)
    steps = []
    for t in sample_times(cfg.trace, cfg.measurement_interval_ms):
        bw = cfg.trace.at(t)
        strategy, extra = policy(bw)
        r = compute_reward(cfg.model, cfg.predictor, strategy, bw, cfg.latency_requirement_ms)
        state, switched = extra if extra is not None else (None, None)
        steps.append(
            StepRecord(
                timestamp_ms=t,
                bandwidth_kbps=bw,
                exit_point=strategy.exit_point,
                partition_point=strategy.partition_point,
                latency_ms=r.latency_ms,
                throughput_fps=r.throughput_fps,
                reward=r.reward,
                feasible=r.latency_ms <= cfg.latency_requirement_ms,
                state_kbps=state,
                switched=switched,
            )
        )
    return ReplayReport(
        mode=cfg.mode,
        model_name=cfg.model.name,
        trace_source=cfg.trace.source,
        latency_requirement_ms=cfg.latency_requirement_ms,
        measurement_interval_ms=cfg.measurement_interval_ms,
        steps=steps,
        summary=summarize(steps),
    )


# -- comparison -------------------------------------------------------------


def _rel_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


@dataclass
class Comparison:
    mode_a: str
    mode_b: str
    quantiles: list[float]
    throughput_a: list[float]
    throughput_b: list[float]
    reward_a: list[float]
    reward_b: list[float]

    @property
    def throughput_delta(self) -> list[float]:
        return [a - b for a, b in zip(self.throughput_a, self.throughput_b)]

    @property
    def reward_delta(self) -> list[float]:
        return [a - b for a, b in zip(self.reward_a, self.reward_b)]

    @property
    def throughput_dominance(self) -> float:
        """Fraction of quantile points where A's throughput is >= B's."""
        return sum(a >= b for a, b in zip(self.throughput_a, self.throughput_b)) / len(self.quantiles)

    @property
    def reward_dominance(self) -> float:
        return sum(a >= b for a, b in zip(self.reward_a, self.reward_b)) / len(self.quantiles)

    @property
    def throughput_max_rel_gap(self) -> float:
        return max(_rel_gap(a, b) for a, b in zip(self.throughput_a, self.throughput_b))

    @property
    def reward_max_rel_gap(self) -> float:
        return max(_rel_gap(a, b) for a, b in zip(self.reward_a, self.reward_b))

    def summary(self) -> dict:
        return {
            "mode_a": self.mode_a,
            "mode_b": self.mode_b,
            "throughput_dominance": self.throughput_dominance,
            "reward_dominance": self.reward_dominance,
            "throughput_max_rel_gap": self.throughput_max_rel_gap,
            "reward_max_rel_gap": self.reward_max_rel_gap,
        }

    def rows(self) -> list[dict]:
        return [
            {
                "quantile": q,
                "throughput_a": ta,
                "throughput_b": tb,
                "throughput_delta": ta - tb,
                "reward_a": ra,
                "reward_b": rb,
                "reward_delta": ra - rb,
            }
            for q, ta, tb, ra, rb in zip(
                self.quantiles, self.throughput_a, self.throughput_b, self.reward_a, self.reward_b
            )
        ]


def compare(report_a: ReplayReport, report_b: ReplayReport) -> Comparison:
    for attr in ("model_name", "trace_source", "latency_requirement_ms", "measurement_interval_ms"):
        if getattr(report_a, attr) != getattr(report_b, attr):
            raise ValidationError(
                f"reports differ in {attr}: {getattr(report_a, attr)!r} vs {getattr(report_b, attr)!r}"
            )
    if [s.timestamp_ms for s in report_a.steps] != [s.timestamp_ms for s in report_b.steps]:
        raise ValidationError("reports cover different sample times")
    return Comparison(
        mode_a=report_a.mode,
        mode_b=report_b.mode,
        quantiles=quantile_grid(),
        throughput_a=cdf_values(report_a.throughputs),
        throughput_b=cdf_values(report_b.throughputs),
        reward_a=cdf_values(report_a.rewards),
        reward_b=cdf_values(report_b.rewards),
    )


# -- static sweeps ----------------------------------------------------------

METHODS = ("joint", "device_only", "edge_only", "partition_only")


@dataclass(frozen=True)
class DeadlineRow:
    deadline_ms: float
    method: str
    feasible: bool
    accuracy: float | None
    exit_point: int | None
    partition_point: int | None
    latency_ms: float | None

    @property
    def signed_accuracy(self) -> float | None:
        """Accuracy, negated when the deadline is missed; None if no plan."""
        if self.accuracy is None:
            return None
        return self.accuracy if self.feasible else -self.accuracy


def accuracy_vs_deadline(
    model: BranchyModel,
    predictor: LatencyPredictor,
    bandwidth_kbps: float,
    deadlines: Sequence[float],
) -> list[DeadlineRow]:
    """Feasibility and accuracy of the joint planner and the three
    single-knob baselines at each deadline."""
    costs = model_costs(model, predictor)[-1]
    deepest = model.branches[-1]
    p_best, lat_best = costs.best_partition(bandwidth_kbps)
    baselines = {
        "device_only": (0, costs.latency(0, bandwidth_kbps)),
        "edge_only": (deepest.num_layers, costs.latency(deepest.num_layers, bandwidth_kbps)),
        "partition_only": (p_best, lat_best),
    }
    rows = []
    for d in deadlines:
        if not d > 0:
            raise ValueError(f"deadline must be positive, got {d}")
        plan = plan_static(model, predictor, bandwidth_kbps, d)
        if plan is None:
            rows.append(DeadlineRow(d, "joint", False, None, None, None, None))
        else:
            rows.append(
                DeadlineRow(d, "joint", True, plan.accuracy, plan.exit_point, plan.partition_point,
                            plan.predicted_latency_ms)
            )
        for method, (p, lat) in baselines.items():
            rows.append(DeadlineRow(d, method, lat <= d, deepest.accuracy, deepest.exit_index, p, lat))
    return rows


@dataclass(frozen=True)
class SweepRow:
    bandwidth_kbps: float
    latency_requirement_ms: float
    exit_point: int | None
    partition_point: int | None
    predicted_latency_ms: float | None
    accuracy: float | None


def _sweep_row(model, predictor, bw, req) -> SweepRow:
    plan = plan_static(model, predictor, bw, req)
    if plan is None:
        return SweepRow(bw, req, None, None, None, None)
    return SweepRow(bw, req, plan.exit_point, plan.partition_point, plan.predicted_latency_ms, plan.accuracy)


def bandwidth_sweep(model, predictor, bandwidths: Sequence[float], latency_requirement_ms: float) -> list[SweepRow]:
    return [_sweep_row(model, predictor, b, latency_requirement_ms) for b in bandwidths]


def deadline_sweep(model, predictor, bandwidth_kbps: float, deadlines: Sequence[float]) -> list[SweepRow]:
    return [_sweep_row(model, predictor, bandwidth_kbps, d) for d in deadlines]


# -- report files -----------------------------------------------------------


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


def write_rows(rows: Sequence[dict], path: str | Path, header: Sequence[str]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_csv_value(row[h]) for h in header])


STEP_COLUMNS = (
    "timestamp_ms", "bandwidth_kbps", "exit_point", "partition_point",
    "latency_ms", "throughput_fps", "reward", "feasible",
)
DECISION_COLUMNS = ("timestamp_ms", "sample_kbps", "state_kbps", "exit_point", "partition_point", "switched")


def write_report(report: ReplayReport, out_dir: str | Path) -> dict[str, Path]:
    """Per-step CSV, summary JSON and CDF CSV (plus a decision log in dynamic
    mode), all prefixed with the mode name."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "steps": out_dir / f"{report.mode}_steps.csv",
        "summary": out_dir / f"{report.mode}_summary.json",
        "cdf": out_dir / f"{report.mode}_cdf.csv",
    }
    write_rows([asdict(s) for s in report.steps], paths["steps"], STEP_COLUMNS)
    meta = {
        "mode": report.mode,
        "model_name": report.model_name,
        "trace_source": report.trace_source,
        "latency_requirement_ms": report.latency_requirement_ms,
        "measurement_interval_ms": report.measurement_interval_ms,
    }
    paths["summary"].write_text(json.dumps({**meta, **report.summary}, indent=2) + "\n")
    s = report.summary
    write_rows(
        [{"quantile": q, "throughput_fps": t, "reward": r}
         for q, t, r in zip(s["quantiles"], s["throughput_cdf"], s["reward_cdf"])],
        paths["cdf"],
        ("quantile", "throughput_fps", "reward"),
    )
    if report.mode == "dynamic":
        paths["decisions"] = out_dir / "dynamic_decisions.csv"
        write_rows(
            [{**asdict(st), "sample_kbps": st.bandwidth_kbps} for st in report.steps],
            paths["decisions"],
            DECISION_COLUMNS,
        )
    return paths


def load_report(out_dir: str | Path, mode: str) -> ReplayReport:
    """Read back a report written by :func:`write_report`."""
    out_dir = Path(out_dir)
    meta = json.loads((out_dir / f"{mode}_summary.json").read_text())
    steps = []
    with (out_dir / f"{mode}_steps.csv").open(newline="") as fh:
        for row in csv.DictReader(fh):
            steps.append(
                StepRecord(
                    timestamp_ms=int(row["timestamp_ms"]),
                    bandwidth_kbps=float(row["bandwidth_kbps"]),
                    exit_point=int(row["exit_point"]),
                    partition_point=int(row["partition_point"]),
                    latency_ms=float(row["latency_ms"]),
                    throughput_fps=float(row["throughput_fps"]),
                    reward=float(row["reward"]),
                    feasible=row["feasible"] == "true",
                )
            )
    if not steps:
        raise ValidationError(f"{mode} report in {out_dir} has no steps")
    return ReplayReport(
        mode=meta["mode"],
        model_name=meta["model_name"],
        trace_source=meta["trace_source"],
        latency_requirement_ms=meta["latency_requirement_ms"],
        measurement_interval_ms=meta["measurement_interval_ms"],
        steps=steps,
        summary=summarize(steps),
    )
