"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import random
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from coinfer import cli, fixtures
from coinfer.changepoint import detect_changes
from coinfer.config_map import (
    ConfigurationMap,
    MapEntry,
    Strategy,
    build_map,
    compute_reward,
    enumerate_strategies,
)
from coinfer.dynamic_planner import OnlineOptimizer
from coinfer.latency_model import default_ground_truth, fit, generate_synthetic_profiles
from coinfer.simulator import ReplayConfig, accuracy_vs_deadline, compare, replay
from coinfer.static_planner import estimate_latency, plan_static

STEP_SEED = 0
STATIONARY_SEED = 1


def step_samples(seed: int = STEP_SEED) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.concatenate([rng.normal(1000.0, 50.0, 100), rng.normal(5000.0, 50.0, 100)])


def stationary_samples(seed: int = STATIONARY_SEED) -> np.ndarray:
    """Constant 1000 kbps stream with tiny (1 kbps) Gaussian jitter."""
    return np.random.default_rng(seed).normal(1000.0, 1.0, 1000)


def _exit_or_zero(plan) -> int:
    return 0 if plan is None else plan.exit_point


# -- 1 ---------------------------------------------------------------------------


def check_planner_oracle():
    rng = random.Random(20240601)
    t0 = time.perf_counter()
    mismatches = 0
    instances = 0
    for k in range(1200):
        integer = k % 3 == 0
        model, predictor = oracles.random_instance(rng, integer=integer)
        for _ in range(3):
            bw = oracles.random_bandwidth(rng, integer=integer)
            lat_all = oracles.latency(model, predictor, model.num_exits, 0, bw)
            req = float(rng.randint(1, 400)) if integer else rng.uniform(0.2, 1.5) * lat_all
            got = plan_static(model, predictor, bw, req)
            want = oracles.plan(model, predictor, bw, req)
            instances += 1
            if want is None or got is None:
                mismatches += (want is None) != (got is None)
                continue
            if (got.exit_point, got.partition_point) != want[:2] or not math.isclose(
                got.predicted_latency_ms, want[2], rel_tol=1e-12, abs_tol=1e-12
            ):
                mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30 and instances >= 1000
    return ok, f"{instances} instances, {mismatches} mismatches, {elapsed:.1f} s"


# -- 2 ---------------------------------------------------------------------------


def check_latency_golden():
    model, predictor = fixtures.hand()
    got = [estimate_latency(model, predictor, 1, p, 1000.0) for p in range(3)]
    return got == [30.0, 131.0, 103.0], f"p=0,1,2 -> {got} ms"


# -- 3 ---------------------------------------------------------------------------


def check_monotonicity():
    rng = random.Random(7)
    violations = 0
    for _ in range(200):
        model, predictor = oracles.random_instance(rng)
        ref = oracles.latency(model, predictor, model.num_exits, 0, 1.0)
        req = rng.uniform(0.05, 1.2) * ref
        bws = sorted(oracles.random_bandwidth(rng) for _ in range(25))
        exits = [_exit_or_zero(plan_static(model, predictor, b, req)) for b in bws]
        violations += sum(b < a for a, b in zip(exits, exits[1:]))
        bw = oracles.random_bandwidth(rng)
        reqs = sorted(rng.uniform(0.01, 1.5) * ref for _ in range(25))
        exits = [_exit_or_zero(plan_static(model, predictor, bw, r)) for r in reqs]
        violations += sum(b < a for a, b in zip(exits, exits[1:]))
    return violations == 0, f"200 fixtures x 2 sweeps, {violations} violations"


# -- 4 ---------------------------------------------------------------------------


def check_reward():
    rng = random.Random(11)
    worst = 0.0
    zero_violations = 0
    boundary_violations = 0
    count = 0
    while count < 10_000:
        model, predictor = oracles.random_instance(rng, max_exits=3, max_layers=8)
        for _ in range(100):
            br = rng.choice(model.branches)
            p = rng.randint(0, br.num_layers)
            bw = oracles.random_bandwidth(rng)
            lat = oracles.latency(model, predictor, br.exit_index, p, bw)
            req = lat * rng.uniform(0.5, 1.5)
            got = compute_reward(model, predictor, Strategy(br.exit_index, p), bw, req)
            count += 1
            if got.latency_ms > req:
                zero_violations += got.reward != 0.0
            else:
                want = math.exp(br.accuracy) + 1000.0 / got.latency_ms
                worst = max(worst, abs(got.reward - want) / want)
            # the boundary latency == requirement is feasible
            at = compute_reward(model, predictor, Strategy(br.exit_index, p), bw, got.latency_ms)
            boundary_violations += not at.reward > 0
    ok = worst <= 1e-12 and zero_violations == 0 and boundary_violations == 0
    return ok, (f"{count} inputs, max rel err {worst:.2e}, {zero_violations} nonzero infeasible, "
                f"{boundary_violations} boundary failures")


# -- 5 ---------------------------------------------------------------------------


def check_map_optimality():
    model, predictor = fixtures.alexnet()
    states = fixtures.oboe_states()
    t0 = time.perf_counter()
    cmap = build_map(model, predictor, states, 1000.0)
    elapsed = time.perf_counter() - t0
    violations = 0
    for e in cmap:
        stored = oracles.reward(e.accuracy, oracles.latency(model, predictor, *_pair(e.strategy), e.state_kbps), 1000.0)
        for s in enumerate_strategies(model):
            acc = model.branches[s.exit_point - 1].accuracy
            r = oracles.reward(acc, oracles.latency(model, predictor, *_pair(s), e.state_kbps), 1000.0)
            if r > stored:
                violations += 1
                break
    ok = (len(cmap) == 428 and violations == 0 and elapsed < 10
          and 0 < states[0] and states[-1] <= 6000.0)
    return ok, (f"{len(cmap)} states in ({states[0]:.1f}, {states[-1]:.1f}] kbps, "
                f"{violations} violations, build {elapsed:.2f} s")


def _pair(s: Strategy):
    return s.exit_point, s.partition_point


# -- 6 ---------------------------------------------------------------------------


def check_changepoint():
    step = [i for i, o in enumerate(detect_changes(step_samples())) if o.changed]
    flat = [i for i, o in enumerate(detect_changes(stationary_samples())) if o.changed]
    ok = len(step) == 1 and abs(step[0] - 100) <= 10 and not flat
    return ok, f"step fixture changes at {step}, stationary fixture changes {len(flat)}"


# -- 7 ---------------------------------------------------------------------------


def two_state_map() -> ConfigurationMap:
    return ConfigurationMap([
        MapEntry(1000.0, Strategy(2, 0), 1.0, 0.7, 1.0, True),
        MapEntry(5000.0, Strategy(3, 4), 1.0, 0.8, 1.0, True),
    ])


def check_dynamic_contract():
    cmap = two_state_map()
    opt = OnlineOptimizer(cmap)
    seq = [opt.step(x) for x in step_samples()]
    strategies = [r.strategy for r in seq]
    changes = [k for k in range(1, len(seq)) if strategies[k] != strategies[k - 1]]
    flagged = [k for k in range(1, len(seq)) if seq[k].switched]
    ok = (
        strategies[0] == Strategy(2, 0)
        and len(changes) == 1
        and flagged == changes
        and strategies[changes[0]] == Strategy(3, 4)
        and all(s == strategies[-1] for s in strategies[changes[0]:])
    )
    return ok, f"strategy changes at {changes} -> {strategies[-1]}, switch flags after start at {flagged}"


# -- 8, 9 ------------------------------------------------------------------------


def bus_replays():
    model, predictor = fixtures.alexnet()
    trace = fixtures.bus_trace()
    cmap = build_map(model, predictor, fixtures.oboe_states(), 1000.0)
    static = replay(ReplayConfig("static", 1000.0, trace, model, predictor))
    dynamic = replay(ReplayConfig("dynamic", 1000.0, trace, model, predictor, map=cmap))
    return model, static, dynamic


def check_static_vs_dynamic():
    _, static, dynamic = bus_replays()
    c = compare(dynamic, static)
    ok = c.throughput_dominance >= 0.8 and c.reward_max_rel_gap < c.throughput_max_rel_gap
    return ok, (f"throughput dominance {c.throughput_dominance:.2f}, max rel gap reward "
                f"{c.reward_max_rel_gap:.4f} vs throughput {c.throughput_max_rel_gap:.4f}")


def check_exit_constant():
    model, _, dynamic = bus_replays()
    exits = {s.exit_point for s in dynamic.steps}
    parts = sorted({s.partition_point for s in dynamic.steps})
    # partition follows bandwidth: offloading more layers goes with a faster link
    mean_bw = {
        p: float(np.mean([s.bandwidth_kbps for s in dynamic.steps if s.partition_point == p])) for p in parts
    }
    follows = all(mean_bw[a] < mean_bw[b] for a, b in zip(parts, parts[1:]))
    ok = exits == {model.num_exits} and len(parts) >= 2 and follows
    shown = ", ".join(f"p={p}: {bw:.0f}" for p, bw in mean_bw.items())
    return ok, f"exits {sorted(exits)}, mean kbps per partition {{{shown}}} over {len(dynamic.steps)} steps"


# -- 10 --------------------------------------------------------------------------


def check_baselines():
    model, predictor = fixtures.calibrated_alexnet()
    device_only = estimate_latency(model, predictor, model.num_exits, 0, 1000.0)
    edge_compute = estimate_latency(model, predictor, model.num_exits, model.branches[-1].num_layers, 1e12)
    deadlines = [25.0 * k for k in range(1, 161)]
    violations = 0
    rows = 0
    for bw in (300.0, 1000.0, 3000.0, 10_000.0, 50_000.0):
        table = accuracy_vs_deadline(model, predictor, bw, deadlines)
        by_deadline: dict[float, dict] = {}
        for r in table:
            by_deadline.setdefault(r.deadline_ms, {})[r.method] = r
        for methods in by_deadline.values():
            rows += 1
            joint = methods["joint"]
            if any(methods[m].feasible for m in ("device_only", "edge_only", "partition_only")) and not joint.feasible:
                violations += 1
            po = methods["partition_only"]
            if joint.feasible and po.feasible and joint.accuracy < po.accuracy:
                violations += 1
    ok = violations == 0 and device_only > 2000.0
    return ok, (f"{rows} (bandwidth, deadline) points, {violations} violations; device-only "
                f"{device_only:.0f} ms vs edge compute {edge_compute:.0f} ms")


# -- 11 --------------------------------------------------------------------------


def _max_rel_error(truth, predictor) -> float:
    worst = 0.0
    for key, m in truth.items():
        q = predictor.coefficients[key]
        worst = max(worst, abs(q.intercept - m.intercept) / abs(m.intercept))
        for name, w in m.weights.items():
            worst = max(worst, abs(q.weights[name] - w) / abs(w))
    return worst


def check_regression_recovery():
    truth = default_ground_truth()
    clean = _max_rel_error(truth, fit(generate_synthetic_profiles(truth, n=100, noise_sd=0.0, seed=3)))
    noisy = _max_rel_error(truth, fit(generate_synthetic_profiles(truth, n=100, noise_sd=0.01, seed=3)))
    return clean <= 1e-9 and noisy <= 0.05, f"max rel coefficient error: noiseless {clean:.1e}, noise 0.01 {noisy:.4f}"


# -- 12 --------------------------------------------------------------------------


def cli_pipeline(out: Path) -> list[int]:
    d = fixtures.DATA_DIR
    bus = ["--trace", str(fixtures.BUS_TRACE), "--trace-format", "belgium", "--rescale", "100", "10000"]
    steps = [
        ["gen-profiles", "--seed", "5", "--noise-sd", "0.01", "--n", "60", "--out", str(out / "profiles.csv")],
        ["fit", "--profiles", str(out / "profiles.csv"), "--out", str(out / "predictor.json")],
        ["plan", "--model", str(d / "hand_model.json"), "--predictor", str(d / "hand_predictor.json"),
         "--bandwidth-kbps", "1000", "--latency-ms", "50", "--out", str(out / "plan.json")],
        ["plan", "--predictor", str(out / "predictor.json"), "--bandwidth-kbps", "3000",
         "--latency-ms", "800", "--out", str(out / "plan_alexnet.json")],
        ["build-map", "--oboe-dir", str(fixtures.OBOE_DIR), "--latency-ms", "1000", "--out", str(out / "map.json")],
        ["build-map", "--states", "500,1000,2000,4000", "--latency-ms", "1000", "--out", str(out / "map4.json")],
        ["detect", *bus, "--out", str(out / "changes.csv")],
        ["simulate", "--mode", "dynamic", "--map", str(out / "map.json"), *bus,
         "--latency-ms", "1000", "--out-dir", str(out / "replay")],
        ["simulate", "--mode", "static", *bus, "--latency-ms", "1000", "--out-dir", str(out / "replay")],
        ["simulate", "--mode", "partition_only", *bus, "--latency-ms", "1000", "--out-dir", str(out / "replay")],
        ["compare", "--a", str(out / "replay" / "dynamic_summary.json"),
         "--b", str(out / "replay" / "static_summary.json"), "--out", str(out / "cmp")],
        ["sweep", "--kind", "bandwidth", "--bandwidths", "100,300,1000,3000,10000",
         "--latency-ms", "600", "--out", str(out / "sweep_bw.csv")],
        ["sweep", "--kind", "deadline", "--bandwidth-kbps", "1000", "--deadlines", "100,300,600,1000",
         "--out", str(out / "sweep_deadline.csv")],
        ["sweep", "--kind", "baselines", "--bandwidth-kbps", "1000", "--deadlines", "100,300,600,1000",
         "--out", str(out / "sweep_baselines.csv")],
    ]
    return [cli.run(argv) for argv in steps]


def _snapshot(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def check_determinism(tmp_path: Path):
    first, second = tmp_path / "a", tmp_path / "b"
    codes = cli_pipeline(first) + cli_pipeline(second)
    a, b = _snapshot(first), _snapshot(second)
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    ok = all(c == 0 for c in codes) and not differing and len(a) >= 15
    return ok, f"{len(a)} output files, exit codes {sorted(set(codes))}, {len(differing)} differ"


# -- pytest wrappers -------------------------------------------------------------


CHECKS = {
    1: check_planner_oracle,
    2: check_latency_golden,
    3: check_monotonicity,
    4: check_reward,
    5: check_map_optimality,
    6: check_changepoint,
    7: check_dynamic_contract,
    8: check_static_vs_dynamic,
    9: check_exit_constant,
    10: check_baselines,
    11: check_regression_recovery,
}


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number, record_criterion):
    ok, detail = CHECKS[number]()
    record_criterion(number, ok, detail)
    assert ok, detail


def test_criterion_12_cli_determinism(tmp_path, record_criterion):
    ok, detail = check_determinism(tmp_path)
    record_criterion(12, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    import tempfile

    failed = 0
    for number, check in [*sorted(CHECKS.items()), (12, None)]:
        if check is None:
            with tempfile.TemporaryDirectory() as tmp:
                ok, detail = check_determinism(Path(tmp))
        else:
            ok, detail = check()
        failed += not ok
        print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    raise SystemExit(1 if failed else 0)
