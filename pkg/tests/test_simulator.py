import math

import pytest

from coinfer import fixtures
from coinfer.bandwidth import BandwidthTrace
from coinfer.config_map import Strategy, build_map, compute_reward
from coinfer.errors import ValidationError
from coinfer.simulator import (
    ReplayConfig,
    accuracy_vs_deadline,
    bandwidth_sweep,
    cdf_values,
    compare,
    deadline_sweep,
    load_report,
    quantile_grid,
    replay,
    sample_times,
    write_report,
)


@pytest.fixture(scope="module")
def alexnet():
    return fixtures.alexnet()


@pytest.fixture(scope="module")
def cmap(alexnet):
    return build_map(*alexnet, fixtures.oboe_states(), 1000.0)


def constant_trace(kbps, n=30):
    return BandwidthTrace(tuple(1000 * k for k in range(n)), (kbps,) * n, source="const")


def test_cdf_grid():
    assert quantile_grid(4) == [0.25, 0.5, 0.75, 1.0]
    assert cdf_values([3.0, 1.0, 2.0, 4.0], 4) == [1.0, 2.0, 3.0, 4.0]
    assert cdf_values([5.0], 3) == [5.0, 5.0, 5.0]
    # 3 samples on a 100-point grid: F(1) = 1/3 covers q = 0.01..0.33
    vals = cdf_values([1.0, 2.0, 3.0])
    assert vals[:33] == [1.0] * 33 and vals[33:66] == [2.0] * 33 and vals[66:] == [3.0] * 34
    with pytest.raises(ValueError):
        cdf_values([])


def test_sample_times():
    tr = BandwidthTrace((0, 1500, 3000), (1.0, 2.0, 3.0))
    assert sample_times(tr, 1000) == [0, 1000, 2000, 3000]


def test_config_validation(alexnet, cmap):
    m, p = alexnet
    tr = constant_trace(1000.0)
    with pytest.raises(ValidationError):
        replay(ReplayConfig("dynamic", 1000.0, tr, m, p))
    with pytest.raises(ValidationError):
        replay(ReplayConfig("static", 1000.0, tr, m, p, map=cmap))
    with pytest.raises(ValidationError):
        replay(ReplayConfig("bogus", 1000.0, tr, m, p))
    with pytest.raises(ValidationError):
        replay(ReplayConfig("static", 0.0, tr, m, p))


def test_steps_recomputable(alexnet, cmap):
    m, p = alexnet
    tr = fixtures.bus_trace()
    for mode in ("static", "dynamic", "device_only", "edge_only", "partition_only"):
        rep = replay(ReplayConfig(mode, 1000.0, tr, m, p, map=cmap if mode == "dynamic" else None))
        assert len(rep.steps) == 600
        for s in rep.steps:
            r = compute_reward(m, p, Strategy(s.exit_point, s.partition_point), s.bandwidth_kbps, 1000.0)
            assert (r.latency_ms, r.throughput_fps, r.reward) == (s.latency_ms, s.throughput_fps, s.reward)
            assert s.feasible == (s.latency_ms <= 1000.0)
        q = rep.summary["throughput_cdf"]
        assert q == sorted(q) and rep.summary["quantiles"][-1] == 1.0


def test_baseline_modes_fixed(alexnet):
    m, p = alexnet
    tr = fixtures.bus_trace()
    dev = replay(ReplayConfig("device_only", 1000.0, tr, m, p))
    edge = replay(ReplayConfig("edge_only", 1000.0, tr, m, p))
    assert {(s.exit_point, s.partition_point) for s in dev.steps} == {(5, 0)}
    assert {(s.exit_point, s.partition_point) for s in edge.steps} == {(5, 22)}
    assert dev.summary["switch_count"] == 0


def test_constant_trace_static_equals_dynamic(alexnet, cmap):
    m, p = alexnet
    tr = constant_trace(2500.0)
    a = replay(ReplayConfig("static", 1000.0, tr, m, p))
    b = replay(ReplayConfig("dynamic", 1000.0, tr, m, p, map=cmap))
    strat = lambda rep: [(s.exit_point, s.partition_point) for s in rep.steps]
    assert strat(a)[1:] == strat(b)[1:]


def test_impossible_deadline(alexnet):
    m, p = alexnet
    rep = replay(ReplayConfig("static", 1.0, constant_trace(1000.0), m, p))
    assert all(s.reward == 0.0 and not s.feasible for s in rep.steps)
    assert rep.summary["feasible_percent"] == 0.0


def test_compare_self_is_zero(alexnet):
    m, p = alexnet
    rep = replay(ReplayConfig("static", 1000.0, fixtures.bus_trace(), m, p))
    c = compare(rep, rep)
    assert set(c.throughput_delta) == {0.0} and set(c.reward_delta) == {0.0}
    assert c.throughput_dominance == 1.0 and c.throughput_max_rel_gap == 0.0


def test_compare_rejects_mismatch(alexnet):
    m, p = alexnet
    a = replay(ReplayConfig("static", 1000.0, constant_trace(1000.0), m, p))
    b = replay(ReplayConfig("static", 900.0, constant_trace(1000.0), m, p))
    with pytest.raises(ValidationError):
        compare(a, b)
    c = replay(ReplayConfig("static", 1000.0, constant_trace(1000.0, n=10), m, p))
    with pytest.raises(ValidationError):
        compare(a, c)


def test_report_round_trip(tmp_path, alexnet, cmap):
    m, p = alexnet
    rep = replay(ReplayConfig("dynamic", 1000.0, fixtures.bus_trace(), m, p, map=cmap))
    paths = write_report(rep, tmp_path)
    assert {k for k in paths} == {"steps", "summary", "cdf", "decisions"}
    back = load_report(tmp_path, "dynamic")
    assert [s.throughput_fps for s in back.steps] == rep.throughputs
    assert back.summary["throughput_cdf"] == rep.summary["throughput_cdf"]


def test_accuracy_vs_deadline_examples():
    m, p = fixtures.calibrated_alexnet()
    rows = accuracy_vs_deadline(m, p, 1000.0, [10.0, 1000.0, 1e9])
    by = {(r.deadline_ms, r.method): r for r in rows}
    # device-only needs more than two seconds
    assert not any(by[(d, "device_only")].feasible for d in (10.0, 1000.0))
    # a very tight deadline defeats every method
    assert not any(by[(10.0, meth)].feasible for meth in ("joint", "device_only", "edge_only", "partition_only"))
    assert by[(10.0, "joint")].signed_accuracy is None
    assert by[(10.0, "device_only")].signed_accuracy == -0.78
    # unconstrained: the deepest exit
    assert by[(1e9, "joint")].exit_point == 5 and by[(1e9, "joint")].accuracy == 0.78
    with pytest.raises(ValueError):
        accuracy_vs_deadline(m, p, 1000.0, [0.0])


def test_sweeps_monotone(alexnet):
    m, p = alexnet
    rows = bandwidth_sweep(m, p, [50.0, 100.0, 300.0, 1000.0, 3000.0, 10_000.0], 450.0)
    exits = [r.exit_point or 0 for r in rows]
    assert exits == sorted(exits) and exits[0] < exits[-1]
    rows = deadline_sweep(m, p, 1000.0, [50, 100, 200, 300, 450, 500, 600, 1000])
    exits = [r.exit_point or 0 for r in rows]
    assert exits == sorted(exits) and exits[0] < exits[-1]


def test_constant_bandwidth_replays_monotone(alexnet):
    m, p = alexnet
    exits = []
    for bw in (50.0, 200.0, 1000.0, 5000.0):
        rep = replay(ReplayConfig("static", 450.0, constant_trace(bw, n=3), m, p))
        exits.append(rep.steps[0].exit_point if rep.steps[0].feasible else 0)
    assert exits == sorted(exits)


def test_summary_fields(alexnet):
    m, p = alexnet
    rep = replay(ReplayConfig("static", 1000.0, constant_trace(1000.0, n=5), m, p))
    s = rep.summary
    assert s["steps"] == 5
    assert s["mean_throughput_fps"] == pytest.approx(s["median_throughput_fps"])
    assert math.isclose(s["feasible_percent"], 100.0)
