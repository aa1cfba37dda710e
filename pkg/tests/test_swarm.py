import numpy as np
import pytest

from gahub import swarm
from gahub.protocol import ExperimentConfig
from conftest import live_server, small_params


def tiny_config(budget=5000, **overrides):
    return ExperimentConfig(ga=small_params(**overrides), evaluation_budget=budget)


def profile(cid, **kw):
    kw.setdefault("rng_seed", hash(cid) % 2**31)
    return swarm.ClientProfile(client_id=cid, **kw)


# -- client_loop -----------------------------------------------------------------------


def test_single_client_does_exactly_budget_over_segment_reports():
    with live_server(tiny_config(budget=5000)) as (url, hub, _):
        summary = swarm.client_loop(profile("solo"), url, no_delay=True)
        assert summary.segments_done == 5  # 5000 / (20 gen x 50 offspring)
        assert summary.evaluations_contributed == 5000
        assert summary.stop_reason == "budget"
        assert not summary.abnormal
        assert hub.get_stats()["evaluations_total"] == 5000


def test_leave_after_one_segment():
    with live_server(tiny_config(budget=10**9)) as (url, hub, _):
        summary = swarm.client_loop(profile("quitter", leave_after=1), url, no_delay=True)
        assert summary.segments_done == 1
        assert summary.stop_reason == "left"
        assert hub.get_stats()["evaluations_total"] == 1000


def test_finished_experiment_stops_clients_after_one_exchange():
    with live_server(tiny_config(budget=1000)) as (url, hub, _):
        plan = swarm.SwarmPlan(
            [profile("a"), profile("b")], base_segment_delay=0.0
        )
        report = swarm.run_swarm(plan, url, no_delay=True)
        for s in report.client_summaries:
            assert s.segments_done == 1
            assert s.stop_reason == "budget"


def test_unreachable_server_is_abnormal_exit():
    summary = swarm.client_loop(profile("lost"), "http://127.0.0.1:1", no_delay=True)
    assert summary.abnormal
    assert summary.segments_done == 0


def test_client_determinism_same_seed_same_trajectory():
    with live_server(tiny_config(budget=3000)) as (url, _, __):
        a = swarm.client_loop(profile("d1", rng_seed=9), url, no_delay=True)
    with live_server(tiny_config(budget=3000)) as (url, _, __):
        b = swarm.client_loop(profile("d2", rng_seed=9), url, no_delay=True)
    assert a.best_fitness == b.best_fitness
    assert a.segments_done == b.segments_done


# -- run_swarm -------------------------------------------------------------------------


def test_swarm_conservation_and_peak_concurrency():
    with live_server(tiny_config(budget=6000)) as (url, hub, _):
        plan = swarm.SwarmPlan([profile("a"), profile("b"), profile("c")])
        report = swarm.run_swarm(plan, url, no_delay=True)
        assert report.peak_concurrency >= 2
        assert report.abnormal_exits == 0
        total = sum(s.evaluations_contributed for s in report.client_summaries)
        assert report.total_evaluations == total
        assert hub.get_stats()["evaluations_total"] == total


def test_slow_client_contributes_minority():
    with live_server(tiny_config(budget=20_000)) as (url, _, __):
        plan = swarm.SwarmPlan(
            [
                profile("fast", speed_factor=1.0, rng_seed=1),
                profile("slow", speed_factor=10.0, rng_seed=2),
            ],
            base_segment_delay=0.05,
        )
        report = swarm.run_swarm(plan, url)
        by_id = {s.client_id: s for s in report.client_summaries}
        slow_share = by_id["slow"].evaluations_contributed / report.total_evaluations
        assert slow_share < 0.20


# -- make_plan -----------------------------------------------------------------------------


def test_make_plan_deterministic():
    a = swarm.make_plan(10, "lognormal:0.5", "leave:0.5,1,3", seed=4)
    b = swarm.make_plan(10, "lognormal:0.5", "leave:0.5,1,3", seed=4)
    assert swarm.plan_to_payload(a) == swarm.plan_to_payload(b)


def test_make_plan_no_churn_44_clients():
    plan = swarm.make_plan(44, "constant:1", "none", seed=0)
    assert len(plan.profiles) == 44
    assert all(p.leave_after is None for p in plan.profiles)
    assert len({p.client_id for p in plan.profiles}) == 44


def test_make_plan_rejoin_adds_replacements():
    plan = swarm.make_plan(20, "constant:1", "leave:1.0,1,2,rejoin", seed=1)
    leavers = [p for p in plan.profiles if p.leave_after is not None]
    rejoiners = [p for p in plan.profiles if p.leave_after is None]
    assert len(leavers) == 20
    assert len(rejoiners) == 20
    assert all(r.join_time > 0 for r in rejoiners)


def test_lognormal_speed_quantiles_match_distribution():
    from scipy import stats

    sigma = 0.8
    plan = swarm.make_plan(10_000, f"lognormal:{sigma}", "none", seed=7)
    speeds = np.array([p.speed_factor for p in plan.profiles])
    for q in (0.25, 0.5, 0.75):
        expected = stats.lognorm.ppf(q, s=sigma)
        assert abs(np.quantile(speeds, q) - expected) / expected < 0.05


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_clients=0),
        dict(n_clients=2, speed_spec="warp:9"),
        dict(n_clients=2, speed_spec="uniform:2,1"),
        dict(n_clients=2, churn_spec="leave:2"),
        dict(n_clients=2, churn_spec="leave:0.5,3,1"),
    ],
)
def test_make_plan_invalid_specs(kwargs):
    with pytest.raises(ValueError):
        swarm.make_plan(**kwargs)


def test_plan_file_roundtrip(tmp_path):
    plan = swarm.make_plan(5, "uniform:0.5,2", "leave:0.4,1,4", seed=3, base_segment_delay=0.5)
    path = tmp_path / "plan.json"
    swarm.save_plan(plan, path)
    loaded = swarm.load_plan(path)
    assert swarm.plan_to_payload(loaded) == swarm.plan_to_payload(plan)


def test_duplicate_client_ids_rejected():
    with pytest.raises(ValueError):
        swarm.SwarmPlan([profile("same"), profile("same")])
