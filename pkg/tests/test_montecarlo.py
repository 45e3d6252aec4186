import math
from dataclasses import replace

import numpy as np
import pytest

from crmud.model import SystemParams, reference_params
from crmud.montecarlo import (
    BLOCK_SLOTS,
    OccupancyMode,
    _draw_slots,
    _evaluate,
    _queue_busy,
    estimate_capacity,
    estimate_departure_rate,
    run_trials,
    simulate_queue,
    simulate_slot,
)
from crmud.sched import Scheduler
from oracles import mean_log2_ratio_snr

ALL = [Scheduler.TWO_STAGE, Scheduler.MAX_SNR, Scheduler.GENIE]


def _params(**kw):
    base = dict(p_d=0.8, p_f=0.3, lam=0.5, mu_min=0.95, P_p=10.0, P_s_max=10.0, R=0.5, N=1)
    base.update(kw)
    return SystemParams(**base)


def test_perfect_detection_silences_busy_slots():
    p = _params(p_d=1.0, N=3)
    rng = np.random.default_rng(0)
    for _ in range(200):
        out = simulate_slot(p, "max_snr", OccupancyMode.analytic(), rng, primary_busy=True)
        assert out.sensing_says_busy and out.secondary_rate == 0.0 and out.decision is None
        assert out.primary_success is not None


def test_constant_false_alarm_silences_idle_slots():
    p = _params(p_f=1.0, N=3)
    rng = np.random.default_rng(1)
    for _ in range(200):
        out = simulate_slot(p, "genie", OccupancyMode.analytic(), rng, primary_busy=False)
        assert out.secondary_rate == 0.0 and out.primary_success is None


def test_slot_outcome_invariants():
    p = reference_params(4)
    rng = np.random.default_rng(2)
    for _ in range(500):
        out = simulate_slot(p, "two_stage", OccupancyMode.analytic(), rng)
        if out.secondary_rate > 0:
            assert not out.sensing_says_busy and out.decision is not None
        assert (out.primary_success is None) == (not out.primary_busy)


def test_queue_slot_needs_state():
    with pytest.raises(ValueError):
        simulate_slot(reference_params(), "max_snr", OccupancyMode.queue(), np.random.default_rng(0))


def test_never_transmitting_network_has_zero_capacity():
    p = _params(p_d=1.0, p_f=1.0, N=5)
    for sch in ALL:
        est = estimate_capacity(p, sch, trials=20_000, seed=3)
        assert est.mean == 0.0 and est.std_error == 0.0


def test_single_user_unbounded_power_matches_quadrature():
    # lam=0 and p_f=0: every slot idle and used; huge P_s_max: the SNR is K*beta/alpha
    p = _params(lam=0.0, p_f=0.0, P_s_max=1e12)
    est = estimate_capacity(p, "max_snr", trials=400_000, seed=5)
    oracle = mean_log2_ratio_snr(p.K)
    assert abs(est.mean - oracle) <= 4 * est.std_error


def test_ordering_under_shared_stream():
    for n in (1, 5, 40):
        res = run_trials(reference_params(n), ALL, trials=50_000, seed=7)
        low, mid, up = (res.capacity[s] for s in ALL)
        for a, b in ((low, mid), (mid, up)):
            pooled = math.hypot(a.std_error, b.std_error)
            assert a.mean <= b.mean + 3 * pooled


def test_reproducible_and_seed_sensitive():
    p = reference_params(6)
    a = estimate_capacity(p, "max_snr", trials=3 * BLOCK_SLOTS + 17, seed=11)
    b = estimate_capacity(p, "max_snr", trials=3 * BLOCK_SLOTS + 17, seed=11)
    c = estimate_capacity(p, "max_snr", trials=3 * BLOCK_SLOTS + 17, seed=12)
    assert a == b
    assert a.mean != c.mean


def test_worker_count_does_not_change_results():
    p = reference_params(6)
    one = run_trials(p, ALL, trials=4 * BLOCK_SLOTS + 3, seed=13, workers=1)
    two = run_trials(p, ALL, trials=4 * BLOCK_SLOTS + 3, seed=13, workers=2)
    assert one == two


def test_single_trial_is_valid():
    est = estimate_capacity(reference_params(1), "max_snr", trials=1, seed=0)
    assert est.trials == 1 and est.std_error == 0.0 and est.mean >= 0.0


def test_departure_rate_silent_secondary():
    p = reference_params()
    est = estimate_departure_rate(p, None, trials=400_000, seed=17)
    assert abs(est.mean - math.exp(-p.R_p)) <= 4 * est.std_error
    assert math.exp(-p.R_p) == pytest.approx(0.95943, abs=1e-5)


def test_departure_rate_meets_qos():
    for n in (1, 10):
        est = estimate_departure_rate(reference_params(n), "max_snr", trials=200_000, seed=19)
        assert est.mean >= 0.95 - 4 * est.std_error


def test_departure_rate_without_detection_and_silent_secondary():
    p = _params(p_d=0.0, mu_min=0.9)
    est = estimate_departure_rate(p, None, trials=200_000, seed=23)
    assert abs(est.mean - math.exp(-p.R_p)) <= 4 * est.std_error


def test_queue_recursion_matches_loop():
    rng = np.random.default_rng(29)
    arr = rng.random(5000) < 0.4
    succ = rng.random(5000) < 0.5
    q, busy = 0, []
    for a, s in zip(arr, succ):
        q += a
        busy.append(q > 0)
        if q > 0 and s:
            q -= 1
    np.testing.assert_array_equal(_queue_busy(arr, succ), busy)


def test_queue_empty_without_arrivals():
    r = simulate_queue(_params(lam=0.0), "max_snr", slots=50_000, seed=1)
    assert r.busy_fraction == 0.0 and not r.saturated


def test_queue_utilization():
    p = reference_params(5)
    r = simulate_queue(p, "max_snr", slots=400_000, seed=31)
    assert r.busy_fraction == pytest.approx(p.lam / r.empirical_mu, abs=0.01)
    assert r.empirical_mu >= 0.95 - 0.005


def test_overloaded_queue_is_flagged():
    # lam just below the interference-free rate but above what the secondary leaves
    p = _params(lam=0.955, mu_min=0.9)
    r = simulate_queue(p, "max_snr", slots=200_000, seed=37)
    assert r.saturated
    assert r.busy_fraction > 0.99


def test_occupancy_modes_agree():
    p = reference_params(10)
    q = run_trials(p, [Scheduler.MAX_SNR], OccupancyMode.queue(), trials=400_000, seed=41)
    mu_hat = q.queue_mu[Scheduler.MAX_SNR]
    a = run_trials(p, [Scheduler.MAX_SNR], OccupancyMode.analytic(mu_hat), trials=400_000, seed=43)
    cq, ca = q.capacity[Scheduler.MAX_SNR], a.capacity[Scheduler.MAX_SNR]
    assert abs(cq.mean - ca.mean) <= 3 * math.hypot(cq.std_error, ca.std_error)


def test_busy_idle_decomposition():
    base = run_trials(reference_params(8), ALL, trials=50_000, seed=47).capacity
    perfect = run_trials(replace(reference_params(8), p_d=1.0), ALL, trials=50_000, seed=47)
    for sch in ALL:
        b, q = base[sch], perfect.capacity[sch]
        assert b.busy_mean + b.idle_mean == pytest.approx(b.mean, rel=1e-12)
        assert b.busy_mean > 0
        assert q.busy_mean == 0.0
        assert q.idle_mean > 0


def test_busy_rate_carries_primary_interference():
    p = reference_params(4)
    rnd = _draw_slots(p, np.random.default_rng(53), 10_000)
    arr = _evaluate(p, Scheduler.MAX_SNR, rnd)
    snr = arr.decision.snr
    miss = ~arr.detected
    np.testing.assert_allclose(arr.rate_busy[miss], np.log2(1 + snr / (1 + rnd.draw.beta_p * p.P_p))[miss], rtol=1e-14)
    np.testing.assert_array_equal(arr.rate_busy[arr.detected], 0.0)
    use = ~arr.false_alarm
    np.testing.assert_allclose(arr.rate_idle[use], np.log2(1 + snr)[use], rtol=1e-14)
    both = miss & use
    assert np.all(arr.rate_busy[both] <= arr.rate_idle[both])


def test_ci95_brackets_mean():
    est = estimate_capacity(reference_params(3), "genie", trials=10_000, seed=59)
    lo, hi = est.ci95
    assert lo < est.mean < hi
    assert hi - lo == pytest.approx(2 * 1.96 * est.std_error, rel=1e-3)


def test_occupancy_mode_validation():
    with pytest.raises(ValueError):
        OccupancyMode("other")
    with pytest.raises(ValueError):
        OccupancyMode.analytic(1.5)
    with pytest.raises(ValueError):
        OccupancyMode("queue", 0.9)
    with pytest.raises(ValueError):
        run_trials(reference_params(), ALL, trials=0)
