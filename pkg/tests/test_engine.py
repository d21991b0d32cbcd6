import dataclasses
import math

import numpy as np
import pytest

from fedsgda.core import (
    ConfigError,
    GradientEstimate,
    PrimalDualPoint,
    RoundSchedule,
    RunConfig,
    SamplingMode,
    SmoothnessConstants,
)
from fedsgda.engine import (
    ServerState,
    local_direction,
    local_update_phase,
    local_updates,
    run,
    run_round,
    sample_clients,
    schedule_for,
    schedule_practical,
    schedule_theoretical_mb,
    schedule_theoretical_storm,
)
from fedsgda.problems import ClientDataset, full_local_grads
from fedsgda.rng import Phase, RngStream


def cfg_for(ds, **kw):
    args = dict(num_clients=len(ds), clients_per_round=4, local_steps=3, rounds=6, local_batch_size=5,
                c_eta=1e-2, c_gamma=1e-1, seed=11)
    args.update(kw)
    return RunConfig(**args)


# -- sampling -------------------------------------------------------------------

def test_sample_full_set_without_replacement():
    s = sample_clients(RngStream(1, 0, Phase.COLLECT), 12, 12, SamplingMode.WITHOUT_REPLACEMENT)
    assert s.tolist() == list(range(12))


def test_sample_single_and_sorted():
    s = sample_clients(RngStream(1), 9, 1)
    assert len(s) == 1 and 0 <= s[0] < 9
    s = sample_clients(RngStream(2), 9, 30)
    assert np.all(np.diff(s) >= 0)


def test_sample_without_replacement_too_many():
    with pytest.raises(ConfigError):
        sample_clients(RngStream(1), 5, 6, SamplingMode.WITHOUT_REPLACEMENT)


def test_sample_with_replacement_frequencies():
    s = sample_clients(RngStream(3), 10, 100_000)
    counts = np.bincount(s, minlength=10)
    se = math.sqrt(100_000 * 0.1 * 0.9)
    assert np.all(np.abs(counts - 10_000) <= 4 * se)


# -- local phase ----------------------------------------------------------------

def test_direction_at_anchor_is_estimate_bitwise(synth, gen):
    prob, ds, _ = synth
    anchor = PrimalDualPoint(gen.standard_normal(10), gen.standard_normal(10))
    est = GradientEstimate(gen.standard_normal(10), gen.standard_normal(10))
    for c in ds[:5]:
        d = local_direction(prob, anchor, anchor, c.take(slice(0, 5)), est)
        assert np.array_equal(d.d_x, est.u) and np.array_equal(d.d_y, est.v)


def test_zero_steps_return_anchor(synth, gen):
    prob, ds, _ = synth
    anchor = PrimalDualPoint(gen.standard_normal(10), gen.standard_normal(10))
    est = GradientEstimate(np.ones(10), np.ones(10))
    out = local_update_phase(prob, ds[0], anchor, est, RoundSchedule(0.0, 0.0), 4, 5, RngStream(0))
    assert out == anchor


def test_single_full_batch_step_is_gda(synth, gen):
    prob, ds, _ = synth
    client = ds[3]
    anchor = PrimalDualPoint(gen.standard_normal(10), gen.standard_normal(10))
    gx, gy = full_local_grads(prob, client, anchor)
    out = local_update_phase(prob, client, anchor, GradientEstimate(gx, gy), RoundSchedule(0.1, 0.2), 1,
                             len(client), RngStream(0))
    assert np.array_equal(out.x, anchor.x - 0.1 * gx)
    assert np.array_equal(out.y, anchor.y + 0.2 * gy)


def test_batch_larger_than_client_rejected(synth):
    prob, ds, _ = synth
    pt = PrimalDualPoint(np.zeros(10), np.zeros(10))
    est = GradientEstimate(np.zeros(10), np.zeros(10))
    with pytest.raises(ConfigError):
        local_update_phase(prob, ds[0], pt, est, RoundSchedule(0.1, 0.1), 1, 21, RngStream(0))
    with pytest.raises(ConfigError):
        local_updates(prob, ds, np.array([0, 1]), pt, est, RoundSchedule(0.1, 0.1), 1, 21, 0, 0)


def test_batched_local_updates_match_reference_bitwise(synth, gen):
    prob, ds, _ = synth
    anchor = PrimalDualPoint(gen.standard_normal(10), gen.standard_normal(10))
    est = GradientEstimate(gen.standard_normal(10), gen.standard_normal(10))
    clients = np.array([1, 1, 4, 9, 9, 9, 17])
    sched = RoundSchedule(0.05, 0.1)
    Xb, Yb = local_updates(prob, ds, clients, anchor, est, sched, 4, 5, 3, 2, workers=1)
    Xt, Yt = local_updates(prob, ds, clients, anchor, est, sched, 4, 5, 3, 2, workers=3)
    assert np.array_equal(Xb, Xt) and np.array_equal(Yb, Yt)
    # duplicated client draws follow different minibatch streams
    assert not np.array_equal(Xb[0], Xb[1])


def test_unequal_client_sizes_use_reference_path(synth, gen):
    prob, ds, _ = synth
    mixed = list(ds)
    mixed[2] = ds[2].duplicated(2)
    anchor = PrimalDualPoint(gen.standard_normal(10), gen.standard_normal(10))
    est = GradientEstimate(gen.standard_normal(10), gen.standard_normal(10))
    X, _ = local_updates(prob, mixed, np.array([0, 2]), anchor, est, RoundSchedule(0.05, 0.1), 2, 5, 1, 0)
    assert X.shape == (2, 10) and np.all(np.isfinite(X))


# -- schedules ------------------------------------------------------------------

def test_theoretical_mb_unit_moduli():
    s = schedule_theoretical_mb(SmoothnessConstants(1, 1, 1, 1, 1), 1)
    assert s.gamma == 1 / 1344
    assert s.eta == pytest.approx(s.gamma / 3, rel=1e-15)


def test_theoretical_mb_decoupled():
    c = SmoothnessConstants(L1=1, L2=1, L12=0, L21=0, mu=1)
    s = schedule_theoretical_mb(c, 1)
    lt = 2 * (1 + math.sqrt(2))
    assert s.gamma == min(0.5, 1.0, 1 / (192 * lt))
    assert s.eta == min(0.25, 1.0, s.gamma)


def test_theoretical_mb_halves_with_k():
    c = SmoothnessConstants(1, 1, 1, 1, 1)
    assert schedule_theoretical_mb(c, 2).gamma == schedule_theoretical_mb(c, 1).gamma / 2


def test_theoretical_storm_branch_alpha():
    c = SmoothnessConstants(1, 1, 1, 1, 1)
    s = schedule_theoretical_storm(c, 1, 5, 0)
    assert s.gamma == 1 / 1344
    assert s.alpha == 1 / 16 == s.beta
    late = schedule_theoretical_storm(c, 1, 5, 10**9)
    assert late.gamma < s.gamma
    assert late.alpha == pytest.approx(2304 * (5 / (10**9 + 1)) ** (2 / 3), rel=1e-12)


def test_practical_schedule_examples():
    s = schedule_practical(1e-2, 1e-1, 1.0, 1 / 3, 7)
    assert s.eta == pytest.approx(5e-3, rel=1e-14)
    assert s.gamma == pytest.approx(5e-2, rel=1e-14)
    assert s.alpha == pytest.approx(0.25, rel=1e-14)
    assert schedule_practical(1, 1, 10, 0.2, 0).alpha == 1.0
    const = schedule_practical(1e-3, 2e-3, 1, 0, 50)
    assert (const.eta, const.gamma, const.alpha) == (1e-3, 2e-3, 1.0)


def test_schedule_for_dispatch():
    c = SmoothnessConstants(1, 1, 1, 1, 1)
    ds_cfg = dict(num_clients=4, clients_per_round=2, local_steps=1, rounds=2, local_batch_size=1)
    assert schedule_for(RunConfig(**ds_cfg, schedule="THEORETICAL"), c, 0).gamma == 1 / 1344
    assert schedule_for(RunConfig(**ds_cfg, schedule="THEORETICAL", estimator="STORM"), c, 0).alpha == 1 / 16
    with pytest.raises(ConfigError):
        schedule_for(RunConfig(**ds_cfg, schedule="THEORETICAL"), None, 0)


# -- rounds ---------------------------------------------------------------------

def test_initial_state_prev_equals_curr():
    st = ServerState.initial(RunConfig(num_clients=2, clients_per_round=1, local_steps=1, rounds=1,
                                       local_batch_size=1), np.zeros(3), np.ones(3))
    assert st.prev == st.curr and st.round == 0


def test_run_round_advances_state(synth):
    prob, ds, _ = synth
    cfg = cfg_for(ds)
    st = ServerState.initial(cfg, np.zeros(10), np.zeros(10))
    details = []
    nxt, m = run_round(st, cfg, prob, ds, RoundSchedule(0.01, 0.1), prob.population(ds), details=details)
    assert nxt.round == 1 and nxt.prev == st.curr and nxt.curr != st.curr
    assert m.round == 0 and m.clients_contacted == 4 and m.phi_minus_f >= 0
    assert len(details[0].collect_clients) == 4 and len(details[0].update_clients) == 4


def test_run_round_wrong_client_count(synth):
    prob, ds, _ = synth
    cfg = cfg_for(ds[:5])
    with pytest.raises(ConfigError):
        run_round(ServerState.initial(cfg, np.zeros(10), np.zeros(10)), cfg, prob, ds, RoundSchedule(0.1, 0.1))


def test_same_subsets_flag(synth):
    prob, ds, _ = synth
    for flag in (True, False):
        cfg = cfg_for(ds, same_subsets=flag)
        st = ServerState.initial(cfg, np.zeros(10), np.zeros(10))
        details = []
        for _ in range(3):
            st, _ = run_round(st, cfg, prob, ds, RoundSchedule(0.01, 0.1), details=details)
        same = [np.array_equal(d.collect_clients, d.update_clients) for d in details]
        assert all(same) if flag else not all(same)


@pytest.mark.parametrize("estimator", ["MB", "STORM", "SPIDER"])
def test_runs_are_deterministic_across_workers(synth, estimator):
    prob, ds, _ = synth
    extra = dict(spider_period=3, spider_big_batch=8) if estimator == "SPIDER" else {}
    cfg = cfg_for(ds, estimator=estimator, rho=1 / 3, **extra)
    pop = prob.population(ds)
    s1, m1 = run(cfg, prob, ds, pop=pop)
    s2, m2 = run(cfg, prob, ds, pop=pop, workers=2)
    s3, m3 = run(cfg, prob, ds, pop=pop)
    assert s1.curr == s2.curr == s3.curr
    assert m1 == m2 == m3


def test_storm_with_unit_alpha_matches_mb(synth):
    prob, ds, _ = synth
    sched = lambda t: RoundSchedule(0.01 / (t + 1) ** 0.3, 0.05, 1.0, 1.0)
    pop = prob.population(ds)
    mb = run(cfg_for(ds, estimator="MB"), prob, ds, pop=pop, schedule_fn=sched)
    st = run(cfg_for(ds, estimator="STORM"), prob, ds, pop=pop, schedule_fn=sched)
    assert mb[0].curr == st[0].curr
    assert [m.grad_phi_norm_sq for m in mb[1]] == [m.grad_phi_norm_sq for m in st[1]]


def test_spider_contacts(synth):
    prob, ds, _ = synth
    cfg = cfg_for(ds, estimator="SPIDER", spider_period=3, spider_big_batch=9, rounds=6)
    _, ms = run(cfg, prob, ds, pop=prob.population(ds))
    assert [m.clients_contacted for m in ms] == [9, 4, 4, 9, 4, 4]


def test_metrics_cadence(synth):
    prob, ds, _ = synth
    _, ms = run(cfg_for(ds, rounds=7), prob, ds, pop=prob.population(ds), metrics_every=3)
    assert [m.round for m in ms] == [0, 3, 6]
    with pytest.raises(ConfigError):
        run(cfg_for(ds), prob, ds, metrics_every=0)


def test_divergence_is_reported(synth):
    prob, ds, _ = synth
    with pytest.raises(FloatingPointError):
        with np.errstate(over="ignore", invalid="ignore"):
            run(cfg_for(ds, c_eta=1e150, c_gamma=1e150, rounds=20), prob, ds)
