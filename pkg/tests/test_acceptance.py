"""Acceptance criteria, one test each. Every test prints a single
``ACCEPTANCE <n> PASS|FAIL`` line (also when pytest captures output) and
counts its wall-clock budget as part of the criterion."""

import dataclasses
import math
import time

import numpy as np
import pytest

from fedsgda.cli import cli_main
from fedsgda.core import (
    RoundSchedule,
    RunConfig,
    SamplingMode,
    SmoothnessConstants,
)
from fedsgda.engine import ServerState, run, run_round, sample_clients, schedule_theoretical_storm
from fedsgda.estimators import CollectedGradients, mb_estimate
from fedsgda.harness import build_instance, load_config
from fedsgda.oracle import (
    InnerMaxMethod,
    argmax_y,
    finite_diff,
    grad_phi,
    population,
)
from fedsgda.problems import (
    SyntheticProblem,
    SyntheticProblemConfig,
    auc_metric,
    client_gradient_matrix,
    dissimilarity,
    generate_synthetic,
    lipschitz_constants,
)
from fedsgda.rng import Phase, RngStream

DESK = SyntheticProblemConfig(p=10, num_clients=20, samples_per_client=20)


@pytest.fixture
def report(capsys):
    def emit(n, name, passed, detail, elapsed, budget):
        ok = passed and elapsed < budget
        line = (f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'} {name}: {detail} "
                f"runtime={elapsed:.1f}s budget={budget:.0f}s")
        with capsys.disabled():
            print("\n" + line)
        assert passed, line
        assert elapsed < budget, line
    return emit


def desk_instance(seed):
    ds = generate_synthetic(DESK, seed)
    return SyntheticProblem(DESK), ds


def brute_auc(scores, labels):
    pos = scores[labels > 0]
    neg = scores[labels <= 0]
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0) + 0.5 * (diff == 0)).sum() / (len(pos) * len(neg)))


# -- 1 --------------------------------------------------------------------------------

def test_criterion_1_oracle_equivalences(report):
    t0 = time.perf_counter()
    worst = {"fd": 0.0, "argmax": 0.0, "danskin": 0.0, "pl": 0.0}
    for family in ("desk-synthetic", "desk-auc"):
        inst = build_instance(load_config(family), 0)
        prob, ds = inst.problem, inst.datasets
        pop = population(prob, ds)
        p, q = prob.dims
        gen = np.random.default_rng(1)
        for _ in range(100):
            x, y = gen.standard_normal(p), gen.standard_normal(q)
            c = ds[int(gen.integers(len(ds)))]
            fields = c.take(slice(int(gen.integers(len(c))), None)) if family == "desk-auc" else \
                c.take(slice(0, 1))
            g = np.concatenate(prob.batch_grads(x, y, fields))
            fd = finite_diff(lambda z: float(prob.batch_loss(z[:p], z[p:], fields)), np.concatenate([x, y]))
            worst["fd"] = max(worst["fd"], np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
        for _ in range(20):
            x = gen.standard_normal(p)
            closed = argmax_y(prob, ds, x)
            numeric = argmax_y(prob, ds, x, InnerMaxMethod.NUMERIC)
            worst["argmax"] = max(worst["argmax"], float(np.linalg.norm(closed.y_star - numeric.y_star)))
        for _ in range(50):
            x = gen.standard_normal(p)
            g = grad_phi(prob, ds, x)
            fd = finite_diff(lambda v: pop.evaluate(v, pop.argmax_y(v)).phi, x, 1e-5)
            worst["danskin"] = max(worst["danskin"], float(np.linalg.norm(g - fd) / (1 + np.linalg.norm(g))))
        if family == "desk-synthetic":
            mu = prob.mu
            for _ in range(1000):
                ev = pop.evaluate(gen.standard_normal(p), gen.standard_normal(q))
                gap = ev.phi - ev.f
                worst["pl"] = max(worst["pl"], abs(ev.gy @ ev.gy / (2 * mu) - gap) / (1 + gap))
    passed = worst["fd"] <= 1e-6 and worst["argmax"] <= 1e-6 and worst["danskin"] <= 1e-4 and worst["pl"] <= 1e-8
    detail = " ".join(f"{k}={v:.2e}" for k, v in worst.items())
    report(1, "oracle equivalences", passed, detail, time.perf_counter() - t0, 30)


# -- 2 --------------------------------------------------------------------------------

def _hand_gda(prob, client, x, y, eta, gamma, rounds):
    """Plain deterministic GDA with per-sample gradients written out longhand."""
    a, b, c = client.fields["a"], client.fields["b"], client.fields["c"]
    nu, mu = prob.nu, prob.mu
    traj = []
    for _ in range(rounds):
        gx = np.zeros_like(x)
        gy = np.zeros_like(y)
        for j in range(a.shape[0]):
            d = x - a[j]
            gx += d / nu * np.exp(-d * d / (2 * nu)) + b[j] * (b[j] @ (y - c[j]))
            gy += b[j] * (b[j] @ d) - mu * (y - c[j])
        x, y = x - eta * gx / a.shape[0], y + gamma * gy / a.shape[0]
        traj.append(np.concatenate([x, y]))
    return np.array(traj)


def test_criterion_2_reduction_identities(report):
    t0 = time.perf_counter()
    prob, ds = desk_instance(0)
    pop = population(prob, ds)

    # (a) STORM with alpha = beta = 1 against MB, 50 rounds, same seed
    base = dict(num_clients=20, clients_per_round=5, local_steps=5, rounds=50, local_batch_size=5, seed=4)
    sched = lambda t: RoundSchedule(1e-2 / (t + 1) ** (1 / 3), 1e-1 / (t + 1) ** (1 / 3), 1.0, 1.0)
    s_mb, m_mb = run(RunConfig(**base, estimator="MB"), prob, ds, pop=pop, schedule_fn=sched)
    s_st, m_st = run(RunConfig(**base, estimator="STORM"), prob, ds, pop=pop, schedule_fn=sched)
    identical = s_mb.curr == s_st.curr and m_mb == m_st

    # (b) full participation without replacement: exact estimates every round
    full = dict(base, clients_per_round=20, sampling=SamplingMode.WITHOUT_REPLACEMENT, c_eta=1e-2,
                c_gamma=1e-1, rho=1 / 3)
    worst_eps = 0.0
    for est, extra in (("MB", {}), ("STORM", {}), ("SPIDER", dict(spider_period=5, spider_big_batch=20))):
        _, ms = run(RunConfig(**full, estimator=est, **extra), prob, ds, pop=pop)
        worst_eps = max(worst_eps, max(max(m.eps_x, m.eps_y) for m in ms))

    # (c) one client, full batch, K = 1: deterministic GDA
    one = [ds[0]]
    prob1 = SyntheticProblem(dataclasses.replace(DESK, num_clients=1))
    eta, gamma = 1e-2, 1e-1
    ref = _hand_gda(prob1, ds[0], np.zeros(10), np.zeros(10), eta, gamma, 100)
    worst_gda = 0.0
    for est, extra in (("MB", {}), ("STORM", {}), ("SPIDER", dict(spider_period=5, spider_big_batch=1))):
        cfg = RunConfig(num_clients=1, clients_per_round=1, local_steps=1, rounds=100, local_batch_size=20,
                        estimator=est, c_eta=eta, c_gamma=gamma, c_alpha=0.5, rho=0.0, **extra)
        state = ServerState.initial(cfg, np.zeros(10), np.zeros(10))
        traj = []
        for t in range(100):
            state, _ = run_round(state, cfg, prob1, one, RoundSchedule(eta, gamma, 0.5, 0.5))
            traj.append(state.curr.z)
        worst_gda = max(worst_gda, float(np.abs(np.array(traj) - ref).max()))

    passed = identical and worst_eps <= 1e-12 and worst_gda <= 1e-12
    detail = f"storm_alpha1_bitwise={identical} max_eps_full={worst_eps:.1e} max_gda_dev={worst_gda:.1e}"
    report(2, "reduction identities", passed, detail, time.perf_counter() - t0, 30)


# -- 3 --------------------------------------------------------------------------------

TREND_PROBLEM = SyntheticProblemConfig(p=20, num_clients=100, samples_per_client=50)
# three-point grids around the tuned synthetic S=5, K=5 setting: (c_eta, c_gamma, c_alpha, rho)
TREND_GRID = {
    "MB": [(1e-3, 1e-3, 1.0, 0.0), (1e-3, 1e-2, 1.0, 0.0), (1e-2, 1e-2, 1.0, 0.0)],
    "STORM": [(1e-2, 1e-1, 1.0, 1 / 3), (1e-2, 1e-2, 1.0, 1 / 3), (1e-3, 1e-2, 1.0, 1 / 3)],
}


def test_criterion_3_participation_trends(report):
    t0 = time.perf_counter()
    seeds = range(10)
    insts = []
    for seed in seeds:
        ds = generate_synthetic(TREND_PROBLEM, seed)
        prob = SyntheticProblem(TREND_PROBLEM)
        insts.append((prob, ds, population(prob, ds)))
    best = {}
    for est, grid in TREND_GRID.items():
        for S in (5, 10, 20):
            scores = []
            for c_eta, c_gamma, c_alpha, rho in grid:
                finals = []
                for seed, (prob, ds, pop) in zip(seeds, insts):
                    cfg = RunConfig(num_clients=100, clients_per_round=S, local_steps=5, rounds=500,
                                    local_batch_size=5, estimator=est, c_eta=c_eta, c_gamma=c_gamma,
                                    c_alpha=c_alpha, rho=rho, seed=seed)
                    _, ms = run(cfg, prob, ds, pop=pop, metrics_every=cfg.rounds)
                    finals.append(ms[-1].grad_phi_norm_sq)
                scores.append(float(np.mean(finals)))
            best[est, S] = min(scores)
    mono = all(best[e, 5] >= best[e, 10] >= best[e, 20] for e in TREND_GRID)
    storm_wins = best["STORM", 5] <= best["MB", 5]
    detail = " ".join(f"{e}/S{S}={v:.4f}" for (e, S), v in best.items())
    report(3, "participation trends", mono and storm_wins, detail, time.perf_counter() - t0, 180)


# -- 4 --------------------------------------------------------------------------------

def test_criterion_4_mb_error_floor(report):
    t0 = time.perf_counter()
    T = 1000
    plateau = {}
    for S in (5, 20):
        vals = []
        for seed in range(10):
            prob, ds = desk_instance(seed)
            pop = population(prob, ds)
            cfg = RunConfig(num_clients=20, clients_per_round=S, local_steps=5, rounds=T, local_batch_size=5,
                            estimator="MB", c_eta=1e-2, c_gamma=1e-1, rho=0.0, seed=seed)
            state = ServerState.initial(cfg, np.zeros(10), np.zeros(10))
            sched = RoundSchedule(1e-2, 1e-1)
            tail = []
            for t in range(T):
                state, m = run_round(state, cfg, prob, ds, sched, pop if t >= T - 100 else None)
                if m is not None:
                    tail.append(m.grad_phi_norm_sq)
            vals.append(np.mean(tail))
        plateau[S] = float(np.mean(vals))
    ratio = plateau[20] / plateau[5]
    detail = f"plateau_S5={plateau[5]:.4f} plateau_S20={plateau[20]:.4f} ratio={ratio:.3f} (need <= 0.5)"
    report(4, "MB error floor ~ 1/S", ratio <= 0.5, detail, time.perf_counter() - t0, 120)


# -- 5 --------------------------------------------------------------------------------

def test_criterion_5_storm_keeps_decreasing(report):
    t0 = time.perf_counter()
    early, late = [], []
    for seed in range(10):
        prob, ds = desk_instance(seed)
        pop = population(prob, ds)
        cfg = RunConfig(num_clients=20, clients_per_round=5, local_steps=5, rounds=2001, local_batch_size=5,
                        estimator="STORM", c_eta=1e-1, c_gamma=1e-1, c_alpha=1.0, rho=1 / 3, seed=seed)
        state = ServerState.initial(cfg, np.zeros(10), np.zeros(10))
        series = {}
        for t in range(cfg.rounds):
            sched = RoundSchedule(*(c / (t + 1) ** cfg.rho for c in (cfg.c_eta, cfg.c_gamma)),
                                  min(1.0, cfg.c_alpha / (t + 1) ** (2 * cfg.rho)),
                                  min(1.0, cfg.c_alpha / (t + 1) ** (2 * cfg.rho)))
            measure = 400 <= t <= 500 or t >= 1900
            state, m = run_round(state, cfg, prob, ds, sched, pop if measure else None)
            if m is not None:
                series[t] = m.grad_phi_norm_sq
        early.append(np.mean([series[t] for t in range(400, 501)]))
        late.append(np.mean([series[t] for t in range(1900, 2001)]))
    e, l = float(np.mean(early)), float(np.mean(late))
    detail = f"mean[400,500]={e:.5f} mean[1900,2000]={l:.5f} ratio={l / e:.3f} (need <= 0.5)"
    report(5, "STORM continued decrease", l <= 0.5 * e, detail, time.perf_counter() - t0, 180)


# -- 6 --------------------------------------------------------------------------------

def test_criterion_6_estimator_statistics(report):
    t0 = time.perf_counter()
    prob, ds = desk_instance(2)
    gen = np.random.default_rng(5)
    x, y = gen.standard_normal(10), gen.standard_normal(10)
    G, H = client_gradient_matrix(prob, ds, x, y)
    true_u = population(prob, ds).grads(x, y)[0]
    S, draws = 5, 100_000
    target = dissimilarity(prob, ds, x, y)[0] / S
    us = np.empty((draws, 10))
    for t in range(draws):
        idx = sample_clients(RngStream(9, t, Phase.COLLECT), 20, S)
        us[t] = mb_estimate(CollectedGradients(idx, G[idx], H[idx])).u
    err = ((us - true_u) ** 2).sum(-1)
    var_rel = abs(err.mean() / target - 1)
    se = us.std(0, ddof=1) / math.sqrt(draws)
    bias_z = float(np.max(np.abs(us.mean(0) - true_u) / se))

    S, m, big = 4, 4, 16
    cfg = RunConfig(num_clients=20, clients_per_round=S, local_steps=2, rounds=40, local_batch_size=5,
                    estimator="SPIDER", spider_period=m, spider_big_batch=big, c_eta=1e-2, c_gamma=1e-2)
    state = ServerState.initial(cfg, np.zeros(10), np.zeros(10))
    details = []
    for t in range(cfg.rounds):
        state, _ = run_round(state, cfg, prob, ds, RoundSchedule(1e-2, 1e-2), details=details)
    mean_clients = sum(len(d.collect_clients) for d in details) / cfg.rounds
    expected = big / m + S * (m - 1) / m
    passed = var_rel <= 0.05 and bias_z <= 4 and mean_clients == expected == big / S + S - 1
    detail = (f"variance_rel_err={var_rel:.4f} max_bias_z={bias_z:.2f} "
              f"spider_mean_clients={mean_clients} expected={expected}")
    report(6, "estimator statistics", passed, detail, time.perf_counter() - t0, 60)


# -- 7 --------------------------------------------------------------------------------

def test_criterion_7_schedule_correctness(report):
    t0 = time.perf_counter()
    prob, ds = desk_instance(0)
    cases = [(SmoothnessConstants(1, 1, 1, 1, 1), 1, 5),
             (lipschitz_constants(prob, ds, probes=1), 5, 5),
             (SmoothnessConstants(L1=1, L2=1, L12=0, L21=0, mu=1), 1, 20)]
    ok_ratio = ok_alpha = ok_eta = True
    branch_hits = 0
    for consts, K, S in cases:
        lt = consts.Ltilde
        ts = list(range(10_000)) + [int(v) for v in np.logspace(4, 12, 400)]
        prev = None
        for t in ts:
            s = schedule_theoretical_storm(consts, K, S, t)
            if s.gamma == 1 / (192 * lt * K):
                branch_hits += 1
                ok_alpha &= s.alpha == 1 / 16 and s.beta == 1 / 16
            ok_eta &= s.eta <= s.gamma and 0 < s.alpha <= 1
            if prev is not None and prev[0] == t - 1:
                ok_ratio &= prev[1] >= s.gamma >= prev[1] / 2
            prev = (t, s.gamma)
    passed = ok_ratio and ok_alpha and ok_eta and branch_hits > 0
    detail = f"ratio_ok={ok_ratio} alpha_1/16_ok={ok_alpha} eta<=gamma={ok_eta} branch_rounds={branch_hits}"
    report(7, "schedule correctness", passed, detail, time.perf_counter() - t0, 5)


# -- 8 --------------------------------------------------------------------------------

def test_criterion_8_verify_subcommand(report, capsys):
    t0 = time.perf_counter()
    codes = {
        "synthetic": cli_main(["verify", "desk-synthetic"]),
        "auc": cli_main(["verify", "desk-auc"]),
        "canary": cli_main(["verify", "desk-synthetic", "--canary", "1e-3"]),
    }
    capsys.readouterr()
    passed = codes["synthetic"] == 0 and codes["auc"] == 0 and codes["canary"] != 0
    detail = " ".join(f"{k}_exit={v}" for k, v in codes.items())
    report(8, "verify subcommand", passed, detail, time.perf_counter() - t0, 60)


# -- 9 --------------------------------------------------------------------------------

def test_criterion_9_auc_machinery(report):
    t0 = time.perf_counter()
    gen = np.random.default_rng(0)
    exact = True
    for _ in range(20):
        scores = np.round(gen.standard_normal(200), 1)  # rounding forces ties
        labels = np.where(gen.random(200) < 0.25, 1, -1)
        exact &= auc_metric(scores, labels) == brute_auc(scores, labels)
    base = load_config("desk-auc", ["c0_starts=0"])
    assert (base.problem.d, base.problem.num_clients, base.run.clients_per_round,
            base.run.local_steps, base.run.rounds) == (20, 50, 5, 10, 300)
    start, final = [], []
    for seed in range(5):
        inst = build_instance(base, seed)
        cfg = dataclasses.replace(base.run, seed=seed)
        _, ms = run(cfg, inst.problem, inst.datasets, pop=population(inst.problem, inst.datasets),
                    test=inst.test, metrics_every=cfg.rounds - 1)
        start.append(ms[0].test_auc)
        final.append(ms[-1].test_auc)
    s, f = float(np.mean(start)), float(np.mean(final))
    passed = exact and abs(s - 0.5) <= 0.05 and f >= 0.8
    detail = f"brute_force_exact={exact} initial_auc={s:.3f} final_auc={f:.3f} (need >= 0.8)"
    report(9, "AUC machinery", passed, detail, time.perf_counter() - t0, 120)
