"""The FedSGDA round protocol and its step-size schedules.

A round has two phases. In the gradient-collection phase a client subset
returns full local gradients at the current (and, for the recursive
estimators, previous) server point and the estimator turns them into a
global estimate (u_t, v_t). In the parameter-update phase a second,
independently sampled subset runs K drift-corrected local SGDA steps from
the server point and the server averages the endpoints.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    ConfigError,
    EstimatorKind,
    GradientEstimate,
    LocalDirection,
    PrimalDualPoint,
    RoundMetrics,
    RoundSchedule,
    RunConfig,
    SamplingMode,
    ScheduleKind,
    SmoothnessConstants,
    mean_rows,
)
from .estimators import (
    CollectedGradients,
    EstimatorState,
    RequiredPoints,
    advance,
    initial_state,
    required_points,
)
from .oracle import round_metrics
from .problems import AucProblem, ClientDataset, auc_metric, client_gradient_matrix, stack_fields
from .rng import Phase, RngStream, client_key, minibatch_indices, occurrences


# -- client sampling ------------------------------------------------------------

def sample_clients(rng: RngStream, num_clients: int, count: int,
                   mode: SamplingMode = SamplingMode.WITH_REPLACEMENT) -> np.ndarray:
    """Sorted client indices drawn uniformly from ``range(num_clients)``."""
    mode = SamplingMode(mode)
    if count < 1:
        raise ConfigError("client count must be positive")
    if mode is SamplingMode.WITHOUT_REPLACEMENT:
        if count > num_clients:
            raise ConfigError(f"cannot draw {count} of {num_clients} clients without replacement")
        return rng.subset(num_clients, count)
    return np.sort(rng.integers(num_clients, count))


# -- local update phase ------------------------------------------------------------

def local_direction(problem, point: PrimalDualPoint, anchor: PrimalDualPoint, batch: dict,
                    estimate: GradientEstimate) -> LocalDirection:
    """Drift-corrected direction: minibatch gradient at ``point`` minus at ``anchor`` plus (u, v)."""
    gx, gy = problem.batch_grads(point.x, point.y, batch)
    ax, ay = problem.batch_grads(anchor.x, anchor.y, batch)
    return LocalDirection(gx - ax + estimate.u, gy - ay + estimate.v)


def local_update_phase(problem, client: ClientDataset, anchor: PrimalDualPoint,
                       estimate: GradientEstimate, sched: RoundSchedule, K: int, b: int,
                       rng: RngStream) -> PrimalDualPoint:
    """K local descent-ascent steps on one client, starting from ``anchor``.

    The minibatch for step k comes from ``rng.child(step=k)``.
    """
    n = len(client)
    if K < 1:
        raise ConfigError("local_steps must be >= 1")
    if b > n:
        raise ConfigError(f"local batch size {b} exceeds client {client.index}'s {n} samples")
    x, y = anchor.x.copy(), anchor.y.copy()
    for k in range(K):
        batch = client.take(rng.child(step=k).subset(n, b))
        gx, gy = problem.batch_grads(x, y, batch)
        ax, ay = problem.batch_grads(anchor.x, anchor.y, batch)
        x = x - sched.eta * (gx - ax + estimate.u)
        y = y + sched.gamma * (gy - ay + estimate.v)
    return PrimalDualPoint(x, y)


def _local_updates_batched(problem, stacked: dict, clients, occ, anchor, estimate, sched,
                           K, b, seed, t):
    S = len(clients)
    n = next(iter(stacked.values())).shape[1]
    idx = minibatch_indices(seed, t, clients, occ, K, n, b)
    rows = np.arange(S)[:, None]
    X = np.broadcast_to(anchor.x, (S, anchor.x.shape[0])).copy()
    Y = np.broadcast_to(anchor.y, (S, anchor.y.shape[0])).copy()
    for k in range(K):
        batch = {name: arr[rows, idx[:, k, :]] for name, arr in stacked.items()}
        gx, gy = problem.batch_grads(X, Y, batch)
        ax, ay = problem.batch_grads(anchor.x, anchor.y, batch)
        X = X - sched.eta * (gx - ax + estimate.u)
        Y = Y + sched.gamma * (gy - ay + estimate.v)
    return X, Y


def local_updates(problem, datasets: Sequence[ClientDataset], clients: np.ndarray,
                  anchor: PrimalDualPoint, estimate: GradientEstimate, sched: RoundSchedule,
                  K: int, b: int, seed: int, t: int, workers: int = 1):
    """Endpoints of the local phase for every selected client, rows in ``clients`` order.

    Clients with equal dataset sizes are simulated together as one stacked
    array computation; otherwise (or with ``workers > 1``) each client runs
    :func:`local_update_phase` and the results are merged in index order.
    """
    clients = np.asarray(clients)
    occ = occurrences(clients)
    for i in set(clients.tolist()):
        if b > len(datasets[i]):
            raise ConfigError(f"local batch size {b} exceeds client {i}'s {len(datasets[i])} samples")
    stacked = stack_fields(datasets, clients) if workers == 1 else None
    if stacked is not None:
        return _local_updates_batched(problem, stacked, clients, occ, anchor, estimate, sched, K, b, seed, t)

    def one(j):
        rng = RngStream(seed, t, Phase.MINIBATCH, int(client_key(clients[j], occ[j])))
        return local_update_phase(problem, datasets[clients[j]], anchor, estimate, sched, K, b, rng)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ends = list(pool.map(one, range(len(clients))))
    else:
        ends = [one(j) for j in range(len(clients))]
    return np.stack([e.x for e in ends]), np.stack([e.y for e in ends])


# -- schedules ---------------------------------------------------------------------

def _inv(value: float) -> float:
    # a zero modulus makes its step-size constraint vacuous
    return math.inf if value == 0 else 1.0 / value


def _eta_for(consts: SmoothnessConstants, gamma: float) -> float:
    mu, L12 = consts.mu, consts.L12
    coupling = math.inf if L12 == 0 else mu**2 * gamma / (3 * L12**2)
    return min(_inv(4 * consts.L1), _inv(consts.Lphi), _inv(42 * consts.L21), gamma, coupling)


def _gamma_terms(consts: SmoothnessConstants, K: int) -> list[float]:
    return [_inv(2 * consts.L2), _inv(consts.mu), _inv(consts.L21), _inv(192 * consts.Ltilde * K)]


def schedule_theoretical_mb(consts: SmoothnessConstants, K: int) -> RoundSchedule:
    gamma = min(_gamma_terms(consts, K))
    return RoundSchedule(_eta_for(consts, gamma), gamma, 1.0, 1.0)


def schedule_theoretical_storm(consts: SmoothnessConstants, K: int, S: int, t: int) -> RoundSchedule:
    """Decaying schedule with momentum weight alpha_t = beta_t = 2304 (Ltilde K gamma_t)^2.

    When the 1/(192 Ltilde K) or the S^{1/3}/(Ltilde K (t+1)^{1/3}) term is the
    active minimum, Ltilde K gamma_t is substituted symbolically so alpha_t is
    exact (1/16 for the former).
    """
    Lt = consts.Ltilde
    terms = _gamma_terms(consts, K)
    decay_ratio = (S / (t + 1)) ** (1 / 3)
    terms.append(decay_ratio / (Lt * K))
    gamma = min(terms)
    if gamma == terms[3]:
        ratio = 1.0 / 192
    elif gamma == terms[4]:
        ratio = decay_ratio
    else:
        ratio = Lt * K * gamma
    alpha = min(1.0, 2304 * ratio**2)
    return RoundSchedule(_eta_for(consts, gamma), gamma, alpha, alpha)


def schedule_practical(c_eta: float, c_gamma: float, c_alpha: float, rho: float, t: int) -> RoundSchedule:
    """eta_t = c_eta/(t+1)^rho, gamma_t = c_gamma/(t+1)^rho, alpha_t = min(1, c_alpha/(t+1)^(2 rho))."""
    base = (t + 1) ** rho
    alpha = min(1.0, c_alpha / (t + 1) ** (2 * rho))
    return RoundSchedule(c_eta / base, c_gamma / base, alpha, alpha)


def schedule_for(cfg: RunConfig, consts: Optional[SmoothnessConstants], t: int) -> RoundSchedule:
    if cfg.schedule is ScheduleKind.PRACTICAL:
        return schedule_practical(cfg.c_eta, cfg.c_gamma, cfg.c_alpha, cfg.rho, t)
    if consts is None:
        raise ConfigError("theoretical schedules need smoothness constants")
    if cfg.estimator is EstimatorKind.STORM:
        return schedule_theoretical_storm(consts, cfg.local_steps, cfg.clients_per_round, t)
    return schedule_theoretical_mb(consts, cfg.local_steps)


# -- rounds -------------------------------------------------------------------------

@dataclass(frozen=True)
class ServerState:
    curr: PrimalDualPoint
    prev: PrimalDualPoint
    round: int
    estimator_state: EstimatorState

    @classmethod
    def initial(cls, cfg: RunConfig, x0, y0) -> "ServerState":
        point = PrimalDualPoint(x0, y0)
        return cls(point, point, 0, initial_state(cfg.estimator, cfg.spider_period))


def collect_gradients(problem, datasets, clients: np.ndarray, state: ServerState,
                      need: RequiredPoints) -> CollectedGradients:
    curr, prev = state.curr, state.prev
    gx, gy = client_gradient_matrix(problem, datasets, curr.x, curr.y, clients)
    if need is RequiredPoints.CURRENT_ONLY:
        return CollectedGradients(clients, gx, gy)
    px, py = client_gradient_matrix(problem, datasets, prev.x, prev.y, clients)
    return CollectedGradients(clients, gx, gy, px, py)


@dataclass
class RoundOutput:
    """Side results of one round beyond the successor state."""

    estimate: GradientEstimate
    collect_clients: np.ndarray
    update_clients: np.ndarray


def run_round(state: ServerState, cfg: RunConfig, problem, datasets: Sequence[ClientDataset],
              sched: RoundSchedule, pop=None, test: Optional[ClientDataset] = None,
              workers: int = 1, details: Optional[list] = None):
    """Advance the server by one round.

    Returns ``(next_state, metrics)``; ``metrics`` is None unless a population
    oracle ``pop`` is supplied. Metrics describe the round anchor z_t and the
    estimate (u_t, v_t) built for it. When ``details`` is a list, a
    :class:`RoundOutput` is appended to it.
    """
    t = state.round
    N = len(datasets)
    if N != cfg.num_clients:
        raise ConfigError(f"config expects {cfg.num_clients} clients, got {N} datasets")
    state.curr.check(problem.dims)
    count = cfg.client_count(t)

    need = required_points(state.estimator_state, t)
    collect_ids = sample_clients(RngStream(cfg.seed, t, Phase.COLLECT), N, count, cfg.sampling)
    collected = collect_gradients(problem, datasets, collect_ids, state, need)
    estimate, est_state = advance(state.estimator_state, collected, t, sched.alpha, sched.beta,
                                  cfg.spider_big_batch, cfg.clients_per_round)

    if cfg.same_subsets:
        update_ids = collect_ids
    else:
        update_ids = sample_clients(RngStream(cfg.seed, t, Phase.UPDATE), N, count, cfg.sampling)
    X, Y = local_updates(problem, datasets, update_ids, state.curr, estimate, sched,
                         cfg.local_steps, cfg.local_batch_size, cfg.seed, t, workers)
    new_point = PrimalDualPoint(mean_rows(X), mean_rows(Y))
    next_state = ServerState(new_point, state.curr, t + 1, est_state)

    metrics = None
    if pop is not None:
        test_auc = None
        if test is not None and isinstance(problem, AucProblem):
            test_auc = auc_metric(problem.scores(state.curr.x, test.fields["w"]), test.fields["label"])
        metrics = round_metrics(pop, t, state.curr, estimate, sched, count, test_auc)
    if details is not None:
        details.append(RoundOutput(estimate, collect_ids, update_ids))
    return next_state, metrics


def run(cfg: RunConfig, problem, datasets: Sequence[ClientDataset],
        consts: Optional[SmoothnessConstants] = None, x0=None, y0=None, pop=None,
        test: Optional[ClientDataset] = None, workers: int = 1,
        schedule_fn=None, metrics_every: int = 1) -> tuple[ServerState, list[RoundMetrics]]:
    """Run ``cfg.rounds`` rounds from (x0, y0) (zeros by default).

    ``schedule_fn(t) -> RoundSchedule`` overrides the configured schedule.
    With a population oracle, metrics are recorded every ``metrics_every``
    rounds and always for the last round.
    """
    if metrics_every < 1:
        raise ConfigError("metrics_every must be >= 1")
    p, q = problem.dims
    state = ServerState.initial(cfg, np.zeros(p) if x0 is None else x0, np.zeros(q) if y0 is None else y0)
    metrics = []
    for t in range(cfg.rounds):
        sched = schedule_fn(t) if schedule_fn is not None else schedule_for(cfg, consts, t)
        measure = pop is not None and (t % metrics_every == 0 or t == cfg.rounds - 1)
        state, m = run_round(state, cfg, problem, datasets, sched, pop if measure else None,
                             test, workers)
        if not state.curr.is_finite():
            raise FloatingPointError(f"iterate diverged at round {t}")
        if m is not None:
            metrics.append(m)
    return state, metrics
