"""Privileged oracles over the full population of client data.

These functions read every client's samples to compute exact global
quantities (y*(x), Phi, grad Phi, estimation errors). They exist for
measurement and verification only; the round protocol never calls them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    ConvergenceError,
    GradientEstimate,
    PrimalDualPoint,
    RoundMetrics,
    RoundSchedule,
    SmoothnessConstants,
    norm_sq,
)
from .problems import ClientDataset, client_gradient_matrix, dissimilarity
from .rng import Phase, RngStream


class InnerMaxMethod(enum.Enum):
    CLOSED_FORM = "CLOSED_FORM"
    NUMERIC = "NUMERIC"


class PotentialForm(enum.Enum):
    MB_FORM = "MB_FORM"
    STORM_FORM = "STORM_FORM"


@dataclass(frozen=True, eq=False)
class InnerMaxResult:
    y_star: np.ndarray
    phi_value: float
    method: InnerMaxMethod
    residual: float = 0.0


_POPULATIONS: dict = {}


def population(problem, datasets: Sequence[ClientDataset]):
    """Cached population view for ``(problem, datasets)``."""
    key = (id(problem), id(datasets))
    cached = _POPULATIONS.get(key)
    if cached is None or cached[0] is not problem or cached[1] is not datasets:
        if len(_POPULATIONS) > 32:
            _POPULATIONS.clear()
        cached = (problem, datasets, problem.population(datasets))
        _POPULATIONS[key] = cached
    return cached[2]


def argmax_y(problem, datasets, x, method: InnerMaxMethod = InnerMaxMethod.CLOSED_FORM,
             y0=None, tol: float = 1e-10, max_iter: int = 10**6) -> InnerMaxResult:
    """Maximize f(x, .) either in closed form or by gradient ascent with step 1/L2."""
    pop = population(problem, datasets)
    x = np.asarray(x, dtype=np.float64)
    if method is InnerMaxMethod.CLOSED_FORM:
        y = pop.argmax_y(x)
        res = float(np.linalg.norm(pop.grad_y(x, y)))
        return InnerMaxResult(y, pop.loss(x, y), method, res)

    step = 1.0 / problem.moduli(datasets)["L2"]
    y = np.zeros(problem.dims[1]) if y0 is None else np.array(y0, dtype=np.float64)
    g = pop.grad_y(x, y)
    res = float(np.linalg.norm(g))
    for _ in range(max_iter):
        if res <= tol:
            break
        y = y + step * g
        g = pop.grad_y(x, y)
        res = float(np.linalg.norm(g))
    else:
        if res > tol:
            raise ConvergenceError("gradient ascent on y did not converge", res)
    return InnerMaxResult(y, pop.loss(x, y), method, res)


def phi(problem, datasets, x) -> float:
    return argmax_y(problem, datasets, x).phi_value


def grad_phi(problem, datasets, x) -> np.ndarray:
    """Gradient of Phi via Danskin: grad_x f(x, y*(x))."""
    pop = population(problem, datasets)
    x = np.asarray(x, dtype=np.float64)
    return pop.grads(x, pop.argmax_y(x))[0]


def finite_diff(fn: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar field, one coordinate at a time."""
    if not h > 0:
        raise ValueError("step h must be positive")
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return out


def estimation_error(estimate: GradientEstimate, anchor: PrimalDualPoint, problem, datasets) -> tuple[float, float]:
    """Realized squared errors ||u - grad_x f||^2 and ||v - grad_y f||^2 at ``anchor``."""
    gx, gy = population(problem, datasets).grads(anchor.x, anchor.y)
    return norm_sq(estimate.u - gx), norm_sq(estimate.v - gy)


def drift_weight(k: int, K: int, consts: SmoothnessConstants, form: PotentialForm,
                 sched: Optional[RoundSchedule] = None) -> float:
    growth = (1 + 2 / K) ** (K - k)
    if form is PotentialForm.MB_FORM:
        return consts.Ltilde / 2 * growth
    return 6 * consts.Ltilde**2 * K * sched.gamma / sched.alpha * growth


def potential_shifted(point: PrimalDualPoint, anchor: PrimalDualPoint, k: int, K: int,
                      consts: SmoothnessConstants, sched: Optional[RoundSchedule],
                      form: PotentialForm, problem, datasets) -> float:
    """2 Phi(x) - f(z) + weight * ||z - anchor||^2, without the -Phi(x*) constant."""
    ev = population(problem, datasets).evaluate(point.x, point.y)
    return 2 * ev.phi - ev.f + drift_weight(k, K, consts, form, sched) * point.distance_sq(anchor)


def round_metrics(pop, t: int, point: PrimalDualPoint, estimate: GradientEstimate,
                  sched: RoundSchedule, clients_contacted: int,
                  test_auc: Optional[float] = None) -> RoundMetrics:
    """Per-round diagnostics at the round anchor.

    The potential is the k = 0 value at the anchor itself, so the drift term
    vanishes and it reduces to 2 Phi - f for both potential forms.
    """
    ev = pop.evaluate(point.x, point.y)
    return RoundMetrics(
        round=t,
        eta=sched.eta,
        gamma=sched.gamma,
        alpha=sched.alpha,
        grad_phi_norm_sq=norm_sq(ev.grad_phi),
        phi_minus_f=ev.phi - ev.f,
        eps_x=norm_sq(estimate.u - ev.gx),
        eps_y=norm_sq(estimate.v - ev.gy),
        potential_shifted=2 * ev.phi - ev.f,
        clients_contacted=clients_contacted,
        test_auc=test_auc,
    )


def estimate_phi_min(problem, datasets, consts: SmoothnessConstants, x0, starts: int = 20,
                     iters: int = 500, seed: int = 0, tol: float = 1e-10) -> float:
    """Multi-start gradient descent on Phi with step 1/L_Phi; returns the best value found.

    Used only for reporting C0; it is an estimate of Phi(x*), not a bound.
    """
    pop = population(problem, datasets)
    gen = RngStream(seed, phase=Phase.ORACLE).generator()
    p = problem.dims[0]
    step = 1.0 / consts.Lphi
    best = math.inf
    for s in range(starts):
        x = np.array(x0, dtype=np.float64) if s == 0 else gen.standard_normal(p)
        for _ in range(iters):
            g = pop.grads(x, pop.argmax_y(x))[0]
            if float(g @ g) <= tol**2:
                break
            x = x - step * g
        best = min(best, pop.evaluate(x, pop.argmax_y(x)).phi)
    return best


# -- verification suite ------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name} {status} residual={self.residual:.3e} tolerance={self.tolerance:.3e}"


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, residual: float, tolerance: float) -> CheckResult:
        c = CheckResult(name, bool(residual <= tolerance), float(residual), tolerance)
        self.checks.append(c)
        return c

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]


def _random_point(gen, dims, scale=1.0) -> PrimalDualPoint:
    return PrimalDualPoint(scale * gen.standard_normal(dims[0]), scale * gen.standard_normal(dims[1]))


def _random_sample_fields(gen, datasets):
    client = datasets[int(gen.integers(len(datasets)))]
    j = int(gen.integers(len(client)))
    return client.take(slice(j, j + 1))


def verify_suite(problem, datasets, consts: SmoothnessConstants, rng: RngStream,
                 perturb: float = 0.0, fd_draws: int = 100, pl_points: int = 1000,
                 lf_pairs: int = 10_000, danskin_points: int = 50, mc_draws: int = 100_000,
                 clients_per_draw: int = 5) -> VerifyReport:
    """Run the oracle self-checks and report the worst residual of each.

    ``perturb`` adds a constant to every analytic gradient coordinate in the
    finite-difference check; any value around 1e-3 must make it fail.
    """
    gen = rng.generator()
    pop = population(problem, datasets)
    dims = problem.dims
    report = VerifyReport()

    # (a) analytic sample gradients vs central differences
    worst = 0.0
    for _ in range(fd_draws):
        pt = _random_point(gen, dims)
        fields = _random_sample_fields(gen, datasets)
        gx, gy = problem.batch_grads(pt.x, pt.y, fields)
        g = np.concatenate([gx, gy]) + perturb
        p = dims[0]
        fd = finite_diff(lambda z: float(problem.batch_loss(z[:p], z[p:], fields)), pt.z, 1e-5)
        worst = max(worst, float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), np.linalg.norm(g), 1e-12)))
    report.add("gradient_fd", worst, 1e-6)

    # (b) PL equality: (1/2mu)||grad_y f||^2 = Phi - f for an exactly -mu curved dual
    worst = 0.0
    for _ in range(pl_points):
        pt = _random_point(gen, dims)
        ev = pop.evaluate(pt.x, pt.y)
        gap = ev.phi - ev.f
        worst = max(worst, abs(float(ev.gy @ ev.gy) / (2 * consts.mu) - gap) / (1 + abs(gap)))
    report.add("pl_equality", worst, 1e-8)

    # (c) L_f smoothness of per-sample gradients
    worst = -math.inf
    for _ in range(lf_pairs):
        z1, z2 = _random_point(gen, dims), _random_point(gen, dims)
        fields = _random_sample_fields(gen, datasets)
        g1 = np.concatenate(problem.batch_grads(z1.x, z1.y, fields))
        g2 = np.concatenate(problem.batch_grads(z2.x, z2.y, fields))
        bound = consts.Lf * math.sqrt(z1.distance_sq(z2)) * (1 + 1e-9)
        worst = max(worst, float(np.linalg.norm(g1 - g2)) - bound)
    report.add("lf_smoothness", max(worst, 0.0), 0.0)

    # (d) closed-form y* vs numeric ascent, plus stationarity of y*
    worst = 0.0
    stat = 0.0
    for _ in range(10):
        x = gen.standard_normal(dims[0])
        closed = argmax_y(problem, datasets, x)
        numeric = argmax_y(problem, datasets, x, InnerMaxMethod.NUMERIC)
        worst = max(worst, float(np.linalg.norm(closed.y_star - numeric.y_star)))
        stat = max(stat, closed.residual)
    report.add("argmax_closed_vs_numeric", worst, 1e-6)
    report.add("argmax_stationarity", stat, 1e-8)

    # (e) Danskin: grad_phi vs finite differences of Phi
    worst = 0.0
    for _ in range(danskin_points):
        x = gen.standard_normal(dims[0])
        g = grad_phi(problem, datasets, x)
        fd = finite_diff(lambda v: pop.evaluate(v, pop.argmax_y(v)).phi, x, 1e-5)
        worst = max(worst, float(np.linalg.norm(g - fd)) / (1 + float(np.linalg.norm(g))))
    report.add("danskin_grad_phi", worst, 1e-4)

    # (f) MB variance law at a random point: E||u - grad f||^2 = pop. variance / S
    pt = _random_point(gen, dims)
    gx, _ = client_gradient_matrix(problem, datasets, pt.x, pt.y)
    target = dissimilarity(problem, datasets, pt.x, pt.y)[0] / clients_per_draw
    gmean = pop.grads(pt.x, pt.y)[0]
    errs = np.empty(mc_draws)
    chunk = 10_000
    for start in range(0, mc_draws, chunk):
        n = min(chunk, mc_draws - start)
        idx = gen.integers(len(datasets), size=(n, clients_per_draw))
        u = gx[idx].mean(axis=1)
        errs[start:start + n] = ((u - gmean) ** 2).sum(-1)
    report.add("mb_variance_law", abs(errs.mean() / target - 1), 0.05)

    # (g) Phi - f >= 0
    worst = 0.0
    for _ in range(pl_points):
        pt = _random_point(gen, dims)
        ev = pop.evaluate(pt.x, pt.y)
        worst = max(worst, -(ev.phi - ev.f))
    report.add("phi_minus_f_nonnegative", worst, 1e-9)
    return report
