"""Minimax problem families, their client datasets and smoothness constants.

Two families are provided:

* ``SyntheticProblem`` -- a nonconvex bump in x, bilinear coupling
  ``(x - a)^T b b^T (y - c)`` and a ``-(mu/2)||y - c||^2`` dual term.
* ``AucProblem`` -- the square-loss AUC surrogate in minimax form with a
  linear scorer; the primal vector packs ``(theta, a, b)`` and the dual is
  the scalar ``lambda``.

Per-sample quantities are written against arrays with a leading batch shape
so the same code evaluates one client, a minibatch, or a stack of clients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .core import (
    ConfigError,
    PrimalDualPoint,
    SmoothnessConstants,
    UndefinedMetricError,
    mean_rows,
)
from .rng import Phase, RngStream


# -- samples and datasets -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SyntheticSample:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        if not (np.shape(self.a) == np.shape(self.b) == np.shape(self.c)):
            raise ConfigError("a, b, c must share one dimension")


@dataclass(frozen=True, eq=False)
class AucSample:
    w: np.ndarray
    label: int

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise ConfigError(f"label must be +1 or -1, got {self.label}")


@dataclass(frozen=True, eq=False)
class ClientDataset:
    """One client's local samples, stored column-wise as arrays.

    Each entry of ``fields`` has the sample axis first.
    """

    index: int
    fields: dict

    def __post_init__(self):
        fields = {}
        n = None
        for name, arr in self.fields.items():
            arr = np.array(arr)
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise ConfigError("all fields of a dataset need the same sample count")
            arr.setflags(write=False)
            fields[name] = arr
        if not n:
            raise ConfigError(f"client {self.index} has an empty dataset")
        object.__setattr__(self, "fields", fields)

    def __len__(self) -> int:
        return next(iter(self.fields.values())).shape[0]

    def take(self, idx) -> dict:
        return {k: v[idx] for k, v in self.fields.items()}

    @property
    def samples(self) -> list:
        f = self.fields
        if "a" in f:
            return [SyntheticSample(f["a"][j], f["b"][j], f["c"][j]) for j in range(len(self))]
        return [AucSample(f["w"][j], int(f["label"][j])) for j in range(len(self))]

    def duplicated(self, times: int = 2) -> "ClientDataset":
        return ClientDataset(self.index, {k: np.concatenate([v] * times) for k, v in self.fields.items()})


def fields_from_samples(samples: Sequence) -> dict:
    if len(samples) == 0:
        raise ConfigError("batch must be nonempty")
    first = samples[0]
    if isinstance(first, SyntheticSample):
        return {k: np.stack([getattr(s, k) for s in samples]).astype(np.float64) for k in "abc"}
    if isinstance(first, AucSample):
        return {"w": np.stack([s.w for s in samples]).astype(np.float64),
                "label": np.array([s.label for s in samples], dtype=np.float64)}
    raise ConfigError(f"unknown sample type {type(first).__name__}")


def stack_fields(datasets: Sequence[ClientDataset], indices) -> Optional[dict]:
    """Stack the selected clients' fields along a new leading axis.

    Returns None when the clients hold different numbers of samples.
    """
    full = _stacked_population(datasets)
    idx = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices, dtype=np.int64)
    if full is not None:
        return {k: v[idx] for k, v in full.items()}
    chosen = [datasets[i] for i in idx]
    if len({len(c) for c in chosen}) != 1:
        return None
    return {k: np.stack([c.fields[k] for c in chosen]) for k in chosen[0].fields}


_STACKS: dict = {}
_MOMENTS: dict = {}


def _cached(cache: dict, datasets: Sequence[ClientDataset], build):
    """Memoize ``build()`` per dataset list; entries are checked by element identity."""
    key = id(datasets)
    hit = cache.get(key)
    if hit is not None and len(hit[0]) == len(datasets) and all(a is b for a, b in zip(hit[0], datasets)):
        return hit[1]
    value = build()
    if len(cache) > 64:
        cache.clear()
    cache[key] = (tuple(datasets), value)
    return value


def _stack_all(datasets: Sequence[ClientDataset]) -> Optional[dict]:
    if len({len(c) for c in datasets}) != 1:
        return None
    full = {k: np.stack([c.fields[k] for c in datasets]) for k in datasets[0].fields}
    for v in full.values():
        v.setflags(write=False)
    return full


def _stacked_population(datasets: Sequence[ClientDataset]) -> Optional[dict]:
    """All clients stacked once, cached per dataset list; None when sizes differ."""
    return _cached(_STACKS, datasets, lambda: _stack_all(datasets))


def _synthetic_moments(datasets: Sequence[ClientDataset]) -> Optional[dict]:
    full = _stacked_population(datasets)
    if full is None:
        return None
    a, b, c = full["a"], full["b"], full["c"]
    n = a.shape[1]
    return {
        "a": a,
        "B": np.einsum("inp,inq->ipq", b, b) / n,
        "r": (b * (a * b).sum(-1)[..., None]).sum(1) / n,
        "s": (b * (b * c).sum(-1)[..., None]).sum(1) / n,
        "cbar": c.sum(1) / n,
    }


# -- configs ---------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticProblemConfig:
    p: int = 10
    nu: float = 1.0
    mu: float = 1.0
    num_clients: int = 20
    samples_per_client: int = 20
    # covariance scales of N(0, center_var I) and N(w_i, sample_var I)
    center_var: float = 0.5
    sample_var: float = 0.1

    def __post_init__(self):
        if self.p < 1 or self.num_clients < 1 or self.samples_per_client < 1:
            raise ConfigError("p, num_clients and samples_per_client must be positive")
        if not (self.nu > 0 and self.mu > 0):
            raise ConfigError("nu and mu must be positive")
        if self.center_var < 0 or self.sample_var < 0:
            raise ConfigError("variances must be nonnegative")


@dataclass(frozen=True)
class AucProblemConfig:
    d: int = 20
    num_clients: int = 50
    samples_per_client: int = 100
    positive_fraction: float = 0.2
    sorted_fraction: float = 0.0
    separation: float = 2.0
    noise: float = 1.0
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.d < 1 or self.num_clients < 1 or self.samples_per_client < 1:
            raise ConfigError("d, num_clients and samples_per_client must be positive")
        if not 0 < self.positive_fraction < 1:
            raise ConfigError("positive_fraction must lie in (0, 1)")
        if not 0 <= self.sorted_fraction <= 1:
            raise ConfigError("sorted_fraction must lie in [0, 1]")
        if not 0 <= self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in [0, 1)")
        if self.noise < 0:
            raise ConfigError("noise must be nonnegative")


# -- population (privileged full-data) evaluation -------------------------------

class PopulationEval(NamedTuple):
    f: float
    gx: np.ndarray
    gy: np.ndarray
    y_star: np.ndarray
    phi: float
    grad_phi: np.ndarray


def _client_weights(datasets: Sequence[ClientDataset]) -> np.ndarray:
    # f = mean over clients of f_i, f_i = mean over the client's samples
    n_clients = len(datasets)
    return np.concatenate([np.full(len(c), 1.0 / (n_clients * len(c))) for c in datasets])


def _concat(datasets: Sequence[ClientDataset], name: str) -> np.ndarray:
    return np.concatenate([c.fields[name] for c in datasets])


# -- synthetic family ----------------------------------------------------------

class SyntheticProblem:
    family = "synthetic"

    def __init__(self, cfg: SyntheticProblemConfig):
        self.cfg = cfg
        self.nu = float(cfg.nu)
        self.mu = float(cfg.mu)

    @property
    def dims(self) -> tuple[int, int]:
        return self.cfg.p, self.cfg.p

    def batch_loss(self, x, y, fields: dict) -> np.ndarray:
        a, b, c = fields["a"], fields["b"], fields["c"]
        x = np.asarray(x)[..., None, :]
        y = np.asarray(y)[..., None, :]
        d = x - a
        yc = y - c
        bump = (1.0 - np.exp(-(d * d) / (2 * self.nu))).sum(-1)
        coupling = (b * d).sum(-1) * (b * yc).sum(-1)
        dual = 0.5 * self.mu * (yc * yc).sum(-1)
        return (bump + coupling - dual).mean(-1)

    def batch_grads(self, x, y, fields: dict) -> tuple[np.ndarray, np.ndarray]:
        a, b, c = fields["a"], fields["b"], fields["c"]
        x = np.asarray(x)[..., None, :]
        y = np.asarray(y)[..., None, :]
        d = x - a
        yc = y - c
        n = a.shape[-2]
        bump = d * np.exp(d * d * (-0.5 / self.nu)) / self.nu
        gx = bump + b * (b * yc).sum(-1)[..., None]
        gy = b * (b * d).sum(-1)[..., None] - self.mu * yc
        return gx.sum(-2) / n, gy.sum(-2) / n

    def client_grads(self, datasets: Sequence[ClientDataset], indices, x, y):
        """Full local gradients of the selected clients, one row each.

        The bilinear and quadratic parts only need per-client moments
        (mean b b^T, mean b (b.a), mean b (b.c), mean c), so only the bump
        term touches every sample. Returns None when client sizes differ.
        """
        st = _cached(_MOMENTS, datasets, lambda: _synthetic_moments(datasets))
        if st is None:
            return None
        idx = np.asarray(indices, dtype=np.int64)
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        d = x - st["a"][idx]
        n = d.shape[-2]
        bump = (d * np.exp(d * d * (-0.5 / self.nu))).sum(-2) / (n * self.nu)
        B = st["B"][idx]
        gx = bump + B @ y - st["s"][idx]
        gy = B @ x - st["r"][idx] - self.mu * (y - st["cbar"][idx])
        return gx, gy

    def moduli(self, datasets: Sequence[ClientDataset]) -> dict:
        # d^2/ds^2 of 1 - exp(-s^2/(2 nu)) peaks at s = 0 with value 1/nu;
        # the coupling block is b b^T with spectral norm ||b||^2.
        bmax = max(float((c.fields["b"] ** 2).sum(-1).max()) for c in datasets)
        return dict(L1=1.0 / self.nu, L2=self.mu, L12=bmax, L21=bmax, mu=self.mu)

    def population(self, datasets: Sequence[ClientDataset]) -> "SyntheticPopulation":
        return SyntheticPopulation(self, datasets)


class SyntheticPopulation:
    """Exact global quantities for the synthetic family via sufficient statistics."""

    def __init__(self, problem: SyntheticProblem, datasets: Sequence[ClientDataset]):
        self.problem = problem
        self.datasets = datasets
        self.dims = problem.dims
        w = _client_weights(datasets)
        a, b, c = (_concat(datasets, k) for k in "abc")
        ab = (a * b).sum(-1)
        bc = (b * c).sum(-1)
        self._w = w
        self._a = a
        self._M = (b * w[:, None]).T @ b
        self._r = w @ (b * ab[:, None])
        self._s = w @ (b * bc[:, None])
        self._k0 = float(w @ (ab * bc))
        self._cbar = w @ c
        self._cc = float(w @ (c * c).sum(-1))

    def _bump(self, x):
        nu = self.problem.nu
        d = x - self._a
        e = np.exp(-(d * d) / (2 * nu))
        value = x.shape[0] - float(self._w @ e.sum(-1))
        grad = (self._w @ (d * e)) / nu
        return value, grad

    def _quad(self, x, y) -> float:
        mu = self.problem.mu
        coupling = x @ self._M @ y - x @ self._s - self._r @ y + self._k0
        return coupling - 0.5 * mu * (y @ y - 2 * y @ self._cbar + self._cc)

    def argmax_y(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self._cbar + (self._M @ x - self._r) / self.problem.mu

    def grads(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        _, gbump = self._bump(x)
        return gbump + self._M @ y - self._s, self._M @ x - self._r - self.problem.mu * (y - self._cbar)

    def grad_y(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return self._M @ x - self._r - self.problem.mu * (y - self._cbar)

    def loss(self, x, y) -> float:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        value, _ = self._bump(x)
        return value + self._quad(x, y)

    def evaluate(self, x, y) -> PopulationEval:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        bump_value, gbump = self._bump(x)
        y_star = self.argmax_y(x)
        mu = self.problem.mu
        gx = gbump + self._M @ y - self._s
        gy = self._M @ x - self._r - mu * (y - self._cbar)
        return PopulationEval(
            f=bump_value + self._quad(x, y),
            gx=gx,
            gy=gy,
            y_star=y_star,
            phi=bump_value + self._quad(x, y_star),
            grad_phi=gbump + self._M @ y_star - self._s,
        )


# -- AUC family -----------------------------------------------------------------

class AucProblem:
    """Square-loss AUC surrogate; x = (theta, a, b), y = (lambda,)."""

    family = "auc"

    def __init__(self, cfg: AucProblemConfig, tau: float):
        if not 0 < tau < 1:
            raise ConfigError(f"tau must lie in (0, 1), got {tau}")
        self.cfg = cfg
        self.tau = float(tau)
        self.mu = 2 * self.tau * (1 - self.tau)

    @classmethod
    def from_data(cls, cfg: AucProblemConfig, datasets: Sequence[ClientDataset]) -> "AucProblem":
        labels = _concat(datasets, "label")
        return cls(cfg, float(np.mean(labels > 0)))

    @property
    def dims(self) -> tuple[int, int]:
        return self.cfg.d + 2, 1

    def _split(self, x):
        x = np.asarray(x)
        return x[..., :-2], x[..., -2], x[..., -1]

    def batch_loss(self, x, y, fields: dict) -> np.ndarray:
        tau = self.tau
        w, label = fields["w"], fields["label"]
        theta, a, b = self._split(x)
        lam = np.asarray(y)[..., 0]
        pos = (label > 0).astype(np.float64)
        neg = 1.0 - pos
        h = (w * theta[..., None, :]).sum(-1)
        a = np.asarray(a)[..., None]
        b = np.asarray(b)[..., None]
        lam1 = np.asarray(lam)[..., None]
        per = ((1 - tau) * (h - a) ** 2 * pos - tau * (1 - tau) * lam1**2
               + tau * (h - b) ** 2 * neg
               + 2 * (1 + lam1) * tau * h * neg - 2 * (1 + lam1) * (1 - tau) * h * pos)
        return per.mean(-1)

    def batch_grads(self, x, y, fields: dict) -> tuple[np.ndarray, np.ndarray]:
        tau = self.tau
        w, label = fields["w"], fields["label"]
        theta, a, b = self._split(x)
        lam = np.asarray(y)[..., 0:1]
        pos = (label > 0).astype(np.float64)
        neg = 1.0 - pos
        h = (w * theta[..., None, :]).sum(-1)
        a = np.asarray(a)[..., None]
        b = np.asarray(b)[..., None]
        coef = (2 * (1 - tau) * (h - a) * pos + 2 * tau * (h - b) * neg
                + 2 * (1 + lam) * tau * neg - 2 * (1 + lam) * (1 - tau) * pos)
        g_theta = (coef[..., None] * w).mean(-2)
        g_a = (-2 * (1 - tau) * (h - a) * pos).mean(-1)
        g_b = (-2 * tau * (h - b) * neg).mean(-1)
        g_lam = (-2 * tau * (1 - tau) * lam + 2 * tau * h * neg - 2 * (1 - tau) * h * pos).mean(-1)
        gx = np.concatenate([g_theta, g_a[..., None], g_b[..., None]], axis=-1)
        return gx, g_lam[..., None]

    def moduli(self, datasets: Sequence[ClientDataset]) -> dict:
        # Hessian blocks are exact: per sample the x-block is 2c (w,-1,0)(w,-1,0)^T
        # (or (w,0,-1) for negatives) and the cross block is 2c w with
        # c = 1 - tau for positives, tau for negatives.
        tau = self.tau
        label = _concat(datasets, "label")
        feats = _concat(datasets, "w")
        c = np.where(label > 0, 1 - tau, tau)
        sq = (feats * feats).sum(-1)
        L1 = float((2 * c * (sq + 1)).max())
        L12 = float((2 * c * np.sqrt(sq)).max())
        return dict(L1=L1, L2=self.mu, L12=L12, L21=L12, mu=self.mu)

    def scores(self, x, w) -> np.ndarray:
        theta, _, _ = self._split(x)
        return np.asarray(w) @ theta

    def population(self, datasets: Sequence[ClientDataset]) -> "AucPopulation":
        return AucPopulation(self, datasets)


class AucPopulation:
    def __init__(self, problem: AucProblem, datasets: Sequence[ClientDataset]):
        self.problem = problem
        self.datasets = datasets
        self.dims = problem.dims
        self._wt = _client_weights(datasets)
        self._W = _concat(datasets, "w")
        label = _concat(datasets, "label")
        self._pos = (label > 0).astype(np.float64)
        self._neg = 1.0 - self._pos

    def _parts(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x[:-2], x[-2], x[-1], self._W @ x[:-2]

    def argmax_y(self, x) -> np.ndarray:
        tau = self.problem.tau
        _, _, _, h = self._parts(x)
        num = self._wt @ (tau * h * self._neg - (1 - tau) * h * self._pos)
        return np.array([num / (tau * (1 - tau))])

    def _loss(self, h, a, b, lam) -> float:
        tau = self.problem.tau
        pos, neg = self._pos, self._neg
        per = ((1 - tau) * (h - a) ** 2 * pos + tau * (h - b) ** 2 * neg
               + 2 * (1 + lam) * tau * h * neg - 2 * (1 + lam) * (1 - tau) * h * pos)
        return float(self._wt @ per) - tau * (1 - tau) * lam**2

    def _grads(self, h, a, b, lam):
        tau = self.problem.tau
        pos, neg, wt = self._pos, self._neg, self._wt
        coef = (2 * (1 - tau) * (h - a) * pos + 2 * tau * (h - b) * neg
                + 2 * (1 + lam) * tau * neg - 2 * (1 + lam) * (1 - tau) * pos)
        g_theta = (wt * coef) @ self._W
        g_a = wt @ (-2 * (1 - tau) * (h - a) * pos)
        g_b = wt @ (-2 * tau * (h - b) * neg)
        g_lam = wt @ (2 * tau * h * neg - 2 * (1 - tau) * h * pos) - 2 * tau * (1 - tau) * lam
        return np.concatenate([g_theta, [g_a, g_b]]), np.array([g_lam])

    def grads(self, x, y):
        _, a, b, h = self._parts(x)
        return self._grads(h, a, b, float(np.asarray(y)[0]))

    def grad_y(self, x, y) -> np.ndarray:
        return self.grads(x, y)[1]

    def loss(self, x, y) -> float:
        _, a, b, h = self._parts(x)
        return self._loss(h, a, b, float(np.asarray(y)[0]))

    def evaluate(self, x, y) -> PopulationEval:
        _, a, b, h = self._parts(x)
        lam = float(np.asarray(y)[0])
        y_star = self.argmax_y(x)
        gx, gy = self._grads(h, a, b, lam)
        grad_phi, _ = self._grads(h, a, b, float(y_star[0]))
        return PopulationEval(
            f=self._loss(h, a, b, lam),
            gx=gx,
            gy=gy,
            y_star=y_star,
            phi=self._loss(h, a, b, float(y_star[0])),
            grad_phi=grad_phi,
        )


# -- gradient entry points -------------------------------------------------------

def _as_fields(batch) -> dict:
    if isinstance(batch, ClientDataset):
        return batch.fields
    if isinstance(batch, dict):
        return batch
    return fields_from_samples(list(batch))


def sample_loss_grads(problem, point: PrimalDualPoint, batch) -> tuple[np.ndarray, np.ndarray]:
    """Average partial gradients of the per-sample loss over ``batch``."""
    fields = _as_fields(batch)
    if next(iter(fields.values())).shape[0] == 0:
        raise ConfigError("batch must be nonempty")
    point.check(problem.dims)
    return problem.batch_grads(point.x, point.y, fields)


def sample_loss(problem, point: PrimalDualPoint, batch) -> float:
    return float(problem.batch_loss(point.x, point.y, _as_fields(batch)))


def full_local_grads(problem, client: ClientDataset, point: PrimalDualPoint):
    """Exact gradient of the client's local objective f_i."""
    point.check(problem.dims)
    return problem.batch_grads(point.x, point.y, client.fields)


def client_gradient_matrix(problem, datasets: Sequence[ClientDataset], x, y, indices=None):
    """Full local gradients of the selected clients, stacked row-wise."""
    if indices is None:
        indices = range(len(datasets))
    indices = list(indices)
    if hasattr(problem, "client_grads") and indices:
        rows = problem.client_grads(datasets, indices, x, y)
        if rows is not None:
            return rows
    stacked = stack_fields(datasets, indices)
    if stacked is not None:
        return problem.batch_grads(x, y, stacked)
    rows = [problem.batch_grads(x, y, datasets[i].fields) for i in indices]
    return np.stack([r[0] for r in rows]), np.stack([r[1] for r in rows])


def dissimilarity(problem, datasets: Sequence[ClientDataset], x, y) -> tuple[float, float]:
    """Population variance of client gradients around their mean."""
    gx, gy = client_gradient_matrix(problem, datasets, x, y)
    mx, my = mean_rows(gx), mean_rows(gy)
    return float(((gx - mx) ** 2).sum(-1).mean()), float(((gy - my) ** 2).sum(-1).mean())


def lipschitz_constants(problem, datasets: Sequence[ClientDataset], x0=None, y0=None,
                        seed: int = 0, probes: int = 20) -> SmoothnessConstants:
    """Analytic Lipschitz/PL constants plus probe-based dissimilarity estimates.

    sigma1_sq and sigma2_sq are maxima over the initial point and ``probes``
    standard-normal points; they are estimates, not certified bounds.
    """
    p, q = problem.dims
    x0 = np.zeros(p) if x0 is None else np.asarray(x0, dtype=np.float64)
    y0 = np.zeros(q) if y0 is None else np.asarray(y0, dtype=np.float64)
    gen = RngStream(seed, phase=Phase.PROBE).generator()
    points = [(x0, y0)] + [(gen.standard_normal(p), gen.standard_normal(q)) for _ in range(probes)]
    s1 = s2 = 0.0
    for x, y in points:
        v1, v2 = dissimilarity(problem, datasets, x, y)
        s1, s2 = max(s1, v1), max(s2, v2)
    return SmoothnessConstants(**problem.moduli(datasets), sigma1_sq=s1, sigma2_sq=s2)


# -- data generation ---------------------------------------------------------------

def generate_synthetic(cfg: SyntheticProblemConfig, seed: int) -> list[ClientDataset]:
    gen = RngStream(seed, phase=Phase.DATA, client=0).generator()
    p, n = cfg.p, cfg.samples_per_client
    center_sd = math.sqrt(cfg.center_var)
    sample_sd = math.sqrt(cfg.sample_var)
    clients = []
    for i in range(cfg.num_clients):
        center = gen.normal(0.0, center_sd, 3 * p)
        pts = center + gen.normal(0.0, sample_sd, (n, 3 * p))
        clients.append(ClientDataset(i, {"a": pts[:, :p], "b": pts[:, p:2 * p], "c": pts[:, 2 * p:]}))
    return clients


@dataclass(frozen=True, eq=False)
class AucSplit:
    clients: list
    test: Optional[ClientDataset]
    direction: np.ndarray = field(repr=False)


def _auc_draw(gen, count: int, n_pos: int, cfg: AucProblemConfig, direction):
    labels = np.concatenate([np.ones(n_pos), -np.ones(count - n_pos)])
    labels = labels[gen.permutation(count)]
    feats = (labels[:, None] * (cfg.separation / 2) * direction
             + gen.normal(0.0, cfg.noise, (count, cfg.d)))
    return feats, labels


def generate_auc_split(cfg: AucProblemConfig, seed: int) -> AucSplit:
    """Training clients plus a held-out test set drawn from the same classes."""
    gen = RngStream(seed, phase=Phase.DATA, client=1).generator()
    n_train = cfg.num_clients * cfg.samples_per_client
    n_test = int(round(n_train * cfg.test_fraction / (1 - cfg.test_fraction)))
    pos_train = int(round(cfg.positive_fraction * n_train))
    if pos_train < 1 or pos_train > n_train - 1:
        raise ConfigError("positive_fraction must leave at least one positive and one negative sample")
    direction = gen.standard_normal(cfg.d)
    direction /= np.linalg.norm(direction)
    feats, labels = _auc_draw(gen, n_train, pos_train, cfg, direction)

    order = gen.permutation(n_train)
    n_random = int(round((1 - cfg.sorted_fraction) * n_train))
    random_part = order[:n_random]
    rest = order[n_random:]
    sorted_part = rest[np.argsort(labels[rest], kind="stable")]
    random_chunks = np.array_split(random_part, cfg.num_clients)
    sorted_chunks = np.array_split(sorted_part, cfg.num_clients)
    clients = []
    for i in range(cfg.num_clients):
        idx = np.concatenate([random_chunks[i], sorted_chunks[i]]).astype(np.int64)
        clients.append(ClientDataset(i, {"w": feats[idx], "label": labels[idx]}))

    test = None
    if n_test > 0:
        pos_test = min(max(int(round(cfg.positive_fraction * n_test)), 1), n_test - 1)
        tf, tl = _auc_draw(gen, n_test, pos_test, cfg, direction)
        test = ClientDataset(-1, {"w": tf, "label": tl})
    return AucSplit(clients, test, direction)


def generate_auc(cfg: AucProblemConfig, seed: int) -> list[ClientDataset]:
    return generate_auc_split(cfg, seed).clients


# -- AUC metric --------------------------------------------------------------------

def auc_metric(scores, labels) -> float:
    """Fraction of (positive, negative) pairs ranked correctly; ties count 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels > 0
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative label")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


# -- dataset text format ------------------------------------------------------------
#
# header:  fedsgda-dataset family=<synthetic|auc> dim=<p or d> clients=<N> counts=<n_0,...> [test=<n>]
# synthetic line:  <client> <a_1..a_p> <b_1..b_p> <c_1..c_p>
# auc line:        <client> <label> <w_1..w_d>      (client -1 marks the test split)
# Floats use repr(), the shortest string that round-trips exactly.

def _fmt(values: Iterable[float]) -> str:
    return " ".join(repr(float(v)) for v in values)


def write_datasets(path, family: str, datasets: Sequence[ClientDataset],
                   test: Optional[ClientDataset] = None) -> None:
    if family not in ("synthetic", "auc"):
        raise ConfigError(f"unknown family {family!r}")
    dim_key = "a" if family == "synthetic" else "w"
    dim = datasets[0].fields[dim_key].shape[1]
    counts = ",".join(str(len(c)) for c in datasets)
    header = f"fedsgda-dataset family={family} dim={dim} clients={len(datasets)} counts={counts}"
    if test is not None:
        header += f" test={len(test)}"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for client in list(datasets) + ([test] if test is not None else []):
            f = client.fields
            for j in range(len(client)):
                if family == "synthetic":
                    row = np.concatenate([f["a"][j], f["b"][j], f["c"][j]])
                    fh.write(f"{client.index} {_fmt(row)}\n")
                else:
                    fh.write(f"{client.index} {int(f['label'][j])} {_fmt(f['w'][j])}\n")


def read_datasets(path) -> tuple[str, list[ClientDataset], Optional[ClientDataset]]:
    with open(path) as fh:
        header = fh.readline().split()
        if not header or header[0] != "fedsgda-dataset":
            raise ConfigError(f"{path}: not a dataset file")
        meta = dict(tok.split("=", 1) for tok in header[1:])
        family, dim, n_clients = meta["family"], int(meta["dim"]), int(meta["clients"])
        rows: dict[int, list] = {i: [] for i in range(n_clients)}
        test_rows = []
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            idx = int(parts[0])
            (test_rows if idx < 0 else rows[idx]).append(parts[1:])

    def build(index, items):
        if family == "synthetic":
            arr = np.array([[float(v) for v in r] for r in items], dtype=np.float64).reshape(len(items), 3 * dim)
            return ClientDataset(index, {"a": arr[:, :dim], "b": arr[:, dim:2 * dim], "c": arr[:, 2 * dim:]})
        labels = np.array([float(r[0]) for r in items])
        feats = np.array([[float(v) for v in r[1:]] for r in items], dtype=np.float64).reshape(len(items), dim)
        return ClientDataset(index, {"w": feats, "label": labels})

    clients = [build(i, rows[i]) for i in range(n_clients)]
    test = build(-1, test_rows) if test_rows else None
    return family, clients, test
