"""Shared data model: points, estimates, constants, configs and per-round metrics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class FedSGDAError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(FedSGDAError, ValueError):
    """Invalid configuration, dimension mismatch or bad call arguments."""


class ProtocolError(FedSGDAError, RuntimeError):
    """A round-protocol precondition was violated (missing gradients, wrong batch size)."""


class UndefinedMetricError(FedSGDAError, ValueError):
    """A metric is undefined for the given input (e.g. single-class AUC)."""


class ConvergenceError(FedSGDAError, RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class EstimatorKind(str, enum.Enum):
    MB = "MB"
    STORM = "STORM"
    SPIDER = "SPIDER"


class ScheduleKind(str, enum.Enum):
    THEORETICAL = "THEORETICAL"
    PRACTICAL = "PRACTICAL"


class SamplingMode(str, enum.Enum):
    WITH_REPLACEMENT = "WITH_REPLACEMENT"
    WITHOUT_REPLACEMENT = "WITHOUT_REPLACEMENT"


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Return a read-only float64 1-D copy of ``values``."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be 1-D, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ConfigError(f"dimension mismatch: {a.shape} vs {b.shape}")


# -- vector operations -------------------------------------------------------
# Sums run strictly left to right (cumsum is sequential) so results do not
# depend on BLAS blocking or SIMD width.

def axpy(alpha: float, x, y) -> np.ndarray:
    """alpha * x + y."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same_dim(x, y)
    return alpha * x + y


def dot(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_dim(a, b)
    if a.size == 0:
        return 0.0
    return float(np.cumsum(a * b)[-1])


def norm_sq(a) -> float:
    return dot(a, a)


def mean_vectors(vectors: Sequence) -> np.ndarray:
    """Mean of a list of equal-length vectors, summed in ascending index order."""
    if len(vectors) == 0:
        raise ConfigError("mean of an empty list of vectors")
    acc = np.array(vectors[0], dtype=np.float64)
    for v in vectors[1:]:
        v = np.asarray(v, dtype=np.float64)
        _check_same_dim(acc, v)
        acc += v
    return acc / len(vectors)


def mean_rows(arr: np.ndarray) -> np.ndarray:
    """Row mean of a 2-D array with the same summation order as :func:`mean_vectors`."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.shape[0] == 0:
        raise ConfigError("mean of an empty list of vectors")
    acc = arr[0].copy()
    for i in range(1, arr.shape[0]):
        acc += arr[i]
    return acc / arr.shape[0]


# -- domain types --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PrimalDualPoint:
    """A pair z = (x, y) of primal and dual parameters."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", as_vector(self.x, "x"))
        object.__setattr__(self, "y", as_vector(self.y, "y"))

    @property
    def dims(self) -> tuple[int, int]:
        return self.x.shape[0], self.y.shape[0]

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y)))

    def check(self, dims: tuple[int, int]) -> None:
        if self.dims != tuple(dims):
            raise ConfigError(f"point has dims {self.dims}, expected {tuple(dims)}")
        if not self.is_finite():
            raise ProtocolError("non-finite entries in point")

    def distance_sq(self, other: "PrimalDualPoint") -> float:
        return norm_sq(self.x - other.x) + norm_sq(self.y - other.y)

    def __eq__(self, other):
        if not isinstance(other, PrimalDualPoint):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    """Global estimate (u_t, v_t) of the partial gradients at the round anchor."""

    u: np.ndarray
    v: np.ndarray
    round_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "u", as_vector(self.u, "u"))
        object.__setattr__(self, "v", as_vector(self.v, "v"))
        if self.round_index < 0:
            raise ConfigError("round_index must be >= 0")

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))


@dataclass(frozen=True, eq=False)
class LocalDirection:
    d_x: np.ndarray
    d_y: np.ndarray


@dataclass(frozen=True)
class SmoothnessConstants:
    """Lipschitz moduli, PL modulus and dissimilarity bounds.

    ``Lf``, ``Lphi`` and ``Ltilde`` are always derived from the moduli and
    cannot be passed in.
    """

    L1: float
    L2: float
    L12: float
    L21: float
    mu: float
    sigma1_sq: float = 0.0
    sigma2_sq: float = 0.0
    Lf: float = field(init=False)
    Lphi: float = field(init=False)
    Ltilde: float = field(init=False)

    def __post_init__(self):
        for name in ("L1", "L2", "L12", "L21", "sigma1_sq", "sigma2_sq"):
            value = float(getattr(self, name))
            if not value >= 0:
                raise ConfigError(f"{name} must be nonnegative, got {value}")
            object.__setattr__(self, name, value)
        mu = float(self.mu)
        if not mu > 0:
            raise ConfigError(f"mu must be positive, got {mu}")
        object.__setattr__(self, "mu", mu)
        L1, L2, L12, L21 = self.L1, self.L2, self.L12, self.L21
        Lf = max(math.sqrt(2 * (L1**2 + L21**2)), math.sqrt(2 * (L2**2 + L12**2)))
        Lphi = L1 + L12 * L21 / (2 * mu)
        object.__setattr__(self, "Lf", Lf)
        object.__setattr__(self, "Lphi", Lphi)
        object.__setattr__(self, "Ltilde", 2 * (Lphi + Lf))

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("L1", "L2", "L12", "L21", "mu", "sigma1_sq", "sigma2_sq", "Lf", "Lphi", "Ltilde")}


@dataclass(frozen=True)
class RoundSchedule:
    eta: float
    gamma: float
    alpha: float = 1.0
    beta: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    num_clients: int
    clients_per_round: int
    local_steps: int
    rounds: int
    local_batch_size: int
    estimator: EstimatorKind = EstimatorKind.MB
    spider_period: Optional[int] = None
    spider_big_batch: Optional[int] = None
    schedule: ScheduleKind = ScheduleKind.PRACTICAL
    c_eta: float = 1e-3
    c_gamma: float = 1e-3
    c_alpha: float = 1.0
    rho: float = 0.0
    sampling: SamplingMode = SamplingMode.WITH_REPLACEMENT
    same_subsets: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "estimator", EstimatorKind(self.estimator))
        object.__setattr__(self, "schedule", ScheduleKind(self.schedule))
        object.__setattr__(self, "sampling", SamplingMode(self.sampling))
        self.validate()

    def validate(self) -> None:
        for name in ("num_clients", "clients_per_round", "local_steps", "rounds", "local_batch_size"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.clients_per_round > self.num_clients:
            raise ConfigError("clients_per_round must be <= num_clients")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        is_spider = self.estimator is EstimatorKind.SPIDER
        has_spider = self.spider_period is not None or self.spider_big_batch is not None
        if is_spider:
            if self.spider_period is None or self.spider_big_batch is None:
                raise ConfigError("SPIDER needs spider_period and spider_big_batch")
            if self.spider_period < 1 or self.spider_big_batch < 1:
                raise ConfigError("spider_period and spider_big_batch must be positive")
            if self.rounds % self.spider_period != 0:
                raise ConfigError("SPIDER runs need rounds to be a multiple of spider_period")
            if (self.sampling is SamplingMode.WITHOUT_REPLACEMENT
                    and self.spider_big_batch > self.num_clients):
                raise ConfigError("spider_big_batch must be <= num_clients without replacement")
        elif has_spider:
            raise ConfigError("spider_period/spider_big_batch are only valid for SPIDER")
        if self.schedule is ScheduleKind.PRACTICAL:
            if self.c_eta < 0 or self.c_gamma < 0 or self.c_alpha < 0:
                raise ConfigError("practical schedule constants must be nonnegative")
            if not 0 <= self.rho <= 1:
                raise ConfigError("rho must lie in [0, 1]")

    def client_count(self, t: int) -> int:
        """Number of clients sampled per phase in round ``t``."""
        if self.estimator is EstimatorKind.SPIDER and t % self.spider_period == 0:
            return self.spider_big_batch
        return self.clients_per_round


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    eta: float
    gamma: float
    alpha: float
    grad_phi_norm_sq: float
    phi_minus_f: float
    eps_x: float
    eps_y: float
    potential_shifted: float
    clients_contacted: int
    test_auc: Optional[float] = None
