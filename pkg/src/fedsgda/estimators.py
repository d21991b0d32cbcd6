"""Global gradient estimators: minibatch (MB), STORM and SPIDER.

Estimators only ever see gradient vectors returned by clients, never raw
client data. Each update is a pure transition
``(EstimatorState, CollectedGradients) -> (GradientEstimate, EstimatorState)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ConfigError, EstimatorKind, GradientEstimate, ProtocolError, mean_rows


class RequiredPoints(enum.Enum):
    CURRENT_ONLY = "CURRENT_ONLY"
    PREV_AND_CURRENT = "PREV_AND_CURRENT"


@dataclass(frozen=True)
class EstimatorState:
    kind: EstimatorKind
    prev_estimate: Optional[GradientEstimate] = None
    spider_period: Optional[int] = None
    spider_phase: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", EstimatorKind(self.kind))
        if self.kind is EstimatorKind.SPIDER and not self.spider_period:
            raise ConfigError("SPIDER state needs spider_period")


@dataclass(frozen=True, eq=False)
class CollectedGradients:
    """Client gradients gathered in one collection phase.

    Row j of every array belongs to ``client_indices[j]``; prev/curr rows are
    paired per client.
    """

    client_indices: np.ndarray
    gx_curr: np.ndarray
    gy_curr: np.ndarray
    gx_prev: Optional[np.ndarray] = None
    gy_prev: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.client_indices)
        for name in ("gx_curr", "gy_curr", "gx_prev", "gy_prev"):
            arr = getattr(self, name)
            if arr is not None and np.shape(arr)[0] != n:
                raise ProtocolError(f"{name} has {np.shape(arr)[0]} rows for {n} clients")

    @property
    def has_prev(self) -> bool:
        return self.gx_prev is not None and self.gy_prev is not None

    def __len__(self) -> int:
        return len(self.client_indices)

    @classmethod
    def from_lists(cls, client_indices, at_curr, at_prev=None) -> "CollectedGradients":
        """Build from lists of ``(gx, gy)`` pairs."""
        if len(at_curr) == 0:
            return cls(np.asarray(client_indices), np.zeros((0, 0)), np.zeros((0, 0)))
        gx = np.stack([g[0] for g in at_curr])
        gy = np.stack([g[1] for g in at_curr])
        if at_prev is None:
            return cls(np.asarray(client_indices), gx, gy)
        return cls(np.asarray(client_indices), gx, gy,
                   np.stack([g[0] for g in at_prev]), np.stack([g[1] for g in at_prev]))


def required_points(state: EstimatorState, t: int) -> RequiredPoints:
    if state.kind is EstimatorKind.MB:
        return RequiredPoints.CURRENT_ONLY
    if state.kind is EstimatorKind.STORM:
        return RequiredPoints.CURRENT_ONLY if t == 0 else RequiredPoints.PREV_AND_CURRENT
    if t % state.spider_period == 0:
        return RequiredPoints.CURRENT_ONLY
    return RequiredPoints.PREV_AND_CURRENT


def mb_estimate(collected: CollectedGradients, t: int = 0) -> GradientEstimate:
    """Plain average of the collected current-point gradients."""
    if len(collected) == 0:
        raise ProtocolError("minibatch estimate needs at least one client")
    return GradientEstimate(mean_rows(collected.gx_curr), mean_rows(collected.gy_curr), t)


def _need_prev(state: EstimatorState, collected: CollectedGradients) -> GradientEstimate:
    if state.prev_estimate is None:
        raise ProtocolError(f"{state.kind.value} update needs the previous estimate")
    if not collected.has_prev:
        raise ProtocolError(f"{state.kind.value} update needs gradients at the previous point")
    if len(collected) == 0:
        raise ProtocolError("empty gradient collection")
    return state.prev_estimate


def storm_update(state: EstimatorState, collected: CollectedGradients,
                 alpha: float, beta: float, t: int) -> GradientEstimate:
    """u_t = (1 - alpha)(u_{t-1} - mean g(z_{t-1})) + mean g(z_t); same for v with beta."""
    if t == 0:
        return mb_estimate(collected, 0)
    prev = _need_prev(state, collected)
    u = (1 - alpha) * (prev.u - mean_rows(collected.gx_prev)) + mean_rows(collected.gx_curr)
    v = (1 - beta) * (prev.v - mean_rows(collected.gy_prev)) + mean_rows(collected.gy_curr)
    return GradientEstimate(u, v, t)


def spider_update(state: EstimatorState, collected: CollectedGradients, t: int, m: int,
                  big_batch: Optional[int] = None, batch: Optional[int] = None) -> GradientEstimate:
    """Periodic anchor with recursive paired-difference corrections in between.

    ``big_batch``/``batch`` are the expected client counts for anchor and
    inner rounds; when given, a mismatch is a protocol error.
    """
    if t % m == 0:
        if big_batch is not None and len(collected) != big_batch:
            raise ProtocolError(f"SPIDER anchor round expects {big_batch} clients, got {len(collected)}")
        return mb_estimate(collected, t)
    if batch is not None and len(collected) != batch:
        raise ProtocolError(f"SPIDER inner round expects {batch} clients, got {len(collected)}")
    prev = _need_prev(state, collected)
    u = prev.u + mean_rows(collected.gx_curr - collected.gx_prev)
    v = prev.v + mean_rows(collected.gy_curr - collected.gy_prev)
    return GradientEstimate(u, v, t)


def initial_state(kind: EstimatorKind, spider_period: Optional[int] = None) -> EstimatorState:
    return EstimatorState(EstimatorKind(kind), None, spider_period, 0)


def advance(state: EstimatorState, collected: CollectedGradients, t: int,
            alpha: float = 1.0, beta: float = 1.0,
            big_batch: Optional[int] = None,
            batch: Optional[int] = None) -> tuple[GradientEstimate, EstimatorState]:
    """Apply the estimator named by ``state.kind`` for round ``t``."""
    if state.kind is EstimatorKind.MB:
        return mb_estimate(collected, t), state
    if state.kind is EstimatorKind.STORM:
        est = storm_update(state, collected, alpha, beta, t)
    else:
        est = spider_update(state, collected, t, state.spider_period, big_batch, batch)
    phase = (t + 1) % state.spider_period if state.spider_period else 0
    return est, EstimatorState(state.kind, est, state.spider_period, phase)
