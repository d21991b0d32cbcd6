"""Counter-based random streams.

Every draw is a pure function of ``(seed, round, phase, client, step, counter)``
so results never depend on the order in which clients are simulated.
Uniforms come from a splitmix64 hash chain over the key; bulk Gaussian
draws (data generation, probe points) use a numpy ``Generator`` seeded from
the same key through ``SeedSequence``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_OCCURRENCE_SHIFT = 1 << 32


class Phase(enum.IntEnum):
    DATA = 1
    COLLECT = 2
    UPDATE = 3
    MINIBATCH = 4
    PROBE = 5
    VERIFY = 6
    ORACLE = 7


def _mix(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def hash_key(*components) -> np.ndarray:
    """splitmix64 chain over broadcastable integer key components."""
    with np.errstate(over="ignore"):
        h = np.zeros((), dtype=np.uint64)
        for c in components:
            c = np.asarray(c)
            if c.dtype != np.uint64:
                c = c.astype(np.int64).astype(np.uint64)
            h = _mix(h ^ c)
        return h


def uniforms(seed: int, *key, size: int) -> np.ndarray:
    """Uniform [0, 1) draws with shape ``broadcast(key) + (size,)``."""
    base = hash_key(np.uint64(seed), *key)
    counters = np.arange(size, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix(base[..., None] ^ counters)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def client_key(client, occurrence=0):
    """Key component for a client; repeated draws of one client get distinct keys."""
    return np.asarray(client, dtype=np.int64) + np.asarray(occurrence, dtype=np.int64) * _OCCURRENCE_SHIFT


def occurrences(indices: np.ndarray) -> np.ndarray:
    """For a sorted index list, how many earlier entries share each value."""
    out = np.zeros(len(indices), dtype=np.int64)
    for j in range(1, len(indices)):
        if indices[j] == indices[j - 1]:
            out[j] = out[j - 1] + 1
    return out


@dataclass(frozen=True)
class RngStream:
    seed: int
    round: int = 0
    phase: int = 0
    client: int = 0
    step: int = 0

    @property
    def key(self) -> tuple:
        return (self.round, int(self.phase), self.client, self.step)

    def uniform(self, n: int) -> np.ndarray:
        return uniforms(self.seed, *self.key, size=n)

    def integers(self, high: int, n: int) -> np.ndarray:
        return np.minimum((self.uniform(n) * high).astype(np.int64), high - 1)

    def subset(self, n: int, k: int) -> np.ndarray:
        """Uniformly random k-subset of range(n), sorted ascending."""
        order = np.argsort(self.uniform(n), kind="stable")
        return np.sort(order[:k])

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(int(k) for k in self.key))
        return np.random.default_rng(ss)

    def child(self, **changes) -> "RngStream":
        fields = dict(seed=self.seed, round=self.round, phase=self.phase, client=self.client, step=self.step)
        fields.update(changes)
        return RngStream(**fields)


def minibatch_indices(seed: int, t: int, clients: np.ndarray, occ: np.ndarray,
                      steps: int, n: int, b: int) -> np.ndarray:
    """Without-replacement minibatches for every (client, local step).

    Returns an int array of shape ``(len(clients), steps, b)``; row ``(j, k)``
    is the same as ``RngStream(seed, t, MINIBATCH, client_key, k).subset(n, b)``.
    """
    ck = client_key(clients, occ)[:, None]
    ks = np.arange(steps)[None, :]
    keys = uniforms(seed, t, int(Phase.MINIBATCH), ck, ks, size=n)
    order = np.argsort(keys, axis=-1, kind="stable")[..., :b]
    return np.sort(order, axis=-1)
