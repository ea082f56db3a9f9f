"""I.i.d. deletion channel with reproducible per-trace randomness."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from numba import njit

from .bits import Bits, as_array

__all__ = [
    "ChannelParams",
    "Q_MIN",
    "Q_MAX",
    "derive_seed",
    "trace_rng",
    "retained_mask",
    "sample_trace",
    "sample_traces",
    "is_subsequence",
]

Q_MIN = 0.05
Q_MAX = 0.95

_MASK64 = (1 << 64) - 1
# Philox key word 1: keeps channel streams apart from other consumers of the same seed.
_CHANNEL_DOMAIN = 0x7472616365


def derive_seed(*parts: int) -> int:
    """Hash a tuple of integers to a 64-bit seed (stable across platforms and runs)."""
    h = hashlib.blake2b(digest_size=8, person=b"tracelab")
    for v in parts:
        h.update(int(v).to_bytes(16, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def trace_rng(master_seed: int, trial: int, domain: int = _CHANNEL_DOMAIN) -> np.random.Generator:
    """Counter-based stream for ``(master_seed, trial)``.

    The trial index occupies the top counter word, so streams for different
    trials never overlap and do not depend on generation order.
    """
    if trial < 0:
        raise ValueError("trial index must be non-negative")
    bg = np.random.Philox(
        key=np.array([master_seed & _MASK64, domain & _MASK64], dtype=np.uint64),
        counter=np.array([0, 0, 0, trial & _MASK64], dtype=np.uint64),
    )
    return np.random.Generator(bg)


@dataclass(frozen=True)
class ChannelParams:
    """Deletion probability ``q`` (retention ``p = 1 - q``) and the master seed.

    ``q`` must lie in ``[0.05, 0.95]``.  ``allow_degenerate=True`` additionally
    admits any ``q`` in ``[0, 1]``; it exists for noiseless and all-deleted
    test cases.
    """

    q: float
    master_seed: int = 0
    allow_degenerate: bool = False

    def __post_init__(self):
        q = float(self.q)
        object.__setattr__(self, "q", q)
        lo, hi = (0.0, 1.0) if self.allow_degenerate else (Q_MIN, Q_MAX)
        if not (lo <= q <= hi):
            raise ValueError(f"q={q} outside [{lo}, {hi}]")
        object.__setattr__(self, "master_seed", int(self.master_seed) & _MASK64)

    @property
    def p(self) -> float:
        return 1.0 - self.q

    def with_seed(self, seed: int) -> "ChannelParams":
        return ChannelParams(self.q, seed, self.allow_degenerate)


def retained_mask(n: int, ch: ChannelParams, trial: int) -> np.ndarray:
    """Boolean mask of surviving positions: one uniform draw per source bit."""
    u = trace_rng(ch.master_seed, trial).random(n)
    return u >= ch.q


def sample_trace(x, ch: ChannelParams, trial: int) -> Bits:
    a = as_array(x)
    return Bits.from_array(a[retained_mask(a.size, ch, trial)])


def sample_traces(x, ch: ChannelParams, t_count: int) -> list[Bits]:
    if t_count < 1:
        raise ValueError("t_count must be >= 1")
    a = as_array(x)
    return [Bits.from_array(a[retained_mask(a.size, ch, i)]) for i in range(t_count)]


@njit(cache=True, nogil=True)
def _is_subseq(t, x):
    j = 0
    m = t.shape[0]
    if m == 0:
        return True
    for i in range(x.shape[0]):
        if x[i] == t[j]:
            j += 1
            if j == m:
                return True
    return False


def is_subsequence(t, x) -> bool:
    """Greedy left-to-right check that ``t`` is obtainable from ``x`` by deletions."""
    return bool(_is_subseq(as_array(t), as_array(x)))
