"""Exact trace likelihoods and maximum-likelihood distinguishing experiments.

A trace ``t`` of ``x`` arises from exactly ``embedding_count(x, t)`` deletion
patterns, each with probability ``p^|t| q^(|x|-|t|)``.  Counts stay exact
(Python ints) on the scalar path; the batched kernels use int64, which is
exact for ``|x| <= 62`` since ``C(62, 31) < 2^63``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np
from numba import njit

from .bits import Bits, as_array
from .channel import Q_MAX, Q_MIN, derive_seed, trace_rng

__all__ = [
    "LikelihoodModel",
    "Decision",
    "AdvantageResult",
    "TStarResult",
    "BATCH_MAX_LEN",
    "embedding_count",
    "embedding_counts_batch",
    "distinct_subsequences",
    "trace_likelihood",
    "ml_decide",
    "advantage_estimate",
    "traces_to_distinguish",
    "wilson_interval",
]

BATCH_MAX_LEN = 62
_Z95 = 1.959963984540054
_DOMAIN_TRUTH = 0x4D4C01
_DOMAIN_COIN = 0x4D4C02


@dataclass(frozen=True)
class LikelihoodModel:
    candidate_a: Bits
    candidate_b: Bits
    q: float
    allow_degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "candidate_a", Bits(self.candidate_a))
        object.__setattr__(self, "candidate_b", Bits(self.candidate_b))
        if len(self.candidate_a) == 0 or len(self.candidate_b) == 0:
            raise ValueError("candidates must be nonempty")
        lo, hi = (0.0, 1.0) if self.allow_degenerate else (Q_MIN, Q_MAX)
        if not lo <= self.q <= hi:
            raise ValueError(f"q={self.q} outside [{lo}, {hi}]")

    @property
    def p(self) -> float:
        return 1.0 - self.q


class Decision(str, Enum):
    A = "A"
    B = "B"
    TIE = "TIE"


def embedding_count(x, t) -> int:
    """Number of index sets of ``x`` that spell ``t`` (exact integer)."""
    xs = as_array(x).tolist()
    ts = as_array(t).tolist()
    m = len(ts)
    if m > len(xs):
        return 0
    dp = [1] + [0] * m
    for i, bit in enumerate(xs):
        # only prefixes of t no longer than i + 1 can end here
        for j in range(min(i + 1, m), 0, -1):
            if ts[j - 1] == bit:
                dp[j] += dp[j - 1]
    return dp[m]


@njit(cache=True, nogil=True)
def _count_batch(x, traces, lengths):
    n = x.shape[0]
    out = np.zeros(traces.shape[0], dtype=np.int64)
    dp = np.zeros(traces.shape[1] + 1, dtype=np.int64)
    for b in range(traces.shape[0]):
        m = lengths[b]
        if m > n:
            continue
        for j in range(m + 1):
            dp[j] = 0
        dp[0] = 1
        for i in range(n):
            xi = x[i]
            lo = max(1, m - (n - i) + 1)
            for j in range(min(i + 1, m), lo - 1, -1):
                if traces[b, j - 1] == xi:
                    dp[j] += dp[j - 1]
        out[b] = dp[m]
    return out


def embedding_counts_batch(x, traces: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """int64 embedding counts of many traces (rows of ``traces``, padded) in ``x``."""
    xa = as_array(x)
    if xa.size > BATCH_MAX_LEN:
        raise ValueError(f"batched counts are exact only for |x| <= {BATCH_MAX_LEN}")
    tr = np.ascontiguousarray(traces, dtype=np.uint8)
    if tr.ndim != 2:
        raise ValueError("traces must be a 2-D array")
    return _count_batch(xa, tr, np.ascontiguousarray(lengths, dtype=np.int64))


@njit(cache=True)
def _distinct_subsequences(x):
    n = x.shape[0]
    # nxt[b, i]: first index >= i holding bit b, or n
    nxt = np.full((2, n + 1), n, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        nxt[0, i] = nxt[0, i + 1]
        nxt[1, i] = nxt[1, i + 1]
        nxt[x[i], i] = i
    cap = 1 << (n + 1)
    rows = np.zeros((cap, max(n, 1)), dtype=np.uint8)
    lens = np.zeros(cap, dtype=np.int64)
    # every distinct subsequence has exactly one greedy embedding; walk them depth-first
    stack_pos = np.zeros(cap, dtype=np.int64)
    stack_row = np.zeros(cap, dtype=np.int64)
    count = 1
    top = 1
    stack_pos[0] = 0
    stack_row[0] = 0
    while top > 0:
        top -= 1
        pos = stack_pos[top]
        r = stack_row[top]
        for b in range(2):
            k = nxt[b, pos]
            if k < n:
                c = count
                count += 1
                ln = lens[r]
                rows[c, :ln] = rows[r, :ln]
                rows[c, ln] = b
                lens[c] = ln + 1
                stack_pos[top] = k + 1
                stack_row[top] = c
                top += 1
    return rows[:count], lens[:count]


def distinct_subsequences(x) -> tuple[np.ndarray, np.ndarray]:
    """All distinct subsequences of ``x`` (including the empty one) as padded rows plus lengths."""
    xa = as_array(x)
    if xa.size > 20:
        raise ValueError("enumeration is limited to |x| <= 20")
    return _distinct_subsequences(xa)


def _log(v: float) -> float:
    return math.log(v) if v > 0 else -math.inf


def trace_likelihood(x, t, q: float) -> float:
    """Natural-log probability that the channel turns ``x`` into ``t`` (``-inf`` when impossible)."""
    xa, ta = as_array(x), as_array(t)
    if ta.size > xa.size:
        return -math.inf
    c = embedding_count(xa, ta)
    if c == 0:
        return -math.inf
    kept, lost = ta.size, xa.size - ta.size
    lp = (kept * _log(1.0 - q) if kept else 0.0) + (lost * _log(q) if lost else 0.0)
    return math.log(c) + lp


def _exact_compare(ca: Sequence[int], cb: Sequence[int], len_a: int, len_b: int, q: float) -> int:
    """Sign of L(a) - L(b) computed exactly; the ``p^|t|`` factors cancel."""
    fq = Fraction(q)
    la = math.prod(int(v) for v in ca) * fq ** (len(ca) * len_a)
    lb = math.prod(int(v) for v in cb) * fq ** (len(cb) * len_b)
    return (la > lb) - (la < lb)


def _decide_counts(ca, cb, len_a: int, len_b: int, q: float) -> Decision:
    """ML decision from per-trace embedding counts under both candidates."""
    ca = np.asarray(ca)
    cb = np.asarray(cb)
    if np.any((ca == 0) & (cb == 0)):
        raise ValueError("a trace is impossible under both candidates")
    if np.any(cb == 0):
        return Decision.A
    if np.any(ca == 0):
        return Decision.B
    shift = ca.size * (len_a - len_b) * _log(q) if len_a != len_b else 0.0
    diff = float(np.sum(np.log(ca.astype(np.float64))) - np.sum(np.log(cb.astype(np.float64)))) + shift
    if abs(diff) > 1e-9 * (1.0 + abs(shift)):
        return Decision.A if diff > 0 else Decision.B
    s = _exact_compare(ca.tolist(), cb.tolist(), len_a, len_b, q)
    return Decision.A if s > 0 else Decision.B if s < 0 else Decision.TIE


def ml_decide(model: LikelihoodModel, traces: Sequence) -> Decision:
    """Maximum-likelihood choice between the two candidates (``"A"``, ``"B"`` or ``"TIE"``)."""
    if len(traces) == 0:
        raise ValueError("need at least one trace")
    a, b = model.candidate_a, model.candidate_b
    ca = [embedding_count(a, t) for t in traces]
    cb = [embedding_count(b, t) for t in traces]
    if any(x == 0 and y == 0 for x, y in zip(ca, cb)):
        raise ValueError("a trace is impossible under both candidates")
    if any(y == 0 for y in cb):
        return Decision.A
    if any(x == 0 for x in ca):
        return Decision.B
    s = _exact_compare(ca, cb, len(a), len(b), model.q)
    return Decision.A if s > 0 else Decision.B if s < 0 else Decision.TIE


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("trials must be positive")
    ph = successes / trials
    denom = 1 + z * z / trials
    centre = (ph + z * z / (2 * trials)) / denom
    half = z * math.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class AdvantageResult:
    t_count: int
    trials: int
    successes: int
    success: float
    half_width: float
    lower: float
    upper: float

    def as_row(self) -> tuple[int, float, float]:
        return (self.t_count, self.success, self.half_width)


def _trial_traces(x: np.ndarray, q: float, seed: int, trial: int, t_count: int):
    """``t_count`` traces of ``x`` from the trial's stream; a prefix of the stream for larger counts."""
    u = trace_rng(derive_seed(seed, trial), 0).random((t_count, x.size))
    keep = u >= q
    lengths = keep.sum(axis=1)
    rows = np.zeros((t_count, max(x.size, 1)), dtype=np.uint8)
    for r in range(t_count):
        kept = x[keep[r]]
        rows[r, :kept.size] = kept
    return rows, lengths


def advantage_estimate(model: LikelihoodModel, t_count: int, trials: int, seed: int) -> AdvantageResult:
    """Monte Carlo success rate of the ML rule with ``t_count`` traces.

    Each trial draws the true candidate by a fair coin, samples traces, and
    decides; ties are broken by a second seeded coin.  Trial ``i`` always
    uses the same stream, so estimates for different ``t_count`` share
    randomness and ``t_count + 1`` extends the traces of ``t_count``.
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    if t_count < 1:
        raise ValueError("t_count must be >= 1")
    a = as_array(model.candidate_a)
    b = as_array(model.candidate_b)
    exact_batch = max(a.size, b.size) <= BATCH_MAX_LEN
    truth_rng = trace_rng(seed, 0, domain=_DOMAIN_TRUTH)
    coin_rng = trace_rng(seed, 0, domain=_DOMAIN_COIN)
    truths = truth_rng.integers(0, 2, size=trials)
    coins = coin_rng.integers(0, 2, size=trials)
    wins = 0
    for trial in range(trials):
        truth_is_a = truths[trial] == 0
        source = a if truth_is_a else b
        rows, lengths = _trial_traces(source, model.q, seed, trial, t_count)
        if exact_batch:
            ca = embedding_counts_batch(a, rows, lengths)
            cb = embedding_counts_batch(b, rows, lengths)
            verdict = _decide_counts(ca, cb, a.size, b.size, model.q)
        else:
            traces = [Bits.from_array(rows[r, :lengths[r]].copy()) for r in range(t_count)]
            verdict = ml_decide(model, traces)
        if verdict == Decision.TIE:
            verdict = Decision.A if coins[trial] == 0 else Decision.B
        wins += (verdict == Decision.A) == truth_is_a
    lo, hi = wilson_interval(wins, trials)
    return AdvantageResult(t_count, trials, wins, wins / trials, (hi - lo) / 2, lo, hi)


@dataclass
class TStarResult:
    t_star: int | None
    capped: bool
    target: float
    curve: list[AdvantageResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "T_star": self.t_star,
            "capped": self.capped,
            "target": self.target,
            "success_curve": [[r.t_count, r.success, r.half_width] for r in sorted(self.curve, key=lambda r: r.t_count)],
        }


def traces_to_distinguish(model: LikelihoodModel, target_success: float = 5 / 8, trials: int = 2000,
                          seed: int = 0, t_cap: int = 256) -> TStarResult:
    """Smallest trace count whose Wilson lower bound reaches ``target_success``.

    Doubles the count until it passes, then bisects between the last failing
    and first passing count.  Returns ``t_star=None`` with ``capped=True`` when
    nothing up to ``t_cap`` passes.
    """
    if not 0.5 < target_success < 1.0:
        raise ValueError("target_success must lie in (1/2, 1)")
    if t_cap < 1:
        raise ValueError("t_cap must be >= 1")
    seen: dict[int, AdvantageResult] = {}

    def passes(t: int) -> bool:
        if t not in seen:
            seen[t] = advantage_estimate(model, t, trials, seed)
        return seen[t].lower >= target_success

    lo, t = 0, 1
    while not passes(t):
        lo = t
        if t >= t_cap:
            return TStarResult(None, True, target_success, list(seen.values()))
        t = min(2 * t, t_cap)
    hi = t
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return TStarResult(hi, False, target_success, list(seen.values()))
