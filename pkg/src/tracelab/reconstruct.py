"""Approximate reconstruction from deletion-channel traces.

All algorithms share one output convention: estimated segment lengths are
rescaled by ``1/p`` and rounded half-up, with nonempty estimates kept at
length >= 1.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .bits import Bits, as_array, run_table
from .classes import ceil_tol, floor_tol, log_q

__all__ = [
    "Status",
    "ReconReport",
    "GapParams",
    "SKind",
    "SStatResult",
    "round_length",
    "trace_count",
    "chernoff_hoeffding_bound",
    "recon_long_runs",
    "recon_long_runs_robust",
    "recon_one_runs",
    "recon_gap",
    "s_statistic",
    "robust_scan",
    "recon_gap_robust",
    "majority_windows",
    "recon_majority",
    "estimate_gap_constant",
    "ALGORITHMS",
]

ALGORITHMS = ("longruns", "longruns-robust", "oneruns", "gap", "gap-robust", "majority")


class Status(str, Enum):
    OK = "OK"
    COUNT_MISMATCH_FAIL = "COUNT_MISMATCH_FAIL"
    ALL_ZERO_FALLBACK = "ALL_ZERO_FALLBACK"


@dataclass
class ReconReport:
    output: Bits
    status: Status
    traces_used: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is Status.OK

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "traces_used": self.traces_used,
            "output_length": len(self.output),
            "diagnostics": self.diagnostics,
        }


def _fail(traces_used: int, **diag) -> ReconReport:
    return ReconReport(Bits(), Status.COUNT_MISMATCH_FAIL, traces_used, diag)


def round_length(x: float) -> int:
    """Half-up rounding; a positive estimate never rounds to an empty run."""
    if x <= 0:
        return 0
    return max(1, math.floor(x + 0.5))


def _emit(first_value: int, lengths: Sequence[int]) -> Bits:
    """Alternating runs starting at ``first_value``; zero-length entries are dropped."""
    ln = np.asarray(lengths, dtype=np.int64)
    values = ((np.arange(ln.size) + first_value) % 2).astype(np.uint8)
    return Bits.from_array(np.repeat(values, ln))


# -- parameters ----------------------------------------------------------------

def trace_count(epsilon: float, p: float, q: float, n: int, variant: str = "GAP") -> int:
    """Number of traces prescribed for each multi-trace algorithm."""
    ln = log_q(n, q)
    v = variant.upper()
    if v == "LONGRUNS":
        return max(1, ceil_tol(2.0 / (p * epsilon ** 2) * ln))
    if v in ("GAP", "ROBUST"):
        return max(1, ceil_tol(2.0 / (p ** 2 * epsilon ** 2) * ln))
    raise ValueError(f"unknown variant {variant!r}")


def chernoff_hoeffding_bound(mu: float, delta: float, b: float = 1.0) -> float:
    """Upper bound on ``P(|X - mu| >= delta * mu)`` for a weighted sum of independent bits."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return min(1.0, 2.0 * math.exp(-mu * delta ** 2 / (3.0 * b)))


@dataclass(frozen=True)
class GapParams:
    """Thresholds of the gap algorithms.

    ``p`` defaults to ``1 - q``; passing it explicitly decouples the length
    rescaling from the log base, which noiseless checks rely on.
    """

    n: int
    epsilon: float
    c_prime: float
    q: float
    p: float | None = None

    def __post_init__(self):
        if self.p is None:
            object.__setattr__(self, "p", 1.0 - self.q)
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.c_prime <= 0:
            raise ValueError("c_prime must be positive")

    @classmethod
    def derive(cls, n: int, epsilon: float, c_prime: float, q: float, p: float | None = None) -> "GapParams":
        return cls(n, epsilon, c_prime, q, p)

    @property
    def log_n(self) -> float:
        return log_q(self.n, self.q)

    @property
    def T(self) -> int:
        return max(1, ceil_tol(2.0 / (self.p ** 2 * self.epsilon ** 2) * self.log_n))

    @property
    def L(self) -> int:
        return max(1, ceil_tol(2 * self.c_prime * self.p * self.log_n))

    @property
    def m(self) -> int:
        return floor_tol(self.epsilon * self.c_prime * self.log_n)

    @property
    def a(self) -> int:
        return ceil_tol(self.p * self.c_prime * self.log_n)

    @property
    def G_bar(self) -> float:
        return 2 * self.c_prime * self.p * self.log_n

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(T=self.T, L=self.L, m=self.m, a=self.a, G_bar=self.G_bar, log_n=self.log_n)
        return d


# -- run-averaging algorithms ------------------------------------------------------

def recon_long_runs(traces: Sequence, p: float) -> ReconReport:
    """Average the i-th run length over traces that share one run structure."""
    if len(traces) == 0:
        raise ValueError("empty trace set")
    tables = [run_table(t) for t in traces]
    counts = {v.size for v, _, _ in tables}
    firsts = {int(v[0]) for v, _, _ in tables if v.size}
    if len(counts) != 1 or len(firsts) > 1:
        return _fail(len(traces), run_counts=sorted(counts))
    k = counts.pop()
    if k == 0:
        return ReconReport(Bits(), Status.OK, len(traces), {"k": 0})
    mu = np.mean(np.stack([ln for _, _, ln in tables]), axis=0)
    lengths = [round_length(v / p) for v in mu.tolist()]
    return ReconReport(
        _emit(firsts.pop(), lengths), Status.OK, len(traces),
        {"k": k, "mu": mu.tolist(), "lengths": lengths},
    )


def recon_long_runs_robust(traces: Sequence, s: int, p: float) -> ReconReport:
    """Keep only the traces with the most runs, then average as :func:`recon_long_runs`."""
    if len(traces) == 0:
        raise ValueError("empty trace set")
    if s < 0:
        raise ValueError("s must be >= 0")
    counts = np.array([run_table(t)[0].size for t in traces])
    keep = [t for t, c in zip(traces, counts) if c == counts.max()]
    rep = recon_long_runs(keep, p)
    rep.diagnostics.update(s=s, max_runs=int(counts.max()), kept=len(keep), total=len(traces))
    return rep


def _long_zero_runs(a: np.ndarray, threshold: int) -> tuple[np.ndarray, np.ndarray]:
    values, starts, lengths = run_table(a)
    sel = (values == 0) & (lengths >= threshold)
    return starts[sel], lengths[sel]


def _segments(size: int, starts: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Gap lengths before, between and after the selected runs."""
    ends = starts + lengths
    return np.diff(np.concatenate(([0], np.stack([starts, ends], axis=1).reshape(-1), [size])))[::2]


def _interleave(ones: Sequence[int], zeros: Sequence[int]) -> Bits:
    lengths = [0] * (len(ones) + len(zeros))
    lengths[::2] = ones
    lengths[1::2] = zeros
    return _emit(1, lengths)


def recon_one_runs(trace, epsilon: float, p: float, q: float, n: int) -> ReconReport:
    """Single trace: keep 0-runs of length >= log(n)/(10 eps), fill the rest with 1s."""
    a = as_array(trace)
    threshold = max(1, ceil_tol(log_q(n, q) / (10 * epsilon)))
    starts, lengths = _long_zero_runs(a, threshold)
    segs = _segments(a.size, starts, lengths)
    ones = [round_length(v / p) for v in segs.tolist()]
    zeros = [round_length(v / p) for v in lengths.tolist()]
    return ReconReport(
        _interleave(ones, zeros), Status.OK, 1,
        {"L": threshold, "k": int(lengths.size), "zero_runs": lengths.tolist(), "segments": segs.tolist()},
    )


def recon_gap(traces: Sequence, params: GapParams) -> ReconReport:
    """Align traces on their 0-runs of length >= L and average the pieces."""
    if len(traces) == 0:
        raise ValueError("empty trace set")
    rs, ss = [], []
    for t in traces:
        a = as_array(t)
        starts, lengths = _long_zero_runs(a, params.L)
        rs.append(lengths)
        ss.append(_segments(a.size, starts, lengths))
    ks = {r.size for r in rs}
    if len(ks) != 1:
        return _fail(len(traces), run_counts=sorted(ks), L=params.L)
    k = ks.pop()
    mu_s = np.mean(np.stack(ss), axis=0)
    mu_r = np.mean(np.stack(rs), axis=0) if k else np.zeros(0)
    ones = [round_length(v / params.p) for v in mu_s.tolist()]
    zeros = [round_length(v / params.p) for v in mu_r.tolist()]
    return ReconReport(
        _interleave(ones, zeros), Status.OK, len(traces),
        {"k": k, "L": params.L, "mu_r": mu_r.tolist(), "mu_s": mu_s.tolist()},
    )


# -- dense-substring statistic ------------------------------------------------------

class SKind(str, Enum):
    INTERIOR = "INTERIOR"
    L_BOUND = "L_BOUND"
    R_BOUND = "R_BOUND"
    UNDEFINED = "UNDEFINED"


@dataclass(frozen=True)
class SStatResult:
    value: int | None
    i_ell: int | None
    j_ell: int | None
    kind: SKind


class _TraceIndex:
    """Prefix counts and 1/0 positions of one trace, shared by repeated S queries."""

    def __init__(self, a: np.ndarray):
        self.a = a
        self.size = a.size
        self.ones = np.flatnonzero(a == 1)
        self.zeros = np.flatnonzero(a == 0)
        self.zpre = np.concatenate(([0], np.cumsum(a == 0, dtype=np.int64)))

    def zeros_in(self, lo: int, hi: int) -> int:
        """Zeros in the closed range ``[lo, hi]``."""
        return int(self.zpre[hi + 1] - self.zpre[lo])

    def stat(self, ell: int, m: int) -> SStatResult:
        left = int(np.searchsorted(self.ones, ell))
        right = int(np.searchsorted(self.ones, ell, side="right"))
        i = int(self.ones[left - (m + 1)]) if left >= m + 1 else None
        j = int(self.ones[right + m]) if right + m < self.ones.size else None
        if i is not None and j is not None:
            return SStatResult(self.zeros_in(i, j), i, j, SKind.INTERIOR)
        if j is not None:
            return SStatResult(self.zeros_in(0, j), None, j, SKind.L_BOUND)
        if i is not None:
            return SStatResult(self.zeros_in(i, self.size - 1), i, None, SKind.R_BOUND)
        return SStatResult(None, None, None, SKind.UNDEFINED)


def s_statistic(trace, ell: int, m: int) -> SStatResult:
    """Zeros between the (m+1)-th 1 left of ``ell`` and the (m+1)-th 1 right of it.

    A missing side is replaced by the trace boundary; with both sides missing
    the statistic is undefined.
    """
    a = as_array(trace)
    if not 0 <= ell < a.size or a[ell] != 0:
        raise ValueError(f"trace[{ell}] must be 0")
    if m < 0:
        raise ValueError("m must be >= 0")
    return _TraceIndex(a).stat(ell, m)


@dataclass(frozen=True)
class ScanHit:
    trigger: int
    ell: int
    stat: SStatResult


def robust_scan(trace, a_thr: int, m: int) -> list[ScanHit]:
    """Left-to-right search for 0-dense windows and the S statistic at each.

    A position triggers when it holds a 0 with at least ``a_thr`` zeros within
    distance ``a_thr + m``.  The anchor is the (m+1)-th zero from the window's
    left edge, where the edge never reaches back past the previous hit.  After
    a hit the scan resumes ``m + 1`` positions beyond the last bit it counted.
    The scan stops after a hit that counted through the end of the trace.
    """
    x = as_array(trace)
    idx = _TraceIndex(x)
    n = x.size
    hits: list[ScanHit] = []
    if n == 0:
        return hits
    radius = a_thr + m
    pos = np.arange(n)
    lo = np.maximum(pos - radius, 0)
    hi = np.minimum(pos + radius, n - 1)
    dense = (x == 0) & (idx.zpre[hi + 1] - idx.zpre[lo] >= a_thr)
    triggers = np.flatnonzero(dense)
    start = 0
    floor = 0
    while True:
        t = int(np.searchsorted(triggers, start))
        if t >= triggers.size:
            break
        i = int(triggers[t])
        edge = max(0, i - radius, floor)
        c = int(np.searchsorted(idx.zeros, edge))
        if c + m >= idx.zeros.size:
            break
        ell = int(idx.zeros[c + m])
        st = idx.stat(ell, m)
        hits.append(ScanHit(i, ell, st))
        if st.kind in (SKind.INTERIOR, SKind.L_BOUND):
            floor = st.j_ell + 1
            start = st.j_ell + m + 2
        else:
            break
    return hits


def recon_gap_robust(traces: Sequence, params: GapParams) -> ReconReport:
    """Find 0-dense stretches with :func:`robust_scan`, keep those with S above ``G_bar``, then align."""
    if len(traces) == 0:
        raise ValueError("empty trace set")
    a_thr, m, p = params.a, params.m, params.p
    if a_thr <= 3 * m:
        raise ValueError(f"premise violated: a={a_thr} must exceed 3m={3 * m}")
    arrays = [as_array(t) for t in traces]
    mean_len = float(np.mean([t.size for t in arrays]))
    selected = []
    for x in arrays:
        hits = robust_scan(x, a_thr, m)
        if any(h.stat.kind is SKind.UNDEFINED for h in hits):
            out = Bits.zeros(round_length(mean_len / p))
            return ReconReport(out, Status.ALL_ZERO_FALLBACK, len(traces), {"mean_length": mean_len})
        keep = [
            (h.stat.value, 0 if h.stat.i_ell is None else h.stat.i_ell,
             x.size - 1 if h.stat.j_ell is None else h.stat.j_ell)
            for h in hits if h.stat.value > params.G_bar
        ]
        selected.append(keep)
    sizes = {len(s) for s in selected}
    if len(sizes) != 1:
        return _fail(len(traces), dense_counts=sorted(sizes), G_bar=params.G_bar)
    big_i = sizes.pop()
    if big_i == 0:
        return ReconReport(Bits.ones(round_length(mean_len / p)), Status.OK, len(traces),
                           {"I": 0, "mean_length": mean_len})
    arr = np.array(selected, dtype=np.float64)  # (T, I, 3)
    mu = arr[:, :, 0].mean(axis=0)
    i_hat = arr[:, :, 1].mean(axis=0)
    j_hat = arr[:, :, 2].mean(axis=0)
    ones = [round_length(i_hat[0] / p)]
    ones += [round_length(abs(i_hat[t + 1] - j_hat[t]) / p) for t in range(big_i - 1)]
    ones.append(round_length(abs(p * params.n - j_hat[-1]) / p))
    zeros = [round_length(v / p) for v in mu.tolist()]
    return ReconReport(
        _interleave(ones, zeros), Status.OK, len(traces),
        {"I": big_i, "mu": mu.tolist(), "i_hat": i_hat.tolist(), "j_hat": j_hat.tolist(),
         "G_bar": params.G_bar, "a": a_thr, "m": m},
    )


# -- single-trace majority vote -----------------------------------------------------

def majority_windows(trace, w: int, p: float) -> Bits:
    """One run of length ``round(w/p)`` per width-``w`` window, valued by the window majority (ties to 1)."""
    a = as_array(trace)
    if a.size == 0:
        return Bits()
    if w < 1:
        raise ValueError("w must be >= 1")
    edges = np.arange(0, a.size, w)
    ones = np.add.reduceat(a.astype(np.int64), edges)
    widths = np.diff(np.append(edges, a.size))
    votes = (2 * ones >= widths).astype(np.uint8)
    return Bits.from_array(np.repeat(votes, round_length(w / p)))


def recon_majority(trace, epsilon: float, p: float, q: float, n: int) -> ReconReport:
    big_l = ceil_tol(50 * log_q(n, q) / (p ** 2 * epsilon ** 2))
    w = max(1, round_length(epsilon * p * big_l))
    out = majority_windows(trace, w, p)
    return ReconReport(out, Status.OK, 1, {"L": big_l, "w": w, "windows": -(-len(as_array(trace)) // w)})


# -- unknown gap constant --------------------------------------------------------------

def estimate_gap_constant(traces: Sequence, epsilon: float, p: float, q: float, n: int,
                          robust: bool = False) -> float | None:
    """Smallest grid value of the gap constant consistent with the pooled traces.

    A candidate ``c`` is consistent when no trace 0-run length falls strictly
    inside ``(1.5 c p log n, 2.5 c p log n)``, the middle half of where the
    gap lands after deletions.  Without ``robust`` it must also keep every
    trace 1-run at least ``c p log n / (2 eps)`` long.  The grid runs at ratio
    1.1 from 1 to ``n / log n``, restricted to ``c >= 100/p`` (``1000/p`` when
    robust).
    """
    if len(traces) == 0:
        raise ValueError("empty trace set")
    ln = log_q(n, q)
    zero_lengths, one_min = [], math.inf
    for t in traces:
        values, _, lengths = run_table(t)
        zero_lengths.append(lengths[values == 0])
        ones = lengths[values == 1]
        if ones.size:
            one_min = min(one_min, int(ones.min()))
    zl = np.sort(np.concatenate(zero_lengths)) if zero_lengths else np.zeros(0, dtype=np.int64)
    lowest = (1000.0 if robust else 100.0) / p
    top = n / ln
    c = 1.0
    while c <= top * (1 + 1e-12):
        if c >= lowest * (1 - 1e-12):
            lo, hi = 1.5 * c * p * ln, 2.5 * c * p * ln
            inside = np.searchsorted(zl, hi, side="left") - np.searchsorted(zl, lo, side="right")
            ones_ok = robust or one_min >= c * p * ln / (2 * epsilon)
            if inside == 0 and ones_ok:
                return c
        c *= 1.1
    return None
