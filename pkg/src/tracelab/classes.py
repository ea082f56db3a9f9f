"""Generators and validators for the structured string classes and hard instances.

Every threshold is derived from ``log_{1/q}(n)`` and rounded so that the
class premises hold for the integer values actually used.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from numba import njit

from .bits import Bits, as_array, run_table
from .channel import trace_rng

__all__ = [
    "ClassKind",
    "ClassSpec",
    "BlockTruth",
    "Interval",
    "Generated",
    "Diagnostics",
    "InfeasibleSpec",
    "log_q",
    "ceil_tol",
    "floor_tol",
    "default_c_prime",
    "gen_all_long_runs",
    "gen_long_one_runs",
    "gen_gap_class",
    "perturb_runs",
    "gen_dense_intervals",
    "gen_random",
    "gen_hard_pair",
    "gen_block_concat",
    "block_length_for",
    "gen_hamming_pair",
    "generate",
    "validate_class",
]

_TOL = 1e-9


class InfeasibleSpec(ValueError):
    """The requested class has no member of the requested length."""


class ClassKind(str, Enum):
    ALL_LONG_RUNS = "ALL_LONG_RUNS"
    LONG_ONE_RUNS = "LONG_ONE_RUNS"
    GAP_CLASS = "GAP_CLASS"
    PERTURBED_GAP = "PERTURBED_GAP"
    DENSE_INTERVALS = "DENSE_INTERVALS"
    RANDOM = "RANDOM"


def log_q(n: float, q: float) -> float:
    """``log`` of ``n`` in base ``1/q``."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"log base 1/q needs 0 < q < 1, got {q}")
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.log(n) / math.log(1.0 / q)


def ceil_tol(x: float) -> int:
    """Ceiling that ignores floating noise just above an integer."""
    return math.ceil(x - _TOL)


def floor_tol(x: float) -> int:
    return math.floor(x + _TOL)


def default_c_prime(kind: ClassKind, q: float) -> float:
    p = 1.0 - q
    return {
        ClassKind.LONG_ONE_RUNS: 6.0 / p,
        ClassKind.GAP_CLASS: 100.0 / p,
        ClassKind.PERTURBED_GAP: 1000.0 / p,
        ClassKind.DENSE_INTERVALS: 50.0 / p ** 2,
    }.get(kind, 1.0)


@dataclass(frozen=True)
class ClassSpec:
    """Parameters of one string class.

    ``c_prime=None`` selects the class default.  The remaining knobs pick a
    member distribution where the class definition leaves freedom:
    ``long_fraction`` is the chance a gap-class 0-run is long, ``short_runs``
    places that many sub-threshold runs in an all-long-runs string, and
    ``adversarial`` makes perturbation flip the first bits of every run.
    """

    class_kind: ClassKind
    n: int
    epsilon: float
    c_prime: float | None = None
    q: float = 0.5
    seed: int = 0
    long_fraction: float = 0.5
    short_runs: int = 0
    adversarial: bool = False

    def __post_init__(self):
        object.__setattr__(self, "class_kind", ClassKind(self.class_kind))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0.0 < self.q < 1.0:
            raise ValueError("q must lie in (0, 1) to fix the log base")
        if self.c_prime is not None and self.c_prime <= 0:
            raise ValueError("c_prime must be positive")
        if not 0.0 <= self.long_fraction <= 1.0:
            raise ValueError("long_fraction must lie in [0, 1]")
        if self.short_runs < 0:
            raise ValueError("short_runs must be >= 0")

    @property
    def p(self) -> float:
        return 1.0 - self.q

    @property
    def cp(self) -> float:
        return self.c_prime if self.c_prime is not None else default_c_prime(self.class_kind, self.q)

    @property
    def log_n(self) -> float:
        return log_q(self.n, self.q)

    @property
    def long_run_min(self) -> int:
        """Minimum run length for ALL_LONG_RUNS: ``ceil(5 log n)``."""
        return max(1, ceil_tol(5 * self.log_n))

    @property
    def one_run_min(self) -> int:
        if self.class_kind is ClassKind.LONG_ONE_RUNS:
            return max(1, ceil_tol(self.cp * self.log_n / self.epsilon ** 2))
        return max(1, ceil_tol(self.cp * self.log_n / self.epsilon))

    @property
    def short_max(self) -> int:
        """Longest admissible short 0-run."""
        return ceil_tol(self.cp * self.log_n) - 1

    @property
    def long_min(self) -> int:
        """Shortest admissible long 0-run."""
        return ceil_tol(3 * self.cp * self.log_n) + 1

    @property
    def flip_budget(self) -> int:
        return floor_tol(self.epsilon * self.cp * self.log_n)

    @property
    def interval_min(self) -> int:
        return max(1, ceil_tol(self.cp * self.log_n / self.epsilon ** 2))

    def thresholds(self) -> dict:
        k = self.class_kind
        out: dict = {"log_n": self.log_n, "c_prime": self.cp}
        if k is ClassKind.ALL_LONG_RUNS:
            out["long_run_min"] = self.long_run_min
        elif k is ClassKind.LONG_ONE_RUNS:
            out["one_run_min"] = self.one_run_min
        elif k in (ClassKind.GAP_CLASS, ClassKind.PERTURBED_GAP):
            out.update(one_run_min=self.one_run_min, short_max=self.short_max, long_min=self.long_min)
            if k is ClassKind.PERTURBED_GAP:
                out["flip_budget"] = self.flip_budget
        elif k is ClassKind.DENSE_INTERVALS:
            out["interval_min"] = self.interval_min
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class_kind"] = self.class_kind.value
        d["c_prime"] = self.cp
        return d


@dataclass(frozen=True)
class Interval:
    start: int
    length: int
    majority: int


@dataclass(frozen=True)
class BlockTruth:
    """Which hard-pair member (``"A"`` or ``"B"``) fills each block."""

    block_length: int
    choices: tuple[str, ...]
    k: int
    remainder: int = 0

    @property
    def blocks_length(self) -> int:
        return self.block_length * len(self.choices)

    def assemble(self) -> Bits:
        a, b = gen_hard_pair(self.k)
        parts = [a if c == "A" else b for c in self.choices]
        parts.append(Bits.zeros(self.remainder))
        return Bits.concat(parts)


@dataclass
class Generated:
    """A generated string plus whatever metadata its class records."""

    bits: Bits
    spec: ClassSpec
    base: Bits | None = None
    flip_log: tuple[tuple[int, ...], ...] | None = None
    layout: tuple[Interval, ...] | None = None

    def metadata(self) -> dict:
        meta: dict = {"spec": self.spec.to_dict(), "thresholds": self.spec.thresholds()}
        if self.layout is not None:
            meta["layout"] = [asdict(iv) for iv in self.layout]
        if self.flip_log is not None:
            meta["flip_log"] = [list(f) for f in self.flip_log]
        if self.base is not None:
            meta["base"] = self.base.to_text()
        return meta


@dataclass
class Diagnostics:
    ok: bool
    class_kind: ClassKind
    message: str = ""
    index: int | None = None
    detail: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok


# Philox domain tags, one per generator.
_TAG = {
    ClassKind.ALL_LONG_RUNS: 11,
    ClassKind.LONG_ONE_RUNS: 12,
    ClassKind.GAP_CLASS: 13,
    ClassKind.PERTURBED_GAP: 14,
    ClassKind.DENSE_INTERVALS: 15,
    ClassKind.RANDOM: 16,
}
_BLOCK_TAG = 17


def _rng(seed: int, tag: int) -> np.random.Generator:
    return trace_rng(seed, 0, domain=tag)


def _uniform(rng: np.random.Generator, lo: int, hi: int) -> int:
    return int(rng.integers(lo, hi + 1))


def _require(spec: ClassSpec, kind: ClassKind):
    if spec.class_kind is not kind:
        raise ValueError(f"expected a {kind.value} spec, got {spec.class_kind.value}")


def _assemble(first_value: int, lengths: list[int]) -> Bits:
    values = (np.arange(len(lengths)) + first_value) % 2
    return Bits.from_array(np.repeat(values.astype(np.uint8), np.asarray(lengths, dtype=np.int64)))


def _fill(n: int, lo: int, draw) -> list[int]:
    """Cut ``n`` into pieces from ``draw()``; a piece that would leave less than ``lo`` absorbs the tail."""
    out: list[int] = []
    remaining = n
    while remaining > 0:
        r = draw()
        if remaining - r < lo:
            r = remaining
        out.append(r)
        remaining -= r
    return out


def gen_all_long_runs(spec: ClassSpec) -> Bits:
    _require(spec, ClassKind.ALL_LONG_RUNS)
    r0 = spec.long_run_min
    if spec.n < r0:
        raise InfeasibleSpec(f"n={spec.n} is shorter than one run of {r0}")
    rng = _rng(spec.seed, _TAG[ClassKind.ALL_LONG_RUNS])
    first = _uniform(rng, 0, 1)
    lengths = _fill(spec.n, r0, lambda: _uniform(rng, r0, 2 * r0))
    s = spec.short_runs
    if s:
        interior = len(lengths) - 2
        if r0 < 2 or interior < s:
            raise InfeasibleSpec(f"no room for {s} short runs among {len(lengths)} runs")
        picks = sorted(rng.choice(np.arange(1, len(lengths) - 1), size=s, replace=False).tolist())
        for i in picks:
            short = _uniform(rng, 1, r0 - 1)
            # the last run (never picked) absorbs the removed bits
            lengths[-1] += lengths[i] - short
            lengths[i] = short
    return _assemble(first, lengths)


def gen_long_one_runs(spec: ClassSpec) -> Bits:
    _require(spec, ClassKind.LONG_ONE_RUNS)
    t = spec.one_run_min
    if spec.n < t:
        raise InfeasibleSpec(f"n={spec.n} is shorter than one 1-run of {t}")
    rng = _rng(spec.seed, _TAG[ClassKind.LONG_ONE_RUNS])
    lengths: list[int] = []
    remaining = spec.n
    lead = _uniform(rng, 0, 1) == 1
    if lead:
        z = min(_uniform(rng, 1, 2 * t), remaining - t)
        if z >= 1:
            lengths.append(z)
            remaining -= z
        else:
            lead = False
    while True:
        r = _uniform(rng, t, 2 * t)
        if remaining - r < 1 + t:
            lengths.append(remaining)
            break
        lengths.append(r)
        remaining -= r
        z = min(_uniform(rng, 1, 2 * t), remaining - t)
        lengths.append(z)
        remaining -= z
    return _assemble(0 if lead else 1, lengths)


def _gap_lengths(spec: ClassSpec, rng: np.random.Generator) -> tuple[int, list[int]]:
    n = spec.n
    t1, smax, lmin = spec.one_run_min, spec.short_max, spec.long_min
    if smax < 1:
        raise InfeasibleSpec("short 0-run bound is below 1")

    def zero_run(cap: int) -> int:
        if rng.random() < spec.long_fraction:
            z = _uniform(rng, lmin, 2 * lmin)
            if z <= cap:
                return z
        return _uniform(rng, 1, min(smax, cap))

    if n < t1:
        if n <= smax or n >= lmin:
            return 0, [n]
        raise InfeasibleSpec(f"n={n} fits no 1-run of {t1} and lies inside the 0-run gap")
    lengths: list[int] = []
    remaining = n
    first = 1
    if rng.random() < 0.5 and remaining - t1 >= 1:
        z = zero_run(remaining - t1)
        lengths.append(z)
        remaining -= z
        first = 0
    while True:
        r = _uniform(rng, t1, 2 * t1)
        if remaining - r < 1 + t1:
            lengths.append(remaining)
            break
        lengths.append(r)
        remaining -= r
        z = zero_run(remaining - t1)
        lengths.append(z)
        remaining -= z
    return first, lengths


def gen_gap_class(spec: ClassSpec) -> Bits:
    """1-runs of at least ``one_run_min``; every 0-run short or long, never inside the gap.

    When ``n`` is below the 1-run minimum the only members are single 0-runs,
    which exist when ``n`` itself avoids the gap.
    """
    if spec.class_kind not in (ClassKind.GAP_CLASS, ClassKind.PERTURBED_GAP):
        raise ValueError(f"expected a GAP_CLASS spec, got {spec.class_kind.value}")
    rng = _rng(spec.seed, _TAG[ClassKind.GAP_CLASS])
    first, lengths = _gap_lengths(spec, rng)
    return _assemble(first, lengths)


def perturb_runs(y, spec: ClassSpec) -> tuple[Bits, tuple[tuple[int, ...], ...]]:
    """Flip at most ``flip_budget`` bits inside every run of ``y``.

    Returns the perturbed string and the flip log (absolute positions, one
    tuple per run of ``y``).
    """
    a = np.array(as_array(y), dtype=np.uint8)
    m = spec.flip_budget
    _, starts, lengths = run_table(a)
    rng = _rng(spec.seed, _TAG[ClassKind.PERTURBED_GAP])
    log: list[tuple[int, ...]] = []
    for s, ln in zip(starts.tolist(), lengths.tolist()):
        cap = min(m, ln)
        if spec.adversarial:
            pos = np.arange(s, s + cap)
        else:
            count = _uniform(rng, 0, cap)
            pos = s + np.sort(rng.choice(ln, size=count, replace=False))
        log.append(tuple(int(v) for v in pos))
        a[pos] ^= 1
    return Bits.from_array(a), tuple(log)


def _dense_layout(spec: ClassSpec, rng: np.random.Generator) -> list[tuple[int, int]]:
    imin = spec.interval_min
    if spec.n < imin:
        raise InfeasibleSpec(f"n={spec.n} is shorter than one interval of {imin}")
    lengths = _fill(spec.n, imin, lambda: _uniform(rng, imin, 2 * imin))
    first = _uniform(rng, 0, 1)
    return [(ln, (first + i) % 2) for i, ln in enumerate(lengths)]


def gen_dense_intervals(spec: ClassSpec) -> tuple[Bits, tuple[Interval, ...]]:
    """Intervals with alternating majority bits, each carrying a few minority bits."""
    _require(spec, ClassKind.DENSE_INTERVALS)
    rng = _rng(spec.seed, _TAG[ClassKind.DENSE_INTERVALS])
    out = np.empty(spec.n, dtype=np.uint8)
    layout: list[Interval] = []
    start = 0
    for ln, maj in _dense_layout(spec, rng):
        seg = np.full(ln, maj, dtype=np.uint8)
        minority = _uniform(rng, 0, floor_tol(spec.epsilon / 12 * ln))
        seg[rng.choice(ln, size=minority, replace=False)] = 1 - maj
        out[start:start + ln] = seg
        layout.append(Interval(start, ln, maj))
        start += ln
    return Bits.from_array(out), tuple(layout)


def gen_random(spec: ClassSpec) -> Bits:
    rng = _rng(spec.seed, _TAG[ClassKind.RANDOM])
    return Bits.from_array(rng.integers(0, 2, size=spec.n, dtype=np.uint8))


def gen_hard_pair(k: int) -> tuple[Bits, Bits]:
    if k < 1:
        raise ValueError("k must be >= 1")
    return Bits("01" * k + "1" + "01" * (k + 1)), Bits("01" * (k + 1) + "1" + "01" * k)


def block_length_for(epsilon: float) -> tuple[int, int]:
    """``(k, 4k + 3)`` with the largest ``k >= 1`` such that ``4k + 3 <= ceil(1/(128 eps))``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    target = ceil_tol(1.0 / (128.0 * epsilon))
    k = max(1, (target - 3) // 4)
    return k, 4 * k + 3


def gen_block_concat(n: int, epsilon: float, seed: int) -> tuple[Bits, BlockTruth]:
    k, lb = block_length_for(epsilon)
    if n < lb:
        raise InfeasibleSpec(f"n={n} is shorter than one block of {lb}")
    b = n // lb
    rng = _rng(seed, _BLOCK_TAG)
    picks = rng.integers(0, 2, size=b)
    truth = BlockTruth(lb, tuple("A" if v == 0 else "B" for v in picks.tolist()), k, n - b * lb)
    return truth.assemble(), truth


def gen_hamming_pair(k: int) -> tuple[Bits, Bits]:
    if k < 1:
        raise ValueError("k must be >= 1")
    x = "0" * k + "01" * k + "0" * (k + 1)
    y = "0" * (k + 1) + "01" * k + "0" * k
    return Bits(x), Bits(y)


def generate(spec: ClassSpec) -> Generated:
    """Dispatch on ``spec.class_kind`` and keep the metadata."""
    k = spec.class_kind
    if k is ClassKind.ALL_LONG_RUNS:
        return Generated(gen_all_long_runs(spec), spec)
    if k is ClassKind.LONG_ONE_RUNS:
        return Generated(gen_long_one_runs(spec), spec)
    if k is ClassKind.GAP_CLASS:
        return Generated(gen_gap_class(spec), spec)
    if k is ClassKind.PERTURBED_GAP:
        y = gen_gap_class(spec)
        x, log = perturb_runs(y, spec)
        return Generated(x, spec, base=y, flip_log=log)
    if k is ClassKind.DENSE_INTERVALS:
        x, layout = gen_dense_intervals(spec)
        return Generated(x, spec, layout=layout)
    return Generated(gen_random(spec), spec)


# -- validation ---------------------------------------------------------------

def _first(mask: np.ndarray) -> int | None:
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size else None


def _check_gap(values, lengths, spec: ClassSpec) -> tuple[int | None, str]:
    ones = values == 1
    bad = _first(ones & (lengths < spec.one_run_min))
    if bad is not None:
        return bad, f"1-run of length {lengths[bad]} below {spec.one_run_min}"
    inside = (~ones) & (lengths > spec.short_max) & (lengths < spec.long_min)
    bad = _first(inside)
    if bad is not None:
        return bad, f"0-run of length {lengths[bad]} inside the gap [{spec.short_max + 1}, {spec.long_min - 1}]"
    return None, ""


@njit(cache=True)
def _dense_partition_exists(a, imin, eps12):
    n = a.shape[0]
    pre = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        pre[i + 1] = pre[i] + a[i]
    reach = np.zeros(n + 1, dtype=np.bool_)
    reach[0] = True
    for j in range(imin, n + 1):
        for i in range(j - imin, -1, -1):
            if not reach[i]:
                continue
            ln = j - i
            ones = pre[j] - pre[i]
            minority = min(ones, ln - ones)
            if minority <= eps12 * ln + 1e-9:
                reach[j] = True
                break
    return reach[n]


def _check_dense(a, spec: ClassSpec, layout) -> tuple[int | None, str]:
    imin = spec.interval_min
    thr = spec.epsilon / 12
    if layout is None:
        if not _dense_partition_exists(a, imin, thr):
            return 0, "no split into dense intervals exists"
        return None, ""
    pos = 0
    for idx, iv in enumerate(layout):
        if iv.start != pos:
            return idx, f"interval {idx} starts at {iv.start}, expected {pos}"
        if iv.length < imin:
            return idx, f"interval {idx} has length {iv.length} below {imin}"
        seg = a[iv.start:iv.start + iv.length]
        minority = int(np.count_nonzero(seg != iv.majority))
        if minority > thr * iv.length + _TOL:
            return idx, f"interval {idx} has {minority} minority bits, over {thr * iv.length:.3f}"
        pos += iv.length
    if pos != a.size:
        return len(layout), f"layout covers {pos} bits, string has {a.size}"
    return None, ""


def validate_class(x, spec: ClassSpec, *, layout=None, flip_log=None) -> Diagnostics:
    """Check the premises of ``spec.class_kind`` and point at the first violation."""
    a = as_array(x)
    kind = spec.class_kind

    def fail(index, message, **detail):
        return Diagnostics(False, kind, message, index, detail)

    if a.size != spec.n:
        return fail(None, f"length {a.size} differs from n={spec.n}")
    values, _, lengths = run_table(a)

    if kind is ClassKind.ALL_LONG_RUNS:
        short = np.flatnonzero(lengths < spec.long_run_min)
        if short.size > spec.short_runs:
            i = int(short[spec.short_runs])
            return fail(i, f"run {i} has length {lengths[i]} below {spec.long_run_min}")
    elif kind is ClassKind.LONG_ONE_RUNS:
        bad = _first((values == 1) & (lengths < spec.one_run_min))
        if bad is not None:
            return fail(bad, f"1-run {bad} has length {lengths[bad]} below {spec.one_run_min}")
    elif kind is ClassKind.GAP_CLASS:
        bad, msg = _check_gap(values, lengths, spec)
        if bad is not None:
            return fail(bad, f"run {bad}: {msg}")
    elif kind is ClassKind.PERTURBED_GAP:
        if flip_log is None:
            return fail(None, "PERTURBED_GAP membership cannot be decided from the string alone; the flip log is required")
        y = np.array(a, dtype=np.uint8)
        for flips in flip_log:
            y[list(flips)] ^= 1
        yv, ys, yl = run_table(y)
        if len(flip_log) != yv.size:
            return fail(None, f"flip log has {len(flip_log)} entries, base string has {yv.size} runs")
        for i, (flips, s, ln) in enumerate(zip(flip_log, ys.tolist(), yl.tolist())):
            if len(flips) > spec.flip_budget:
                return fail(i, f"run {i} has {len(flips)} flips, budget {spec.flip_budget}")
            if any(not s <= f < s + ln for f in flips):
                return fail(i, f"run {i} has a flip outside its span")
        bad, msg = _check_gap(yv, yl, spec)
        if bad is not None:
            return fail(bad, f"base run {bad}: {msg}")
    elif kind is ClassKind.DENSE_INTERVALS:
        bad, msg = _check_dense(a, spec, layout)
        if bad is not None:
            return fail(bad, msg)
    return Diagnostics(True, kind, "ok")
