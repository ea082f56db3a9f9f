"""Experiment orchestration: generate, corrupt, reconstruct, verify, persist.

Every random choice in a trial flows from ``derive_seed(master_seed, cell,
trial)``, so records do not depend on worker count or scheduling order.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

from .channel import ChannelParams, derive_seed, sample_traces
from .classes import ClassKind, ClassSpec, generate
from .distance import edit_distance, edit_distance_banded
from .distinguish import wilson_interval
from .reconstruct import (
    ALGORITHMS,
    GapParams,
    Status,
    recon_gap,
    recon_gap_robust,
    recon_long_runs,
    recon_long_runs_robust,
    recon_majority,
    recon_one_runs,
    trace_count,
)

__all__ = [
    "CSV_HEADER",
    "DEFAULT_CLASS",
    "ExperimentConfig",
    "TrialRecord",
    "ConfigError",
    "run_trial",
    "expand_cells",
    "run_sweep",
    "records_to_csv",
    "read_csv",
    "parse_csv",
    "summarize",
    "load_sweep",
    "run_config_file",
    "is_success",
]

log = logging.getLogger(__name__)

CSV_HEADER = (
    "cell_id", "n", "epsilon", "q", "algo", "T", "trial", "seed",
    "status", "edit_distance", "normalized_error", "wall_ms",
)

DEFAULT_CLASS = {
    "longruns": ClassKind.ALL_LONG_RUNS,
    "longruns-robust": ClassKind.ALL_LONG_RUNS,
    "oneruns": ClassKind.LONG_ONE_RUNS,
    "gap": ClassKind.GAP_CLASS,
    "gap-robust": ClassKind.PERTURBED_GAP,
    "majority": ClassKind.DENSE_INTERVALS,
}

ERROR = "ERROR"
# statuses whose output counts as an answer; the fallback is a prescribed output, not a refusal
_ANSWER = {Status.OK.value, Status.ALL_ZERO_FALLBACK.value}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep cell.  ``T=None`` means the trace count prescribed for ``algo``."""

    algo: str
    n: int
    epsilon: float
    q: float = 0.5
    c_prime: float | None = None
    class_kind: str | None = None
    T: int | None = None
    trials: int = 100
    master_seed: int = 0
    s: int = 2
    long_fraction: float = 0.5
    adversarial: bool = False
    record_wall_time: bool = False

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ConfigError(f"unknown algo {self.algo!r}; choose from {', '.join(ALGORITHMS)}")
        if not isinstance(self.n, int) or self.n < 2:
            raise ConfigError("n must be an integer >= 2")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1)")
        try:
            ChannelParams(self.q)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.T is not None and (not isinstance(self.T, int) or self.T < 1):
            raise ConfigError("T must be a positive integer or null")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.s < 0:
            raise ConfigError("s must be >= 0")
        if self.c_prime is not None and self.c_prime <= 0:
            raise ConfigError("c_prime must be positive")
        kind = ClassKind(self.class_kind) if self.class_kind else DEFAULT_CLASS[self.algo]
        object.__setattr__(self, "class_kind", kind.value)
        try:
            self.spec(0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.algo == "gap-robust":
            g = self.gap_params()
            if g.a <= 3 * g.m:
                raise ConfigError(f"gap-robust needs a > 3m, got a={g.a}, m={g.m}")

    @property
    def p(self) -> float:
        return 1.0 - self.q

    def spec(self, seed: int) -> ClassSpec:
        short = self.s if self.algo == "longruns-robust" else 0
        return ClassSpec(
            ClassKind(self.class_kind), self.n, self.epsilon, self.c_prime, self.q, seed,
            long_fraction=self.long_fraction, short_runs=short, adversarial=self.adversarial,
        )

    def gap_params(self) -> GapParams:
        return GapParams.derive(self.n, self.epsilon, self.spec(0).cp, self.q)

    def trace_count(self) -> int:
        if self.T is not None:
            return self.T
        if self.algo == "longruns":
            return trace_count(self.epsilon, self.p, self.q, self.n, "LONGRUNS")
        if self.algo == "longruns-robust":
            base = trace_count(self.epsilon, self.p, self.q, self.n, "LONGRUNS")
            return math.ceil(base * (1.0 / self.p) ** self.s - 1e-9)
        if self.algo in ("gap", "gap-robust"):
            return self.gap_params().T
        return 1

    def resolved(self) -> dict:
        """Config plus every derived quantity, as echoed next to the results."""
        d = asdict(self)
        sp = self.spec(0)
        d["c_prime"] = sp.cp
        d["p"] = self.p
        d["T_resolved"] = self.trace_count()
        d["T_source"] = "override" if self.T is not None else "formula"
        d["class_thresholds"] = sp.thresholds()
        if self.algo in ("gap", "gap-robust"):
            d["gap_params"] = self.gap_params().to_dict()
        return d


@dataclass(frozen=True)
class TrialRecord:
    cell_id: int
    n: int
    epsilon: float
    q: float
    algo: str
    T: int
    trial: int
    seed: int
    status: str
    edit_distance: int
    normalized_error: float
    wall_ms: float | None = None
    traces_used: int = 0
    error: str = ""

    @property
    def success(self) -> bool:
        return is_success(self.status, self.edit_distance, self.epsilon, self.n)

    def csv_row(self) -> list[str]:
        return [
            str(self.cell_id), str(self.n), repr(float(self.epsilon)), repr(float(self.q)), self.algo,
            str(self.T), str(self.trial), str(self.seed), self.status, str(self.edit_distance),
            repr(float(self.normalized_error)),
            "" if self.wall_ms is None else f"{self.wall_ms:.3f}",
        ]


def is_success(status: str, dist: int, epsilon: float, n: int) -> bool:
    return status in _ANSWER and dist <= epsilon * n


def _reconstruct(cfg: ExperimentConfig, traces):
    p = cfg.p
    if cfg.algo == "longruns":
        return recon_long_runs(traces, p)
    if cfg.algo == "longruns-robust":
        return recon_long_runs_robust(traces, cfg.s, p)
    if cfg.algo == "oneruns":
        return recon_one_runs(traces[0], cfg.epsilon, p, cfg.q, cfg.n)
    if cfg.algo == "gap":
        return recon_gap(traces, cfg.gap_params())
    if cfg.algo == "gap-robust":
        return recon_gap_robust(traces, cfg.gap_params())
    return recon_majority(traces[0], cfg.epsilon, p, cfg.q, cfg.n)


def verify_distance(output, source, epsilon: float) -> int:
    """Banded check at ``2 ceil(eps n)``, falling back to the exact distance."""
    band = max(1, 2 * math.ceil(epsilon * len(source) - 1e-9))
    d = edit_distance_banded(output, source, band)
    return edit_distance(output, source) if d is None else d


def run_trial(cfg: ExperimentConfig, trial: int, cell_id: int = 0) -> TrialRecord:
    """Generate, corrupt, reconstruct and score one trial; failures become records."""
    seed = derive_seed(cfg.master_seed, cell_id, trial)
    t_count = cfg.trace_count()
    start = time.perf_counter()
    try:
        source = generate(cfg.spec(seed)).bits
        traces = sample_traces(source, ChannelParams(cfg.q, seed), t_count)
        report = _reconstruct(cfg, traces)
        if report.status is Status.COUNT_MISMATCH_FAIL:
            dist = cfg.n
        else:
            dist = verify_distance(report.output, source, cfg.epsilon)
        status, used, err = report.status.value, report.traces_used, ""
    except Exception as exc:  # a broken trial must not abort the sweep
        log.warning("trial %d of cell %d failed: %s", trial, cell_id, exc)
        status, dist, used, err = ERROR, cfg.n, 0, f"{type(exc).__name__}: {exc}"
    wall = (time.perf_counter() - start) * 1000 if cfg.record_wall_time else None
    return TrialRecord(cell_id, cfg.n, cfg.epsilon, cfg.q, cfg.algo, t_count, trial, seed,
                       status, int(dist), dist / cfg.n, wall, used, err)


# -- sweeps -----------------------------------------------------------------------

_CFG_FIELDS = {f.name for f in fields(ExperimentConfig)}
_GRID_AXES = ("algo", "n", "epsilon", "T", "q")


def expand_cells(doc: dict) -> list[ExperimentConfig]:
    """Cells from a sweep document: the ``grid`` cross product over ``base``, then explicit ``cells``."""
    top = {k: v for k, v in doc.items() if k in _CFG_FIELDS}
    base = {**top, **doc.get("base", {})}
    seed_env = os.environ.get("TRACELAB_SEED")
    if seed_env is not None:
        try:
            base["master_seed"] = int(seed_env, 0)
        except ValueError:
            raise ConfigError(f"TRACELAB_SEED={seed_env!r} is not an integer") from None
    raw: list[dict] = []
    grid = doc.get("grid")
    if grid:
        unknown = set(grid) - set(_GRID_AXES)
        if unknown:
            raise ConfigError(f"unknown grid axes: {sorted(unknown)}")
        axes = [a for a in _GRID_AXES if a in grid]
        for combo in itertools.product(*(grid[a] for a in axes)):
            raw.append({**base, **dict(zip(axes, combo))})
    for c in doc.get("cells", []):
        raw.append({**base, **c})
    if not raw:
        raise ConfigError("the sweep defines no cells")
    cells = []
    for i, d in enumerate(raw):
        extra = set(d) - _CFG_FIELDS
        if extra:
            raise ConfigError(f"cell {i}: unknown keys {sorted(extra)}")
        try:
            cells.append(ExperimentConfig(**d))
        except TypeError as exc:
            raise ConfigError(f"cell {i}: {exc}") from None
    return cells


def _run_chunk(job: tuple[ExperimentConfig, int, list[int]]) -> list[TrialRecord]:
    cfg, cell_id, trials = job
    return [run_trial(cfg, t, cell_id) for t in trials]


def run_sweep(cells: Sequence[ExperimentConfig], workers: int = 1, chunk: int = 4) -> list[TrialRecord]:
    """All trials of all cells, sorted by ``(cell_id, trial)`` whatever the worker count."""
    if not cells:
        raise ConfigError("empty grid")
    jobs = []
    for cid, cfg in enumerate(cells):
        idx = list(range(cfg.trials))
        jobs += [(cfg, cid, idx[i:i + chunk]) for i in range(0, len(idx), chunk)]
    if workers <= 1:
        parts = map(_run_chunk, jobs)
        records = [r for part in parts for r in part]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = [r for part in pool.map(_run_chunk, jobs) for r in part]
    records.sort(key=lambda r: (r.cell_id, r.trial))
    return records


def records_to_csv(records: Iterable[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    return parse_csv(Path(path).read_text())


def parse_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and tuple(rows[0].keys()) != CSV_HEADER:
        raise ValueError("CSV header does not match the result schema")
    out = []
    for r in rows:
        out.append({
            "cell_id": int(r["cell_id"]), "n": int(r["n"]), "epsilon": float(r["epsilon"]),
            "q": float(r["q"]), "algo": r["algo"], "T": int(r["T"]), "trial": int(r["trial"]),
            "seed": int(r["seed"]), "status": r["status"], "edit_distance": int(r["edit_distance"]),
            "normalized_error": float(r["normalized_error"]),
            "wall_ms": float(r["wall_ms"]) if r["wall_ms"] else None,
        })
    return out


def _as_row(r) -> dict:
    return asdict(r) if isinstance(r, TrialRecord) else dict(r)


def summarize(records: Iterable, class_of: dict[int, str] | None = None,
              expected: Sequence[int] | None = None) -> dict:
    """Per ``(class, algo)`` and per cell: success rate, Wilson 95% CI, error stats, statuses.

    Cells listed in ``expected`` that have no rows are skipped with a warning.
    """
    rows = [_as_row(r) for r in records]
    if not rows and not expected:
        raise ValueError("empty result table")
    class_of = class_of or {}

    def cls(row):
        return class_of.get(row["cell_id"], DEFAULT_CLASS[row["algo"]].value if row["algo"] in DEFAULT_CLASS else "?")

    def block(group: list[dict]) -> dict:
        wins = sum(is_success(g["status"], g["edit_distance"], g["epsilon"], g["n"]) for g in group)
        lo, hi = wilson_interval(wins, len(group))
        errs = [g["normalized_error"] for g in group]
        statuses: dict[str, int] = {}
        for g in group:
            statuses[g["status"]] = statuses.get(g["status"], 0) + 1
        return {
            "trials": len(group), "successes": wins, "success_rate": wins / len(group),
            "ci95": [lo, hi], "mean_normalized_error": sum(errs) / len(errs),
            "max_normalized_error": max(errs), "status_counts": dict(sorted(statuses.items())),
        }

    by_cell: dict[int, list[dict]] = {}
    by_pair: dict[tuple[str, str], list[dict]] = {}
    for r in rows:
        by_cell.setdefault(r["cell_id"], []).append(r)
        by_pair.setdefault((cls(r), r["algo"]), []).append(r)
    for cid in expected or ():
        if cid not in by_cell:
            log.warning("cell %d has no trials; omitted from the summary", cid)
    cells = []
    for cid in sorted(by_cell):
        g = by_cell[cid]
        head = g[0]
        cells.append({"cell_id": cid, "class": cls(head), "algo": head["algo"], "n": head["n"],
                      "epsilon": head["epsilon"], "q": head["q"], "T": head["T"], **block(g)})
    groups = [{"class": c, "algo": a, **block(g)} for (c, a), g in sorted(by_pair.items())]
    return {"groups": groups, "cells": cells}


# -- config files ---------------------------------------------------------------------

def load_sweep(path) -> tuple[dict, list[ExperimentConfig]]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc, expand_cells(doc)


@dataclass
class SweepOutcome:
    records: list[TrialRecord]
    summary: dict
    csv_path: Path
    summary_path: Path
    config_path: Path
    resolved: list[dict] = field(default_factory=list)


def run_config_file(path, out_dir=None, workers: int | None = None) -> SweepOutcome:
    """Run a JSON sweep file and write ``<name>.csv``, its config echo and a JSON summary."""
    doc, cells = load_sweep(path)
    out = Path(out_dir or doc.get("output_dir") or Path(path).parent)
    out.mkdir(parents=True, exist_ok=True)
    name = doc.get("name") or Path(path).stem
    nworkers = workers if workers is not None else int(doc.get("workers", 1))
    records = run_sweep(cells, workers=nworkers)
    resolved = [{"cell_id": i, **c.resolved()} for i, c in enumerate(cells)]
    summary = summarize(records, {i: c.class_kind for i, c in enumerate(cells)}, range(len(cells)))
    summary["config"] = resolved
    csv_path = out / f"{name}.csv"
    csv_path.write_text(records_to_csv(records))
    config_path = out / f"{name}.csv.config.json"
    config_path.write_text(json.dumps({"source": doc, "cells": resolved}, indent=2, sort_keys=True) + "\n")
    summary_path = out / f"{name}.summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return SweepOutcome(records, summary, csv_path, summary_path, config_path, resolved)


def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(cfg, master_seed=seed)
