import json
import logging

import pytest

from tracelab import harness
from tracelab.channel import ChannelParams, sample_traces
from tracelab.classes import ClassKind, ClassSpec, gen_gap_class
from tracelab.harness import (CSV_HEADER, ConfigError, ExperimentConfig, TrialRecord, expand_cells, parse_csv,
                              records_to_csv, run_config_file, run_sweep, run_trial, summarize, verify_distance)
from tracelab.reconstruct import GapParams, recon_gap


def _cfg(**kw):
    base = dict(algo="longruns", n=4096, epsilon=0.25, trials=3, master_seed=11)
    return ExperimentConfig(**{**base, **kw})


def test_csv_header_bit_exact():
    assert ",".join(CSV_HEADER) == \
        "cell_id,n,epsilon,q,algo,T,trial,seed,status,edit_distance,normalized_error,wall_ms"
    assert records_to_csv([]).splitlines() == [",".join(CSV_HEADER)]


def test_noiseless_gap_pipeline_is_exact():
    spec = ClassSpec(ClassKind.GAP_CLASS, 4096, 0.25, c_prime=1.0, seed=6, long_fraction=1.0)
    x = gen_gap_class(spec)
    traces = sample_traces(x, ChannelParams(0.0, 1, allow_degenerate=True), 3)
    rep = recon_gap(traces, GapParams.derive(4096, 0.25, 1.0, 0.5, p=1.0))
    assert verify_distance(rep.output, x, 0.25) == 0


def test_verify_distance_escalates_past_band():
    assert verify_distance("1" * 100, "0" * 100, 0.01) == 100


def test_run_trial_deterministic():
    cfg = _cfg()
    assert run_trial(cfg, 2, 5) == run_trial(cfg, 2, 5)
    assert run_trial(cfg, 2, 5).seed != run_trial(cfg, 3, 5).seed
    r = run_trial(cfg, 0)
    assert r.T == cfg.trace_count() and r.status == "OK" and r.success
    assert r.wall_ms is None
    assert run_trial(_cfg(record_wall_time=True), 0).wall_ms is not None


@pytest.mark.parametrize("algo", ["longruns", "longruns-robust", "oneruns", "majority"])
def test_each_algorithm_runs(algo):
    cp = 1.0 if algo in ("oneruns", "majority") else None
    r = run_trial(_cfg(algo=algo, c_prime=cp, T=None if algo != "longruns-robust" else 400), 0)
    assert r.status == "OK"
    # majority at this n has one window wider than the trace, so its output can outgrow n
    assert r.normalized_error >= 0 and (algo == "majority" or r.normalized_error <= 1)


def test_gap_algorithms_run():
    r = run_trial(_cfg(algo="gap", c_prime=200.0, n=2 ** 14), 0)
    assert r.status == "OK"
    r = run_trial(_cfg(algo="gap-robust", c_prime=200.0, n=2 ** 14, epsilon=0.15), 0)
    assert r.status in ("OK", "ALL_ZERO_FALLBACK", "COUNT_MISMATCH_FAIL")


def test_trial_error_becomes_record(monkeypatch):
    def boom(spec):
        raise RuntimeError("generator exploded")

    monkeypatch.setattr(harness, "generate", boom)
    r = run_trial(_cfg(), 0)
    assert r.status == "ERROR" and r.edit_distance == 4096 and "exploded" in r.error
    assert not r.success


def test_config_validation():
    for bad in (dict(algo="nope"), dict(n=1), dict(epsilon=1.5), dict(q=0.99), dict(T=0), dict(trials=0),
                dict(c_prime=-1.0)):
        with pytest.raises(ConfigError):
            _cfg(**bad)
    with pytest.raises(ConfigError):
        _cfg(algo="gap-robust", epsilon=0.5, c_prime=200.0)


def test_trace_count_resolution():
    # 2 / (p eps^2) * log n = 2 / (0.5 * 0.0625) * 12
    assert _cfg().trace_count() == 768
    assert _cfg(algo="longruns-robust", s=2).trace_count() == 768 * 4
    assert _cfg(T=7).trace_count() == 7
    assert _cfg(algo="majority").trace_count() == 1
    res = _cfg(algo="gap", c_prime=200.0).resolved()
    assert {"T", "L", "m", "a", "G_bar"} <= set(res["gap_params"])
    assert res["T_resolved"] == res["gap_params"]["T"]


def test_expand_cells_grid_and_explicit():
    doc = {"master_seed": 3, "base": {"trials": 2, "epsilon": 0.25},
           "grid": {"algo": ["longruns", "oneruns"], "n": [2048, 4096]},
           "cells": [{"algo": "majority", "n": 4096}]}
    cells = expand_cells(doc)
    assert len(cells) == 5
    assert [c.algo for c in cells] == ["longruns", "longruns", "oneruns", "oneruns", "majority"]
    assert all(c.master_seed == 3 for c in cells)
    with pytest.raises(ConfigError):
        expand_cells({"grid": {"colour": [1]}})
    with pytest.raises(ConfigError):
        expand_cells({"cells": [{"algo": "longruns", "n": 4096, "epsilon": 0.25, "bogus": 1}]})
    with pytest.raises(ConfigError):
        expand_cells({})


def test_seed_env_override(monkeypatch):
    monkeypatch.setenv("TRACELAB_SEED", "99")
    cells = expand_cells({"master_seed": 1, "cells": [{"algo": "longruns", "n": 4096, "epsilon": 0.25}]})
    assert cells[0].master_seed == 99
    monkeypatch.setenv("TRACELAB_SEED", "x")
    with pytest.raises(ConfigError):
        expand_cells({"cells": [{"algo": "longruns", "n": 4096, "epsilon": 0.25}]})


def test_sweep_order_and_parallel_equivalence():
    cells = [_cfg(trials=5), _cfg(algo="oneruns", trials=6)]
    serial = run_sweep(cells, workers=1, chunk=2)
    assert len(serial) == 11
    assert [(r.cell_id, r.trial) for r in serial] == [(0, t) for t in range(5)] + [(1, t) for t in range(6)]
    assert records_to_csv(run_sweep(cells, workers=2, chunk=3)) == records_to_csv(serial)
    single = run_sweep([cells[0]])
    assert single == [run_trial(cells[0], t, 0) for t in range(5)]


def test_csv_round_trip():
    recs = run_sweep([_cfg(trials=2)])
    rows = parse_csv(records_to_csv(recs))
    assert [r["seed"] for r in rows] == [r.seed for r in recs]
    assert rows[0]["wall_ms"] is None
    with pytest.raises(ValueError):
        parse_csv("a,b\n1,2\n")


def _row(cell, status, dist, n=100, eps=0.25, algo="longruns"):
    return {"cell_id": cell, "n": n, "epsilon": eps, "q": 0.5, "algo": algo, "T": 1, "trial": 0, "seed": 0,
            "status": status, "edit_distance": dist, "normalized_error": dist / n}


def test_summarize_rates(caplog):
    s = summarize([_row(0, "OK", 1), _row(0, "OK", 2)])
    assert s["groups"][0]["success_rate"] == 1.0
    rows = [_row(0, "OK", 1), _row(0, "OK", 90), _row(0, "COUNT_MISMATCH_FAIL", 100), _row(0, "ALL_ZERO_FALLBACK", 3)]
    g = summarize(rows)["groups"][0]
    assert g["successes"] == 2 and g["success_rate"] == 0.5
    assert g["status_counts"] == {"ALL_ZERO_FALLBACK": 1, "COUNT_MISMATCH_FAIL": 1, "OK": 2}
    assert g["max_normalized_error"] == 1.0
    lo, hi = g["ci95"]
    assert lo < 0.5 < hi
    with caplog.at_level(logging.WARNING):
        out = summarize([_row(0, "OK", 1)], expected=[0, 1])
    assert [c["cell_id"] for c in out["cells"]] == [0]
    assert "cell 1 has no trials" in caplog.text
    with pytest.raises(ValueError):
        summarize([])


def test_run_config_file(tmp_path):
    cfg = tmp_path / "mini.json"
    cfg.write_text(json.dumps({"name": "mini", "master_seed": 5, "base": {"trials": 2, "epsilon": 0.25},
                               "cells": [{"algo": "longruns", "n": 2048}, {"algo": "gap", "n": 4096,
                                                                          "c_prime": 1.0}]}))
    out = run_config_file(cfg, tmp_path / "out")
    assert out.csv_path.read_text().startswith(",".join(CSV_HEADER) + "\n")
    assert len(out.csv_path.read_text().splitlines()) == 1 + 4
    echo = json.loads(out.config_path.read_text())
    assert echo["cells"][1]["gap_params"]["G_bar"] > 0
    assert echo["source"]["name"] == "mini"
    summary = json.loads(out.summary_path.read_text())
    assert {g["algo"] for g in summary["groups"]} == {"longruns", "gap"}
    assert "ERROR" not in out.csv_path.read_text()
    again = run_config_file(cfg, tmp_path / "again", workers=2)
    assert again.csv_path.read_bytes() == out.csv_path.read_bytes()


def test_bad_config_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        run_config_file(p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        run_config_file(p)


def test_record_success_rule():
    rec = TrialRecord(0, 100, 0.25, 0.5, "gap", 1, 0, 0, "OK", 25, 0.25)
    assert rec.success
    assert not TrialRecord(0, 100, 0.25, 0.5, "gap", 1, 0, 0, "OK", 26, 0.26).success
    assert not TrialRecord(0, 100, 0.25, 0.5, "gap", 1, 0, 0, "COUNT_MISMATCH_FAIL", 0, 0.0).success
