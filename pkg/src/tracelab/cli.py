"""Command-line entry point: ``tracelab <subcommand> ...``.

Strings travel as text, one ASCII ``0``/``1`` string per line.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .bits import Bits, decode_lines, encode_lines
from .channel import ChannelParams, derive_seed, sample_traces
from .classes import ClassKind, ClassSpec, gen_hamming_pair, gen_hard_pair, generate
from .distance import edit_distance
from .distinguish import LikelihoodModel, traces_to_distinguish
from .harness import ConfigError, read_csv, run_config_file, summarize
from .reconstruct import ALGORITHMS, GapParams, recon_gap, recon_gap_robust, recon_long_runs
from .reconstruct import recon_long_runs_robust, recon_majority, recon_one_runs

log = logging.getLogger("tracelab")


def _seed(arg: int | None) -> int:
    env = os.environ.get("TRACELAB_SEED")
    if env is not None:
        return int(env, 0)
    return 0 if arg is None else arg


def _dump(obj, path: str | None, fallback=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        (fallback or sys.stderr).write(text)


def _read_input(path: str | None) -> list[Bits]:
    text = Path(path).read_text() if path else sys.stdin.read()
    return decode_lines(text)


def cmd_generate(args) -> int:
    spec = ClassSpec(ClassKind(args.cls), args.n, args.epsilon, args.cprime, args.q, _seed(args.seed),
                     long_fraction=args.long_fraction, short_runs=args.short_runs, adversarial=args.adversarial)
    g = generate(spec)
    text = encode_lines([g.bits])
    if args.out:
        Path(args.out).write_text(text)
        meta_path = args.meta or f"{args.out}.meta.json"
    else:
        sys.stdout.write(text)
        meta_path = args.meta
    _dump(g.metadata(), meta_path)
    return 0


def cmd_corrupt(args) -> int:
    seed = _seed(args.seed)
    out = []
    for line, x in enumerate(_read_input(args.input)):
        out += sample_traces(x, ChannelParams(args.q, derive_seed(seed, line)), args.traces)
    sys.stdout.write(encode_lines(out))
    return 0


def cmd_reconstruct(args) -> int:
    traces = _read_input(args.input)
    if not traces:
        raise ConfigError("no traces on input")
    p = 1.0 - args.q
    if args.algo in ("gap", "gap-robust", "oneruns", "majority") and args.n is None:
        raise ConfigError(f"--n is required for {args.algo}")
    if args.algo == "longruns":
        rep = recon_long_runs(traces, p)
    elif args.algo == "longruns-robust":
        rep = recon_long_runs_robust(traces, args.s, p)
    elif args.algo == "oneruns":
        rep = recon_one_runs(traces[0], args.epsilon, p, args.q, args.n)
    elif args.algo == "majority":
        rep = recon_majority(traces[0], args.epsilon, p, args.q, args.n)
    else:
        kind = ClassKind.GAP_CLASS if args.algo == "gap" else ClassKind.PERTURBED_GAP
        cp = args.cprime if args.cprime is not None else ClassSpec(kind, args.n, args.epsilon, None, args.q).cp
        params = GapParams.derive(args.n, args.epsilon, cp, args.q)
        rep = (recon_gap if args.algo == "gap" else recon_gap_robust)(traces, params)
    sys.stdout.write(encode_lines([rep.output]))
    _dump({"algo": args.algo, **rep.to_dict()}, args.report)
    return 0


def cmd_evaluate(args) -> int:
    a = decode_lines(Path(args.first).read_text())
    b = decode_lines(Path(args.second).read_text())
    if len(a) != len(b):
        raise ConfigError(f"{args.first} has {len(a)} strings, {args.second} has {len(b)}")
    rows = []
    for i, (x, y) in enumerate(zip(a, b)):
        d = edit_distance(x, y)
        n = max(len(y), 1)
        row = {"line": i, "edit_distance": d, "normalized_error": d / n}
        if args.epsilon is not None:
            row["within_budget"] = d <= args.epsilon * len(y)
        rows.append(row)
    _dump({"pairs": rows}, None, sys.stdout)
    return 0


def cmd_sweep(args) -> int:
    outcome = run_config_file(args.config, args.out_dir, args.workers)
    for g in outcome.summary["groups"]:
        print(f"{g['class']:<16} {g['algo']:<16} success {g['successes']}/{g['trials']} "
              f"({g['success_rate']:.3f})  mean err {g['mean_normalized_error']:.4f}")
    print(f"results: {outcome.csv_path}")
    print(f"summary: {outcome.summary_path}")
    return 0


def _pair(spec: str, args) -> tuple[Bits, Bits]:
    kind, _, val = spec.partition(":")
    if kind == "hard":
        return gen_hard_pair(int(val))
    if kind == "hamming":
        return gen_hamming_pair(int(val))
    if kind == "files":
        if not (args.a and args.b):
            raise ConfigError("--pair files needs --a and --b")
        return decode_lines(Path(args.a).read_text())[0], decode_lines(Path(args.b).read_text())[0]
    raise ConfigError(f"unknown pair spec {spec!r}")


def cmd_distinguish(args) -> int:
    a, b = _pair(args.pair, args)
    model = LikelihoodModel(a, b, args.q)
    res = traces_to_distinguish(model, args.target, args.trials, _seed(args.seed), args.t_cap)
    _dump({"pair": args.pair, "a": a.to_text(), "b": b.to_text(), **res.to_dict()}, None, sys.stdout)
    return 0


def cmd_summarize(args) -> int:
    rows = read_csv(args.csv)
    class_of = None
    side = Path(args.config or f"{args.csv}.config.json")
    if side.exists():
        class_of = {c["cell_id"]: c["class_kind"] for c in json.loads(side.read_text())["cells"]}
    _dump(summarize(rows, class_of), args.out, sys.stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tracelab", description="Approximate trace reconstruction toolkit.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a member of a string class")
    g.add_argument("--class", dest="cls", required=True, choices=[k.value for k in ClassKind])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--epsilon", type=float, required=True)
    g.add_argument("--cprime", type=float, default=None)
    g.add_argument("--q", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--long-fraction", type=float, default=0.5)
    g.add_argument("--short-runs", type=int, default=0)
    g.add_argument("--adversarial", action="store_true")
    g.add_argument("--out", help="write the string here instead of stdout")
    g.add_argument("--meta", help="metadata JSON path (default: <out>.meta.json, or stderr)")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("corrupt", help="pass strings through the deletion channel")
    c.add_argument("--q", type=float, required=True)
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--traces", type=int, default=1)
    c.add_argument("--input", help="read strings from a file instead of stdin")
    c.set_defaults(func=cmd_corrupt)

    r = sub.add_parser("reconstruct", help="reconstruct from traces on stdin")
    r.add_argument("--algo", required=True, choices=ALGORITHMS)
    r.add_argument("--epsilon", type=float, required=True)
    r.add_argument("--cprime", type=float, default=None)
    r.add_argument("--q", type=float, required=True)
    r.add_argument("--n", type=int, default=None)
    r.add_argument("--s", type=int, default=0, help="short runs tolerated by longruns-robust")
    r.add_argument("--input")
    r.add_argument("--report", help="report JSON path (default stderr)")
    r.set_defaults(func=cmd_reconstruct)

    e = sub.add_parser("evaluate", help="edit distance between matching lines of two files")
    e.add_argument("first")
    e.add_argument("second", help="reference strings; normalisation uses their length")
    e.add_argument("--epsilon", type=float, default=None)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="run a JSON experiment config")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", default=None)
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("distinguish", help="traces needed by the ML test for a pair of strings")
    d.add_argument("--pair", required=True, help="hard:k | hamming:k | files")
    d.add_argument("--a")
    d.add_argument("--b")
    d.add_argument("--q", type=float, default=0.5)
    d.add_argument("--target", type=float, default=5 / 8)
    d.add_argument("--trials", type=int, default=2000)
    d.add_argument("--seed", type=int, default=None)
    d.add_argument("--t-cap", type=int, default=256)
    d.set_defaults(func=cmd_distinguish)

    m = sub.add_parser("summarize", help="aggregate a results CSV")
    m.add_argument("csv")
    m.add_argument("--config", help="config echo (default <csv>.config.json when present)")
    m.add_argument("--out")
    m.set_defaults(func=cmd_summarize)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"tracelab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"tracelab {args.command}: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
