"""``arranger-sim``: run scenarios, check transcripts, sweep seeds, benchmark."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .simnet.checkers import ARRANGER_PROPERTIES, CHECKERS, check
from .simnet.matrix import evaluate, judge, write_report
from .simnet.runner import run
from .simnet.scenario import ScenarioInvalid, load
from .transcript import Transcript

log = logging.getLogger("arranger")


def cmd_run(args) -> int:
    sc = load(args.scenario)
    if args.seed is not None:
        sc = sc.with_seed(args.seed)
    if args.wire_check:
        sc = replace(sc, wire_check=True)
    res = run(sc)
    row = judge(res)
    print(f"{sc.name} seed={row['seed']} ticks={row['ticks']} quiescent={row['quiescent']} accepted={row['accepted']}")
    for prop, v in row["verdicts"].items():
        want = sc.expect.get(prop)
        note = "" if want is None else f" [expected {want}]"
        print(v.line() + note)
    if args.transcript:
        res.transcript.dump(args.transcript)
        log.info("transcript written to %s", args.transcript)
    return 0 if row["as_expected"] else 1


def cmd_check(args) -> int:
    tr = Transcript.load(args.transcript)
    props = args.property or list(ARRANGER_PROPERTIES)
    ok = True
    for p in props:
        v = check(tr, p)
        print(v.line())
        ok &= v.ok
    return 0 if ok else 1


def cmd_sweep(args) -> int:
    paths = sorted(Path(args.directory).glob("*.yaml")) + sorted(Path(args.directory).glob("*.yml"))
    if not paths:
        print(f"no scenario files in {args.directory}", file=sys.stderr)
        return 2
    rows = []
    for path in paths:
        sc = load(path)
        for seed in range(args.first_seed, args.first_seed + args.seeds):
            row = evaluate(sc, seed)
            rows.append(row)
            if not row["as_expected"]:
                bad = [v.line() for v in row["verdicts"].values() if not v.ok]
                log.warning("%s seed %d unexpected: %s", sc.name, seed, "; ".join(bad) or "all passed")
    if args.report:
        with open(args.report, "w", newline="") as out:
            write_report(rows, out)
    unexpected = sum(not r["as_expected"] for r in rows)
    print(f"{len(rows)} runs over {len(paths)} scenarios, {unexpected} unexpected")
    return 0 if unexpected == 0 else 1


def cmd_bench(args) -> int:
    from .bench import BenchConfig, run_suite, write_csv, write_plot_json

    kw = {}
    if args.duration is not None:
        kw["duration"] = args.duration
    if args.repetitions is not None:
        kw["repetitions"] = args.repetitions
    if args.pairs is not None:
        kw["pairs"] = args.pairs
    if args.scheme:
        kw["scheme"] = args.scheme
    cfg = BenchConfig(**kw)
    report = run_suite(args.suite, cfg)
    with open(args.out, "w", newline="") as out:
        write_csv(report, out)
    if args.plot:
        with open(args.plot, "w") as out:
            write_plot_json(report, out)
    for r in report.rows:
        print(f"{r.experiment:16s} {r.parameter:>6d} {r.mean:>14.1f} {r.unit:<6s} cv={r.cv:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arranger-sim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario file and check its properties")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int)
    r.add_argument("--transcript", help="write the JSON-lines transcript here")
    r.add_argument("--wire-check", action="store_true", help="round-trip every message through its byte encoding")
    r.set_defaults(fn=cmd_run)

    c = sub.add_parser("check", help="evaluate properties over a saved transcript")
    c.add_argument("transcript")
    c.add_argument("--property", action="append", choices=sorted(CHECKERS), help="repeatable; default: the four arranger properties")
    c.set_defaults(fn=cmd_check)

    s = sub.add_parser("sweep", help="run every scenario in a directory under many seeds")
    s.add_argument("directory")
    s.add_argument("--seeds", type=int, default=10)
    s.add_argument("--first-seed", type=int, default=0)
    s.add_argument("--report", help="CSV report path")
    s.set_defaults(fn=cmd_sweep)

    b = sub.add_parser("bench", help="building-block benchmarks")
    b.add_argument("--suite", default="all", choices=["all", "size", "hash", "compress", "sign", "agg", "ver", "trans"])
    b.add_argument("--out", default="report.csv")
    b.add_argument("--plot", help="also write plot series as JSON")
    b.add_argument("--duration", type=float, help="seconds per measurement (default 1)")
    b.add_argument("--repetitions", type=int, help="repetitions per measurement (default 10)")
    b.add_argument("--pairs", type=int, help="hash-identifier pairs for sign/agg/ver (default 50)")
    b.add_argument("--scheme", choices=["bls", "ed25519-list"])
    b.set_defaults(fn=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except ScenarioInvalid as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
