"""Command-line front door: run, compare, validate."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from iotpoa import config, engine, experiments, ledger, metrics
from iotpoa.config import ConfigInvalid
from iotpoa.engine import Trace

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2
EXIT_IO = 3

OUT_ENV = "IOTPOA_OUT"

GRID_FIELDS = ["validators", "interval_s", "policy", "seeds", "mean_response_s",
               "p95_response_s", "throughput_bps", "validator_energy_j",
               "wsn_energy_j", "committed"]


def _err(msg: str) -> None:
    print(f"iotpoa: {msg}", file=sys.stderr)


def parse_seeds(text: str) -> list[int]:
    """'3' -> [3]; '1..10' -> [1..10]; '1,4,9' -> [1, 4, 9]."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo_i, hi_i = int(lo), int(hi)
        if hi_i < lo_i:
            raise ValueError(f"empty seed range {text!r}")
        return list(range(lo_i, hi_i + 1))
    return [int(s) for s in text.split(",") if s.strip()]


def _int_list(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip()]


def _float_list(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or "out")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _report_json(rep: metrics.MetricsReport) -> str:
    return json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n"


# -- run ------------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = config.load(args.scenario)
    over: dict = {"run": {}, "consensus": {}}
    if args.seed is not None:
        over["run"]["seed"] = args.seed
    if args.policy is not None:
        over["consensus"]["selection_policy"] = args.policy
    cfg = cfg.replace(**over)
    trace, sim = engine.run_with_state(cfg)
    rep = metrics.report(trace)
    out = _out_dir(args.out)
    trace.write(out / "trace.jsonl")
    _write(out / "report.json", _report_json(rep))
    chain = sim.state.validators[0].local_chain
    _write(out / "chain.ndjson", ledger.export_chain(chain))
    rt = rep.response_time
    mean = "n/a" if rt["mean"] is None else f"{rt['mean']:.3f} s"
    print(f"{cfg.name} policy={cfg.consensus.selection_policy} seed={cfg.run.seed}: "
          f"committed {rep.counts['committed']}/{rep.counts['created']}, "
          f"mean response {mean}, throughput {rep.throughput_bps:.2f} B/s, "
          f"validator energy {rep.energy_j['validators']:.4f} J -> {out}")
    return EXIT_OK


# -- compare --------------------------------------------------------------------

def _grid_rows(pairs: list[experiments.Pair], validators: int, interval: float) -> list[dict]:
    rows = []
    for policy in ("tbs", "wbs"):
        reps = [getattr(p, policy) for p in pairs]
        row = {"validators": validators, "interval_s": interval, "policy": policy,
               "seeds": len(reps)}
        for name, get, _ in metrics.METRICS:
            vals = [get(r) for r in reps if get(r) is not None]
            row[name] = sum(vals) / len(vals) if vals else None
        rows.append(row)
    return rows


def cmd_compare(args) -> int:
    base = config.load(args.scenario)
    seeds = parse_seeds(args.seeds)
    out = _out_dir(args.out)
    validators = _int_list(args.validators) if args.validators else [base.n_validators]
    intervals = (_float_list(args.intervals) if args.intervals
                 else [base.network.dissemination_interval_s])
    single = len(validators) == 1 and len(intervals) == 1
    grid: list[dict] = []
    for nv in validators:
        for iv in intervals:
            cfg = base.replace(validators={"validator_count": nv, "validator_ratio": None},
                               network={"dissemination_interval_s": iv})
            pairs = experiments.paired(cfg, seeds, args.jobs)
            cell = out if single else out / f"v{nv}_i{iv:g}"
            for p in pairs:
                _write(cell / f"seed{p.seed}_tbs.json", _report_json(p.tbs))
                _write(cell / f"seed{p.seed}_wbs.json", _report_json(p.wbs))
                _write(cell / f"seed{p.seed}_comparison.csv", p.comparison.to_csv())
            summary = experiments.summarize(pairs)
            _write(cell / "aggregate.csv", experiments.summary_csv(summary))
            grid.extend(_grid_rows(pairs, nv, iv))
            print(f"validators={nv} interval={iv:g}s seeds={seeds[0]}..{seeds[-1]}")
            for s in summary:
                imp = "n/a" if s.mean_improvement_pct is None else f"{s.mean_improvement_pct:+.2f}%"
                print(f"  {s.metric:20s} WBS better in {s.wins:2d}/{s.n}  mean {imp:>9s}  {s.signs}")
    path = out / "grid.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=GRID_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in grid:
            w.writerow(row)
    return EXIT_OK


# -- validate -------------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        trace = Trace.read(args.trace)
    except ValueError as exc:
        _err(f"{args.trace}: unreadable trace ({exc})")
        return EXIT_INVARIANT
    problems = metrics.check_trace(trace) + [
        f"fallback without refusal: {p}" for p in metrics.fallback_conformance(trace)]
    if problems:
        for p in problems:
            print(f"FAIL {p}")
        print(f"{len(problems)} violation(s) in {args.trace}")
        return EXIT_INVARIANT
    counts = metrics.tx_counts(trace)
    print(f"OK {args.trace}: {len(trace)} records, {counts['created']} txs "
          f"({counts['committed']} committed, {counts['pending']} pending, "
          f"{counts['dropped']} dropped)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iotpoa", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one simulation")
    r.add_argument("--scenario", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--policy", choices=("tbs", "wbs"))
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="TBS vs WBS over seeds, optionally over a grid")
    c.add_argument("--scenario", required=True)
    c.add_argument("--seeds", default="1..10", help="e.g. 1..10 or 1,2,5")
    c.add_argument("--validators", help="comma list of validator counts, e.g. 4,8,12")
    c.add_argument("--intervals", help="comma list of dissemination intervals, e.g. 30,300,600")
    c.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("validate", help="replay invariant checks over a stored trace")
    v.add_argument("--trace", required=True)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        for prob in exc.problems:
            _err(prob)
        return EXIT_CONFIG
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
