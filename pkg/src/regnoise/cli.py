"""Command-line runner: ``regnoise <command> [--config F] [--seed N] [--workers N] [--strict] [--out DIR]``.

Exit codes: 0 all verdicts pass, 1 a tolerance failed, 2 configuration or
hypothesis error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import difflib
import json
import os
import sys
import time

from . import config as cfgmod
from .config import ConfigError
from .experiments import ANCHORS, RUNNERS
from .spde import hypothesis_report
from .suite import CRITERIA

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format(v, ".17g")
    if hasattr(v, "item"):
        return _fmt(v.item())
    return str(v)


def write_table(directory, table) -> str:
    path = os.path.join(directory, f"{table.name}.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.header)
        for row in table.rows:
            w.writerow([_fmt(v) for v in row])
    return os.path.basename(path)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    if isinstance(obj, float) and obj != obj:
        return None
    return obj


def write_envelope(directory, outcome, cfg, started, finished) -> dict:
    os.makedirs(directory, exist_ok=True)
    files = [write_table(directory, t) for t in outcome.tables]
    env = {
        "experiment": outcome.key,
        "title": outcome.title,
        "config_hash": cfgmod.config_hash(cfg),
        "seed": cfg.get("seed"),
        "workers": cfg.get("workers"),
        "started": started,
        "finished": finished,
        "elapsed_seconds": outcome.elapsed,
        "tables": files,
        "summary": outcome.summary,
        "verdicts": [v.as_dict() for v in outcome.verdicts],
        "passed": outcome.passed,
        "config": cfg,
    }
    with open(os.path.join(directory, "summary.json"), "w") as fh:
        json.dump(_jsonable(env), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return env


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def hypothesis_config(cfg) -> dict:
    s, d = cfg["spectrum"], cfg["drift"]
    if s["family"] == "torus-d":
        return {"equation": "heat", "d": s["d"], "gamma": s["gamma"], "beta": d["beta"]}
    return {"equation": "wave", "alpha": s["alpha"], "rho": s["rho"], "n_modes": s["n_modes"], "beta": d["beta"]}


def _resolved(args, experiment=None):
    user = cfgmod.load(args.config) if args.config else {}
    cfg = cfgmod.resolve(user, experiment)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.workers is not None:
        cfg["workers"] = args.workers
    if args.out is not None:
        cfg["out"] = args.out
    if cfg["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    return cfg


def _print_verdicts(outcome):
    for v in outcome.verdicts:
        mark = "PASS" if v.passed else "FAIL"
        note = f"  ({v.note})" if v.note else ""
        print(f"  {mark}  {v.name}: {v.value:.6g}  [{v.tolerance}]{note}")


def cmd_experiment(args) -> int:
    cfg = _resolved(args, args.command)
    hyp = hypothesis_report(hypothesis_config(cfg))
    failed = [h for h in hyp if not h.passed]
    for h in failed:
        print(f"warning: hypothesis '{h.name}' fails (margin {h.margin:.4g})", file=sys.stderr)
    if failed and args.strict:
        return EXIT_CONFIG
    started = _now()
    t0 = time.perf_counter()
    outcome = RUNNERS[args.command](cfg)
    outcome.elapsed = time.perf_counter() - t0
    outcome.summary["hypotheses"] = [vars(h) for h in hyp]
    directory = os.path.join(cfg["out"], args.command)
    env = write_envelope(directory, outcome, cfg, started, _now())
    print(f"{args.command}: config {env['config_hash']} -> {directory}")
    _print_verdicts(outcome)
    return EXIT_OK if outcome.passed else EXIT_FAIL


def cmd_reproduce_all(args) -> int:
    cfg = {"seed": args.seed or 0, "workers": args.workers or 1, "quick": bool(args.quick)}
    root = os.path.join(args.out or "results", "reproduce-all")
    rows = []
    for key, fn in CRITERIA:
        started = _now()
        outcome = fn(quick=args.quick, seed=cfg["seed"])
        write_envelope(os.path.join(root, f"criterion_{int(key):02d}"), outcome, dict(cfg, criterion=key),
                       started, _now())
        budget = "" if outcome.budget is None else f", budget {outcome.budget:g}s"
        print(f"[{key}] {'PASS' if outcome.passed else 'FAIL'}  {outcome.title} "
              f"({outcome.elapsed:.1f}s{budget})")
        _print_verdicts(outcome)
        rows.append({"criterion": key, "title": outcome.title, "passed": outcome.passed,
                     "elapsed_seconds": outcome.elapsed})
    ok = all(r["passed"] for r in rows)
    with open(os.path.join(root, "summary.json"), "w") as fh:
        json.dump({"config": cfg, "config_hash": cfgmod.config_hash(cfg), "criteria": rows, "passed": ok},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"aggregate: {'PASS' if ok else 'FAIL'} ({sum(r['passed'] for r in rows)}/{len(rows)})")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_hypotheses(args) -> int:
    cfg = _resolved(args)
    report = hypothesis_report(hypothesis_config(cfg))
    for h in report:
        print(f"{'ok  ' if h.passed else 'FAIL'}  {h.name}  margin {h.margin:.4g}  {h.detail}")
    return EXIT_OK if all(h.passed for h in report) else EXIT_CONFIG


def cmd_list(args) -> int:
    for name in cfgmod.EXPERIMENTS:
        print(f"{name:16s} {ANCHORS[name][0]}")
    return EXIT_OK


def cmd_describe(args) -> int:
    if args.name not in ANCHORS:
        close = difflib.get_close_matches(args.name, list(ANCHORS), n=3) or list(ANCHORS)
        print(f"unknown experiment {args.name!r}; try: {', '.join(close)}", file=sys.stderr)
        return EXIT_CONFIG
    anchor, tol = ANCHORS[args.name]
    cfg = cfgmod.resolve({}, args.name)
    print(f"{args.name}: {anchor}")
    print(f"default tolerances: {tol}")
    section = {"smoothing-rates": "rates"}.get(args.name, args.name)
    print("defaults:", json.dumps(cfg.get(section, {}), sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int, help="recorded for the reproducibility tuple")
    common.add_argument("--strict", action="store_true", help="hypothesis failures abort with exit code 2")
    common.add_argument("--out", help="output directory (default: results)")
    p = argparse.ArgumentParser(prog="regnoise", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in cfgmod.EXPERIMENTS:
        sp = sub.add_parser(name, parents=[common], help=ANCHORS[name][0])
        sp.set_defaults(func=cmd_experiment)
    sp = sub.add_parser("reproduce-all", parents=[common], help="run the acceptance suite")
    sp.add_argument("--quick", action="store_true", help="reduced sample sizes (determinism checks)")
    sp.set_defaults(func=cmd_reproduce_all)
    sub.add_parser("hypotheses", parents=[common], help="check parameter conditions").set_defaults(func=cmd_hypotheses)
    sub.add_parser("list", help="list experiment kinds").set_defaults(func=cmd_list)
    sp = sub.add_parser("describe", help="describe one experiment")
    sp.add_argument("name")
    sp.set_defaults(func=cmd_describe)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
