"""Command-line entry point.

    nomad <subcommand> --config <path> [--jobs N] [--seed S] [--out DIR]

Subcommands: sample-sweep, size-sweep, noise-sweep, sachs, landscape-cert,
solve. ``solve`` fits one dataset CSV and writes the learned graph.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from .errors import NomadError
from .graphs import write_weight_csv
from .sem import Dataset, read_dataset_csv
from .solver import solve

SUBCOMMANDS = ("sample-sweep", "size-sweep", "noise-sweep", "sachs", "landscape-cert", "solve")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nomad", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        sp.add_argument("--seed", type=int, default=None, help="override master_seed")
        sp.add_argument("--out", default=None, help="override output_path")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name in ("sachs", "solve"):
            sp.add_argument("--data", default=None, help="dataset CSV (n rows x d columns)")
        if name == "sachs":
            sp.add_argument("--reference", default=None, help="reference DAG CSV")
    return p


def _load(args) -> ex.ExperimentConfig:
    with open(args.config) as fh:
        raw = json.load(fh)
    raw.setdefault("experiment", args.command)
    raw.setdefault("grid", [])
    cfg = ex.ExperimentConfig.from_dict(raw)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, output_path=args.out)
    return cfg


def _solve_one(cfg: ex.ExperimentConfig, data_path) -> dict:
    if data_path is None:
        raise ex.ConfigError("solve needs --data or data_path in the config")
    cfg.solver.validate()
    ds = read_dataset_csv(data_path)
    x = ex.standardize(ds.x, cfg.standardize)
    res = solve(Dataset(x=x, source=ds.source, names=ds.names), cfg.solver)
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    write_weight_csv(out / "w_dag.csv", res.w_dag)
    write_weight_csv(out / "w_raw.csv", res.w_raw)
    return {"converged": res.converged, "final_h": res.final_h,
            "outer_iters": res.outer_iters, "wall_time": res.wall_time,
            "edges": int((res.w_dag != 0).sum()), "output": str(out)}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        if args.command == "solve":
            summary = _solve_one(cfg, args.data or cfg.data_path)
        elif args.command == "sachs":
            res = ex.run_sachs(cfg, args.data, args.reference)
            summary = {"metrics": res.metrics, "files": res.paths}
        elif args.command == "landscape-cert":
            rep = ex.run_landscape_cert(cfg, args.jobs)
            failed = [c["name"] for c in rep["checks"] if not c["passed"]]
            summary = {"passed": rep["passed"], "checks": len(rep["checks"]),
                       "failed": failed}
        else:
            runner = {"sample-sweep": ex.run_sample_sweep, "size-sweep": ex.run_size_sweep,
                      "noise-sweep": ex.run_noise_sweep}[args.command]
            res = runner(cfg, args.jobs)
            summary = {"rows": str(res.rows_path), "aggregate": str(res.aggregate_path),
                       "failed": sum(r.failed for r in res.rows)}
    except (NomadError, OSError, json.JSONDecodeError) as exc:
        print(f"nomad: error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, indent=2, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
