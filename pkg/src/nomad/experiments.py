"""Experiment drivers: Monte Carlo sweeps, the Sachs benchmark and the
population certification run.

Every trial's seed is a hash of ``(master_seed, experiment, value, trial)``,
so any single row can be re-run in isolation. Trials may run in worker
processes; results are collected and written by the parent only.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .acyclicity import LogDet, MatExp
from .errors import ConfigError, DataError, NomadError
from .graphs import (DagSpec, generate_dag, load_reference_dag, write_weight_csv)
from .metrics import evaluate_estimate
from .sem import Dataset, read_dataset_csv, simulate
from .solver import SolverConfig, solve

log = logging.getLogger(__name__)

EXPERIMENTS = ("sample-sweep", "size-sweep", "noise-sweep", "sachs", "landscape-cert")
STANDARDIZE = ("none", "center", "zscore")

SACHS_ROWS = 853
SACHS_COLS = 11
SACHS_NAMES = ("praf", "pmek", "plcg", "PIP2", "PIP3", "p44/42", "pakts473",
               "PKA", "PKC", "P38", "pjnk")

_PKG_DATA = Path(__file__).resolve().parent / "data"
SACHS_REFERENCE = _PKG_DATA / "sachs_reference.csv"


@dataclass
class ExperimentConfig:
    """One experiment, loadable from JSON with the same field names.

    ``grid`` holds sample counts, node counts, noise variances or (for the
    certification run) node counts; ``trials`` counts repetitions per grid
    value (seeds per node count for the certification run).
    """

    experiment: str
    grid: list
    trials: int = 20
    solver: SolverConfig = field(default_factory=SolverConfig)
    dag: DagSpec = field(default_factory=lambda: DagSpec(d=20))
    output_path: str = "results"
    master_seed: int = 0
    n: int = 1000
    sigma2: float = 1.0
    families: list = field(default_factory=lambda: ["ER", "SF"])
    data_path: str | None = None
    reference_path: str | None = None
    standardize: str = "zscore"
    cert_samples: int = 2000
    cert_inits: int = 10
    cert_candidates: int = 5

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.experiment != "sachs" and not self.grid:
            raise ConfigError("grid must not be empty")
        if self.experiment == "noise-sweep" and any(v <= 0 for v in self.grid):
            raise ConfigError("noise variances must be positive")
        if self.experiment == "sample-sweep" and any(int(v) < 1 for v in self.grid):
            raise ConfigError("sample counts must be positive")
        if self.standardize not in STANDARDIZE:
            raise ConfigError(f"standardize must be one of {STANDARDIZE}")
        if self.sigma2 <= 0:
            raise ConfigError("sigma2 must be positive")
        self.solver.validate()
        out = Path(self.output_path)
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise ConfigError(f"output path {out} is not writable")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        if "solver" in raw:
            raw["solver"] = solver_config_from_dict(raw["solver"])
        if "dag" in raw:
            raw["dag"] = DagSpec(**raw["dag"])
        return cls(**raw)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["solver"] = solver_config_to_dict(self.solver)
        return out


def solver_config_from_dict(raw: dict) -> SolverConfig:
    raw = dict(raw)
    acyc = raw.pop("acyclicity", None)
    if acyc is not None:
        if isinstance(acyc, str):
            acyc = {"kind": acyc}
        kind = acyc.get("kind", "logdet").lower()
        if kind == "logdet":
            raw["acyclicity"] = LogDet(float(acyc.get("s", 1.0)))
        elif kind == "matexp":
            raw["acyclicity"] = MatExp()
        else:
            raise ConfigError(f"unknown acyclicity kind {kind!r}")
    try:
        return SolverConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def solver_config_to_dict(cfg: SolverConfig) -> dict:
    out = asdict(cfg)
    kind = cfg.acyclicity
    out["acyclicity"] = ({"kind": "logdet", "s": kind.s} if isinstance(kind, LogDet)
                         else {"kind": "matexp"})
    return out


def trial_seed(master_seed: int, experiment: str, value, trial: int) -> int:
    """Deterministic 63-bit seed for one trial."""
    key = json.dumps([int(master_seed), experiment, float(value), int(trial)])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big") >> 1


@dataclass
class ResultRow:
    experiment: str
    variant: str
    value: float
    trial: int
    seed: int
    nerr: float = float("nan")
    shd: int = -1
    shd_normalized: float = float("nan")
    tpr: float = float("nan")
    fdr: float = float("nan")
    f1: float = float("nan")
    wall_time: float = 0.0
    converged: bool = False
    outer_iters: int = 0
    final_h: float = float("nan")
    failed: bool = False
    error: str = ""


ROW_COLUMNS = [f.name for f in fields(ResultRow)]
AGG_COLUMNS = ["experiment", "variant", "value", "metric", "median", "p25", "p75",
               "count", "excluded"]


@dataclass
class _Task:
    experiment: str
    variant: str
    value: float
    trial: int
    seed: int
    dag: DagSpec
    n: int
    sigma2: float
    solver: SolverConfig


def _run_task(task: _Task) -> ResultRow:
    row = ResultRow(task.experiment, task.variant, task.value, task.trial, task.seed)
    try:
        # the graph and the data share the trial seed but use separate streams
        g_seed, x_seed = np.random.SeedSequence(task.seed).generate_state(2)
        w0 = generate_dag(replace(task.dag, seed=int(g_seed)))
        ds = simulate(w0, task.n, task.sigma2, seed=int(x_seed))
        res = solve(ds, task.solver)
        rep = evaluate_estimate(res.w_dag, w0, wall_time=res.wall_time)
        for k, v in rep.as_dict().items():
            setattr(row, k, v)
        row.converged = res.converged
        row.outer_iters = res.outer_iters
        row.final_h = res.final_h
    except (NomadError, ArithmeticError, ValueError) as exc:
        row.failed = True
        row.error = f"{type(exc).__name__}: {exc}"
        log.warning("trial %s/%s/%s failed: %s", task.variant, task.value, task.trial,
                    traceback.format_exception_only(type(exc), exc)[-1].strip())
    return row


def run_tasks(tasks: list, jobs: int = 1) -> list:
    """Run trials, in worker processes when ``jobs > 1``; order is preserved."""
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_task, tasks))


def aggregate(rows: list, metrics=("nerr", "shd_normalized", "tpr", "fdr", "f1")) -> list:
    """Median and quartiles per ``(variant, value, metric)``; failed trials excluded."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.experiment, r.variant, r.value), []).append(r)
    out = []
    for (exp, variant, value), grp in groups.items():
        ok = [r for r in grp if not r.failed]
        for m in metrics:
            vals = np.array([getattr(r, m) for r in ok], dtype=float)
            if vals.size:
                p25, med, p75 = np.percentile(vals, [25, 50, 75])
            else:
                p25 = med = p75 = float("nan")
            out.append({"experiment": exp, "variant": variant, "value": value, "metric": m,
                        "median": float(med), "p25": float(p25), "p75": float(p75),
                        "count": len(ok), "excluded": len(grp) - len(ok)})
    return out


def write_rows(path, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=ROW_COLUMNS)
        wr.writeheader()
        for r in rows:
            wr.writerow(asdict(r))


def read_rows(path) -> list:
    types = {f.name: f.type for f in fields(ResultRow)}
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for k, v in rec.items():
                t = types[k]
                if t in ("int",):
                    kw[k] = int(v)
                elif t in ("float",):
                    kw[k] = float(v)
                elif t in ("bool",):
                    kw[k] = v == "True"
                else:
                    kw[k] = v
            rows.append(ResultRow(**kw))
    return rows


def write_aggregate(path, agg: list) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=AGG_COLUMNS)
        wr.writeheader()
        wr.writerows(agg)


@dataclass
class SweepResult:
    rows: list
    aggregate: list
    rows_path: Path
    aggregate_path: Path

    def median(self, metric: str, value, variant: str | None = None) -> float:
        for a in self.aggregate:
            if (a["metric"] == metric and a["value"] == value
                    and (variant is None or a["variant"] == variant)):
                return a["median"]
        raise KeyError((metric, value, variant))


def _finish(cfg: ExperimentConfig, rows: list) -> SweepResult:
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    stem = cfg.experiment.replace("-", "_")
    agg = aggregate(rows)
    rows_path, agg_path = out / f"{stem}_rows.csv", out / f"{stem}_aggregate.csv"
    write_rows(rows_path, rows)
    write_aggregate(agg_path, agg)
    failed = sum(r.failed for r in rows)
    if failed:
        log.warning("%d of %d trials failed and were excluded", failed, len(rows))
    return SweepResult(rows, agg, rows_path, agg_path)


def _task(cfg, variant, value, trial, dag, n, sigma2, solver) -> _Task:
    seed = trial_seed(cfg.master_seed, cfg.experiment, value, trial)
    return _Task(cfg.experiment, variant, float(value), trial, seed, dag, int(n),
                 float(sigma2), solver)


def _require(cfg: ExperimentConfig, name: str) -> None:
    cfg.validate()
    if cfg.experiment != name:
        raise ConfigError(f"config is for {cfg.experiment!r}, not {name!r}")


def run_sample_sweep(cfg: ExperimentConfig, jobs: int = 1) -> SweepResult:
    """Error versus sample count on a fixed graph family."""
    _require(cfg, "sample-sweep")
    tasks = [_task(cfg, cfg.dag.family, n, t, cfg.dag, n, cfg.sigma2, cfg.solver)
             for n in cfg.grid for t in range(cfg.trials)]
    return _finish(cfg, run_tasks(tasks, jobs))


def run_size_sweep(cfg: ExperimentConfig, jobs: int = 1) -> SweepResult:
    """Structure recovery versus node count for each graph family."""
    _require(cfg, "size-sweep")
    tasks = []
    for fam in cfg.families:
        for d in cfg.grid:
            d = int(d)
            deg = min(cfg.dag.avg_degree, max(d - 1, 0))
            spec = replace(cfg.dag, d=d, family=fam, avg_degree=deg)
            tasks += [_task(cfg, fam, d, t, spec, cfg.n, cfg.sigma2, cfg.solver)
                      for t in range(cfg.trials)]
    return _finish(cfg, run_tasks(tasks, jobs))


def run_noise_sweep(cfg: ExperimentConfig, jobs: int = 1) -> SweepResult:
    """Error versus noise variance, with and without the known variance.

    Both variants see the same graph and data for a given ``(value, trial)``.
    """
    _require(cfg, "noise-sweep")
    tasks = []
    for s2 in cfg.grid:
        for t in range(cfg.trials):
            plain = replace(cfg.solver, known_sigma2=None)
            known = replace(cfg.solver, known_sigma2=float(s2))
            tasks.append(_task(cfg, "logdet", s2, t, cfg.dag, cfg.n, s2, plain))
            tasks.append(_task(cfg, "logdet-sigma", s2, t, cfg.dag, cfg.n, s2, known))
    return _finish(cfg, run_tasks(tasks, jobs))


def standardize(x: np.ndarray, mode: str) -> np.ndarray:
    """Column-wise preprocessing of a ``(d, n)`` array: none, center or zscore."""
    if mode not in STANDARDIZE:
        raise ConfigError(f"standardize must be one of {STANDARDIZE}")
    if mode == "none":
        return x.copy()
    xc = x - x.mean(axis=1, keepdims=True)
    if mode == "center":
        return xc
    sd = xc.std(axis=1, keepdims=True)
    if np.any(sd == 0):
        raise DataError("a variable has zero variance")
    return xc / sd


def load_sachs(path, *, expected_rows: int = SACHS_ROWS) -> Dataset:
    """Read the 853 x 11 observational table and order columns canonically."""
    ds = read_dataset_csv(path, header=True)
    if ds.names is None:
        raise DataError("the Sachs table needs a header row")
    missing = [v for v in SACHS_NAMES if v not in ds.names]
    if missing:
        raise DataError(f"missing columns: {missing}")
    if ds.d != SACHS_COLS or ds.n != expected_rows:
        raise DataError(f"expected {expected_rows} x {SACHS_COLS} data, got {ds.n} x {ds.d}")
    order = [ds.names.index(v) for v in SACHS_NAMES]
    return Dataset(x=ds.x[order], source=ds.source, names=list(SACHS_NAMES))


@dataclass
class SachsResult:
    metrics: dict
    w_raw: np.ndarray
    w_dag: np.ndarray
    w_ref: np.ndarray
    names: list
    config: dict
    paths: dict


def run_sachs(cfg: ExperimentConfig, data_path=None, reference_path=None) -> SachsResult:
    """Fit the protein-signaling data and compare with the reference network."""
    _require(cfg, "sachs")
    data_path = data_path or cfg.data_path
    if data_path is None:
        raise ConfigError("no Sachs data path given")
    ref_path = reference_path or cfg.reference_path or SACHS_REFERENCE
    ds = load_sachs(data_path)
    x = standardize(ds.x, cfg.standardize)
    data = Dataset(x=x, source=ds.source, names=ds.names)
    w_ref = load_reference_dag(ref_path, ds.names)
    res = solve(data, cfg.solver)
    rep = evaluate_estimate(res.w_dag, w_ref, wall_time=res.wall_time)
    metrics = rep.as_dict()
    metrics.update(converged=res.converged, final_h=res.final_h,
                   outer_iters=res.outer_iters, edges=int(np.count_nonzero(res.w_dag)),
                   reference_edges=int(np.count_nonzero(w_ref)))

    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"estimate": out / "sachs_w_dag.csv", "raw": out / "sachs_w_raw.csv",
             "metrics": out / "sachs_metrics.json"}
    write_weight_csv(paths["estimate"], res.w_dag)
    write_weight_csv(paths["raw"], res.w_raw)
    record = {"metrics": metrics, "names": ds.names, "config": cfg.to_dict(),
              "data_path": str(data_path), "reference_path": str(ref_path)}
    with open(paths["metrics"], "w") as fh:
        json.dump(record, fh, indent=2, default=float)
    return SachsResult(metrics, res.w_raw, res.w_dag, w_ref, ds.names, cfg.to_dict(),
                       {k: str(v) for k, v in paths.items()})


def run_landscape_cert(cfg: ExperimentConfig, jobs: int = 1) -> dict:
    """All population checks for each node count in ``grid`` and ``trials`` seeds."""
    from .landscape import build_report

    _require(cfg, "landscape-cert")
    jobs_list = []
    for d in cfg.grid:
        for t in range(cfg.trials):
            seed = trial_seed(cfg.master_seed, cfg.experiment, d, t) % (2 ** 32)
            jobs_list.append((int(d), seed, cfg))
    if jobs <= 1:
        parts = [_cert_job(j) for j in jobs_list]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_cert_job, jobs_list))
    report = build_report([c for p in parts for c in p])
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "landscape_report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    return report


def _cert_job(job) -> list:
    from .landscape import PopulationProblem, certify_instance

    d, seed, cfg = job
    deg = min(cfg.dag.avg_degree, max(d - 1, 0))
    spec = replace(cfg.dag, d=d, avg_degree=deg, seed=seed)
    prob = PopulationProblem.from_dag(generate_dag(spec))
    return certify_instance(prob, seed, num_samples=cfg.cert_samples,
                            num_inits=cfg.cert_inits, num_candidates=cfg.cert_candidates)
