"""Estimation error shrinks as the sample count grows.

A small version of the sample sweep: d=10, five trials per sample count.
Run with ``python demos/finite_sample.py``.
"""

import tempfile

import nomad.experiments as ex
from nomad.graphs import DagSpec

with tempfile.TemporaryDirectory() as out:
    cfg = ex.ExperimentConfig(experiment="sample-sweep", grid=[100, 1000, 10000], trials=5,
                              dag=DagSpec(d=10, avg_degree=3.0), output_path=out)
    res = ex.run_sample_sweep(cfg)
    for n in cfg.grid:
        print(f"n={n:>6}: median nerr={res.median('nerr', n):.4f}  "
              f"median normalized SHD={res.median('shd_normalized', n):.3f}")
