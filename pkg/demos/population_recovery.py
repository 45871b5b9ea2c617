"""Recover a DAG exactly from its population covariance.

Random non-negative starts all converge to the true weights.
Run with ``python demos/population_recovery.py``.
"""

import numpy as np

from nomad.graphs import DagSpec, generate_dag
from nomad.landscape import PopulationProblem, kkt_residual, population_solver_config, sample_w1
from nomad.metrics import nerr, shd
from nomad.solver import solve

rng = np.random.default_rng(0)
w0 = generate_dag(DagSpec(d=6, avg_degree=3.0, seed=3))
prob = PopulationProblem.from_dag(w0)
print("true edges:", int(np.count_nonzero(w0)))

for i, w_init in enumerate(sample_w1(rng, 6, 5)):
    res = solve(prob.sigma_x, population_solver_config(), w_init=w_init)
    k = kkt_residual(res.w_raw, prob)
    print(f"start {i}: nerr={nerr(res.w_raw, w0):.1e}  SHD={shd(res.w_dag, w0)}  "
          f"outer={res.outer_iters}  h={res.final_h:.1e}  "
          f"complementarity={k.complementarity:.1e}")
