"""Fit the bundled protein-signaling data and compare with the reference network.

Run from the repository root with ``python demos/sachs.py``.
"""

import tempfile

import nomad.experiments as ex

with tempfile.TemporaryDirectory() as out:
    cfg = ex.ExperimentConfig.from_json("configs/sachs.json")
    cfg = ex.ExperimentConfig.from_dict({**cfg.to_dict(), "output_path": out})
    res = ex.run_sachs(cfg)
    m = res.metrics
    print(f"{m['edges']} edges learned, {m['reference_edges']} in the reference")
    print(f"SHD={m['shd']}  TPR={m['tpr']:.3f}  FDR={m['fdr']:.3f}  F1={m['f1']:.3f}")
    for i, j in zip(*res.w_dag.nonzero()):
        mark = "*" if res.w_ref[i, j] else " "
        print(f"  {mark} {res.names[i]} -> {res.names[j]}  ({res.w_dag[i, j]:+.2f})")
    print("(* = edge present in the reference)")
