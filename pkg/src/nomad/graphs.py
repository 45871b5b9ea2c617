"""Ground-truth DAG generation, cycle checks and support utilities.

A weight matrix ``w`` is a dense ``d x d`` array where ``w[i, j]`` is the
weight of the edge ``i -> j``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

ER = "ER"
SF = "SF"


@dataclass(frozen=True)
class DagSpec:
    """Recipe for a random ground-truth DAG.

    ``avg_degree`` is the expected total (in + out) degree per node, so a
    graph has about ``d * avg_degree / 2`` edges.
    """

    d: int
    family: str = ER
    avg_degree: float = 4.0
    weight_low: float = 0.5
    weight_high: float = 2.0
    seed: int = 0

    def validate(self) -> None:
        if self.d < 1:
            raise ConfigError("d must be at least 1")
        if self.family not in (ER, SF):
            raise ConfigError(f"unknown graph family {self.family!r}")
        if self.avg_degree < 0 or (self.d > 1 and self.avg_degree >= self.d):
            raise ConfigError("avg_degree must satisfy 0 <= avg_degree < d")
        if self.weight_low <= 0 or self.weight_high < self.weight_low:
            raise ConfigError("weights need 0 < weight_low <= weight_high")


def generate_dag(spec: DagSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Sample a weighted DAG following ``spec``.

    Edges only point from lower to higher position in a uniformly random
    node ordering, so the support is acyclic by construction.
    """
    spec.validate()
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    d = spec.d
    if spec.family == ER:
        support = _erdos_renyi(d, spec.avg_degree, rng)
    else:
        support = _scale_free(d, spec.avg_degree, rng)

    perm = rng.permutation(d)
    support = support[np.ix_(perm, perm)]
    weights = rng.uniform(spec.weight_low, spec.weight_high, size=(d, d))
    return np.where(support, weights, 0.0)


def _erdos_renyi(d: int, avg_degree: float, rng: np.random.Generator) -> np.ndarray:
    if d == 1:
        return np.zeros((1, 1), dtype=bool)
    p = avg_degree / (d - 1)
    upper = np.triu(np.ones((d, d), dtype=bool), k=1)
    return upper & (rng.random((d, d)) < p)


def _scale_free(d: int, avg_degree: float, rng: np.random.Generator) -> np.ndarray:
    # Each arriving node receives m parents among the earlier nodes, picked
    # with probability proportional to (out-degree + 1).
    m = int(round(avg_degree / 2))
    support = np.zeros((d, d), dtype=bool)
    outdeg = np.zeros(d)
    for j in range(1, d):
        k = min(m, j)
        if k == 0:
            continue
        p = outdeg[:j] + 1.0
        parents = rng.choice(j, size=k, replace=False, p=p / p.sum())
        support[parents, j] = True
        outdeg[parents] += 1
    return support


def is_acyclic(w) -> bool:
    """True iff the support digraph of ``w`` has no directed cycle.

    Iterative depth-first search with white/grey/black marking.
    """
    a = np.asarray(w)
    d = a.shape[0]
    children = [np.flatnonzero(a[i]) for i in range(d)]
    color = np.zeros(d, dtype=np.int8)  # 0 white, 1 on stack, 2 done
    for root in range(d):
        if color[root]:
            continue
        stack = [(root, 0)]
        color[root] = 1
        while stack:
            node, k = stack[-1]
            if k < len(children[node]):
                stack[-1] = (node, k + 1)
                nxt = children[node][k]
                if color[nxt] == 1:
                    return False
                if color[nxt] == 0:
                    color[nxt] = 1
                    stack.append((nxt, 0))
            else:
                color[node] = 2
                stack.pop()
    return True


def topological_order(w) -> np.ndarray:
    """Kahn ordering of the support of ``w``; raises ``ValueError`` on a cycle."""
    a = np.asarray(w) != 0
    indeg = a.sum(axis=0)
    ready = list(np.flatnonzero(indeg == 0))
    order = []
    while ready:
        i = ready.pop()
        order.append(i)
        for j in np.flatnonzero(a[i]):
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
    if len(order) != a.shape[0]:
        raise ValueError("support has a directed cycle")
    return np.array(order, dtype=int)


def threshold_support(w, tau: float) -> np.ndarray:
    """Zero out entries with magnitude below ``tau``."""
    if tau < 0:
        raise ConfigError("tau must be non-negative")
    a = np.array(w, dtype=float)
    a[np.abs(a) < tau] = 0.0
    return a


def remove_cycles(w) -> np.ndarray:
    """Greedily drop the smallest-weight edge on a cycle until acyclic."""
    a = np.array(w, dtype=float)
    while True:
        cycle = find_cycle(a)
        if cycle is None:
            return a
        edges = list(zip(cycle, cycle[1:] + cycle[:1]))
        i, j = min(edges, key=lambda e: abs(a[e]))
        a[i, j] = 0.0


def find_cycle(w) -> list[int] | None:
    """Return the nodes of one directed cycle in the support, or None."""
    a = np.asarray(w)
    d = a.shape[0]
    children = [np.flatnonzero(a[i]).tolist() for i in range(d)]
    color = np.zeros(d, dtype=np.int8)
    for root in range(d):
        if color[root]:
            continue
        stack = [(root, 0)]
        color[root] = 1
        while stack:
            node, k = stack[-1]
            if k < len(children[node]):
                stack[-1] = (node, k + 1)
                nxt = children[node][k]
                if color[nxt] == 1:
                    path = [n for n, _ in stack]
                    return path[path.index(nxt):]
                if color[nxt] == 0:
                    color[nxt] = 1
                    stack.append((nxt, 0))
            else:
                color[node] = 2
                stack.pop()
    return None


def write_weight_csv(path, w) -> None:
    """Write ``w`` as ``d`` rows of ``d`` plain decimals; row ``i`` holds
    the out-weights of node ``i``."""
    np.savetxt(path, np.asarray(w, dtype=float), delimiter=",", fmt="%.17g")


def read_weight_csv(path) -> np.ndarray:
    w = np.loadtxt(path, delimiter=",", ndmin=2)
    if w.shape[0] != w.shape[1]:
        raise DataError(f"weight CSV must be square, got {w.shape}")
    return w


def read_edge_list(path, names: list[str]) -> np.ndarray:
    """Read a ``src,dst`` edge list (node names or 0-based indices) into a
    binary adjacency matrix ordered like ``names``."""
    index = {name: i for i, name in enumerate(names)}
    d = len(names)
    adj = np.zeros((d, d))
    with open(Path(path), newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            src, dst = (x.strip() for x in row[:2])
            if (src, dst) == ("src", "dst"):
                continue
            try:
                i = index[src] if src in index else int(src)
                j = index[dst] if dst in index else int(dst)
            except ValueError as exc:
                raise DataError(f"unknown node in edge {src}->{dst}") from exc
            if not (0 <= i < d and 0 <= j < d):
                raise DataError(f"edge {src}->{dst} out of range")
            adj[i, j] = 1.0
    return adj


def load_reference_dag(path, names: list[str]) -> np.ndarray:
    """Load a reference DAG given either as an edge list or a d x d CSV."""
    with open(Path(path)) as fh:
        first = fh.readline()
    if first.count(",") == 1 and len(names) != 2:
        return read_edge_list(path, names)
    w = read_weight_csv(path)
    if w.shape[0] != len(names):
        raise DataError("reference matrix size does not match the data")
    return w
