"""Linear SEM simulation and covariance construction.

Observations are stored column-wise: ``x`` has shape ``(d, n)`` and solves
``x = w.T @ x + z``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg as sla

from .errors import ConfigError, CycleError, DataError
from .graphs import is_acyclic, topological_order

SAMPLE = "sample"
POPULATION = "population"

NoiseSampler = Callable[[np.random.Generator, tuple], np.ndarray]


def gaussian_noise(rng: np.random.Generator, shape: tuple) -> np.ndarray:
    return rng.standard_normal(shape)


@dataclass
class Dataset:
    x: np.ndarray
    noise_variance: float = 1.0
    source: dict = field(default_factory=dict)
    names: list[str] | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 2 or self.x.shape[1] < 1:
            raise DataError("dataset needs a (d, n) array with n >= 1")
        if not np.all(np.isfinite(self.x)):
            raise DataError("dataset has non-finite values")

    @property
    def d(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]


@dataclass
class Covariance:
    sigma: np.ndarray
    kind: str = SAMPLE

    @property
    def d(self) -> int:
        return self.sigma.shape[0]


def simulate(w0, n: int, sigma2: float = 1.0, seed=None,
             noise: NoiseSampler = gaussian_noise) -> Dataset:
    """Draw ``n`` samples from the linear SEM with DAG weights ``w0``.

    The noise columns are i.i.d. with covariance ``sigma2 * I`` (for the
    default Gaussian sampler). ``(I - w0.T) x = z`` is solved exactly by a
    unit-triangular solve along a topological order.
    """
    w0 = np.asarray(w0, dtype=float)
    if not is_acyclic(w0):
        raise CycleError("simulate needs an acyclic weight matrix")
    if sigma2 <= 0:
        raise ConfigError("sigma2 must be positive")
    if n < 1:
        raise ConfigError("n must be at least 1")
    d = w0.shape[0]
    rng = np.random.default_rng(seed)
    z = np.sqrt(sigma2) * noise(rng, (d, n))

    order = topological_order(w0)
    # in topological coordinates w0 is strictly upper triangular, so
    # I - w0.T is unit lower triangular
    lower = np.eye(d) - w0[np.ix_(order, order)].T
    xp = sla.solve_triangular(lower, z[order], lower=True, unit_diagonal=True)
    x = np.empty_like(xp)
    x[order] = xp
    return Dataset(x=x, noise_variance=sigma2,
                   source={"kind": "synthetic", "n": n, "sigma2": sigma2, "seed": seed})


def sample_covariance(ds: Dataset) -> Covariance:
    """``x x^T / n`` without mean-centering (the SEM is zero-mean)."""
    x = ds.x
    s = x @ x.T / x.shape[1]
    return Covariance(sigma=0.5 * (s + s.T), kind=SAMPLE)


def population_covariance(w0, sigma2: float = 1.0) -> Covariance:
    """``sigma2 * (I - w0)^{-T} (I - w0)^{-1}``."""
    w0 = np.asarray(w0, dtype=float)
    if not is_acyclic(w0):
        raise CycleError("population covariance needs an acyclic weight matrix")
    if sigma2 <= 0:
        raise ConfigError("sigma2 must be positive")
    d = w0.shape[0]
    m0_inv = sla.solve(np.eye(d) - w0, np.eye(d))
    s = sigma2 * m0_inv.T @ m0_inv
    return Covariance(sigma=0.5 * (s + s.T), kind=POPULATION)


def read_dataset_csv(path, *, header: bool | None = None) -> Dataset:
    """Read an ``n x d`` CSV. A non-numeric first row is taken as a header."""
    with open(path) as fh:
        first = fh.readline().strip()
    if header is None:
        try:
            [float(v) for v in first.split(",")]
            header = False
        except ValueError:
            header = True
    names = [v.strip().strip('"') for v in first.split(",")] if header else None
    data = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    if names is not None and len(names) != data.shape[1]:
        raise DataError("header and data column counts differ")
    return Dataset(x=data.T, source={"kind": "file", "path": str(path)}, names=names)


def write_dataset_csv(path, ds: Dataset) -> None:
    hdr = ",".join(ds.names) if ds.names else ""
    np.savetxt(path, ds.x.T, delimiter=",", fmt="%.17g", header=hdr, comments="")
