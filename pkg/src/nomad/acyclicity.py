"""Acyclicity functions on the non-negative cone.

Two functions are provided, each returning its value and exact gradient:

* log-determinant: ``h(W) = d log s - log det(sI - W)`` on ``rho(W) < s``,
  with gradient ``(sI - W)^{-T}``;
* matrix exponential: ``h(W) = tr(exp(W)) - d`` with gradient
  ``exp(W)^T``.

For ``W >= 0`` both vanish exactly on DAG supports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError, NonNegativityError, SingularityError
from .linalg import matrix_exponential, slogdet_inv, spectral_radius_nonneg


@dataclass(frozen=True)
class LogDet:
    s: float = 1.0

    def __post_init__(self):
        if not self.s > 0:
            raise ConfigError("LogDet needs s > 0")


@dataclass(frozen=True)
class MatExp:
    pass


AcyclicityKind = Union[LogDet, MatExp]


@dataclass
class AcyclicityEval:
    """Value and gradient of an acyclicity function at one point.

    When ``in_domain`` is False, ``value`` is NaN and ``gradient`` is None.
    """

    value: float
    gradient: np.ndarray | None
    in_domain: bool


_OUT = AcyclicityEval(value=float("nan"), gradient=None, in_domain=False)


def _check_nonneg(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise NonNegativityError("acyclicity functions are defined on W >= 0")
    return w


def eval_logdet(w, s: float = 1.0) -> AcyclicityEval:
    """Log-determinant acyclicity value and gradient from one LU factorization.

    ``sI - W`` is a Z-matrix, so ``rho(W) < s`` holds exactly when it is a
    nonsingular M-matrix, i.e. when its inverse exists and is entrywise
    non-negative. That inverse is the transposed gradient, so the domain
    test costs nothing extra.
    """
    w = _check_nonneg(w)
    d = w.shape[0]
    m = s * np.eye(d) - w
    try:
        sign, logabs, inv = slogdet_inv(m)
    except SingularityError:
        return _OUT
    if sign <= 0:
        return _OUT
    if inv.min() < -1e-10 * np.abs(inv).max():
        return _OUT
    value = d * np.log(s) - logabs
    return AcyclicityEval(value=float(value), gradient=inv.T, in_domain=True)


def eval_matexp(w) -> AcyclicityEval:
    w = _check_nonneg(w)
    e = matrix_exponential(w)
    return AcyclicityEval(value=float(np.trace(e) - w.shape[0]), gradient=e.T,
                          in_domain=True)


def evaluate(w, kind: AcyclicityKind) -> AcyclicityEval:
    if isinstance(kind, LogDet):
        return eval_logdet(w, kind.s)
    return eval_matexp(w)


def check_domain(w, kind: AcyclicityKind) -> bool:
    """Spectral-radius domain test (always True for the exponential)."""
    w = _check_nonneg(w)
    if isinstance(kind, MatExp):
        return True
    return spectral_radius_nonneg(w) < kind.s

