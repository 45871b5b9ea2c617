"""Estimation and structure-recovery metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import CycleError, DegenerateTruthError, DimensionError
from .graphs import is_acyclic


@dataclass
class MetricsReport:
    nerr: float
    shd: int
    shd_normalized: float
    tpr: float
    fdr: float
    f1: float
    wall_time: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def nerr(w_hat, w0) -> float:
    """Squared Frobenius error normalized by ``||w0||_F^2``."""
    w_hat = np.asarray(w_hat, dtype=float)
    w0 = np.asarray(w0, dtype=float)
    if w_hat.shape != w0.shape:
        raise DimensionError("estimate and truth shapes differ")
    denom = np.sum(w0 ** 2)
    if denom == 0:
        raise DegenerateTruthError("truth has zero Frobenius norm")
    return float(np.sum((w_hat - w0) ** 2) / denom)


def _supports(w_hat, w0):
    b_hat = np.asarray(w_hat) != 0
    b0 = np.asarray(w0) != 0
    if b_hat.shape != b0.shape:
        raise DimensionError("estimate and truth shapes differ")
    if not is_acyclic(b_hat) or not is_acyclic(b0):
        raise CycleError("structure metrics need acyclic supports")
    return b_hat, b0


def shd(w_hat, w0) -> int:
    """Structural Hamming distance; a reversed edge counts once."""
    b_hat, b0 = _supports(w_hat, w0)
    # compare the unordered skeletons pair by pair: an extra or missing
    # adjacency costs 1, a shared adjacency with the wrong direction costs 1
    adj_hat = b_hat | b_hat.T
    adj0 = b0 | b0.T
    iu = np.triu_indices(b0.shape[0], k=1)
    missing_or_extra = adj_hat[iu] != adj0[iu]
    both = adj_hat[iu] & adj0[iu]
    wrong_dir = both & (b_hat[iu] != b0[iu])
    return int(missing_or_extra.sum() + wrong_dir.sum())


def support_confusion(w_hat, w0) -> tuple[float, float, float]:
    """Directed-edge ``(tpr, fdr, f1)``; a reversed edge is a false positive."""
    b_hat, b0 = _supports(w_hat, w0)
    tp = int(np.sum(b_hat & b0))
    fp = int(np.sum(b_hat & ~b0))
    fn = int(np.sum(b0 & ~b_hat))
    # undefined ratios (no edges anywhere) are reported as 0
    tpr = tp / (tp + fn) if tp + fn else 0.0
    fdr = fp / max(1, tp + fp)
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom else 0.0
    return tpr, fdr, f1


def evaluate_estimate(w_dag, w0, *, w_raw=None, wall_time: float = 0.0) -> MetricsReport:
    """All metrics for one estimate. ``nerr`` uses ``w_raw`` when given,
    otherwise the thresholded matrix."""
    d = np.asarray(w0).shape[0]
    s = shd(w_dag, w0)
    tpr, fdr, f1 = support_confusion(w_dag, w0)
    est = w_dag if w_raw is None else w_raw
    try:
        e = nerr(est, w0)
    except DegenerateTruthError:
        e = float("nan")
    return MetricsReport(nerr=e, shd=s, shd_normalized=s / d, tpr=tpr, fdr=fdr, f1=f1,
                         wall_time=wall_time)
