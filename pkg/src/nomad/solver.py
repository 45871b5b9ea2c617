"""Non-negative DAG estimation by the method of multipliers.

The score is the half-scaled least-squares fit written through a
covariance matrix,

    F(W) = 1/2 tr((I - W)^T S (I - W)) + alpha * sum_{i != j} W_ij,

and the acyclicity constraint ``h(W) = 0`` enters through the augmented
Lagrangian ``L_c(W, lam) = F(W) + lam h(W) + c/2 h(W)^2``. Each outer
iteration minimizes ``L_c`` over ``{W >= 0, diag(W) = 0, rho(W) < s}``
(projected gradient, FISTA or projected Newton), then updates
``lam <- lam + c h`` and grows ``c`` by ``beta`` when ``h`` did not shrink
by at least ``gamma``.

Because of the 1/2 in front of the score, the multiplier value 1 here plays
the role that the value 2 plays for the unscaled population objective used
in :mod:`nomad.landscape`.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy.optimize import nnls

from .acyclicity import AcyclicityKind, LogDet, evaluate
from .errors import ConfigError, DimensionError, DomainError, LineSearchStall
from .graphs import remove_cycles, threshold_support
from .linalg import spectral_radius_nonneg
from .sem import Covariance, Dataset, sample_covariance

log = logging.getLogger(__name__)

_ETA_FLOOR = 1e-16
_ETA_CEIL = 1e12
_FNOISE = 1e-13


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters of the estimator.

    ``alpha=None`` selects ``0.05 * sqrt(log d / n)`` for data input and 0
    for a covariance given directly. ``fix_multiplier`` pins ``lam`` at
    ``lambda0`` (the multiplier update is skipped). ``use_newton`` selects
    the projected Newton inner solver, which forms the full ``d^2 x d^2``
    Hessian and is meant for small graphs (LogDet only).
    """

    alpha: float | None = None
    lambda0: float = 0.0
    c0: float = 1.0
    beta: float = 10.0
    gamma: float = 0.25
    eta0: float = 1e-2
    inner_tol: float = 1e-6
    inner_max_iters: int = 10000
    outer_max_iters: int = 20
    h_tol: float = 1e-8
    acyclicity: AcyclicityKind = LogDet(1.0)
    use_fista: bool = False
    use_newton: bool = False
    threshold_tau: float = 0.3
    known_sigma2: float | None = None
    fix_multiplier: bool = False
    precondition: bool = True

    def validate(self) -> None:
        if self.alpha is not None and self.alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if not self.beta > 1:
            raise ConfigError("beta must exceed 1")
        if not 0 < self.gamma < 1:
            raise ConfigError("gamma must lie in (0, 1)")
        if self.c0 <= 0 or self.eta0 <= 0:
            raise ConfigError("c0 and eta0 must be positive")
        if self.inner_tol <= 0 or self.h_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.inner_max_iters < 1 or self.outer_max_iters < 1:
            raise ConfigError("iteration caps must be positive")
        if self.threshold_tau < 0:
            raise ConfigError("threshold_tau must be non-negative")
        if self.known_sigma2 is not None and self.known_sigma2 <= 0:
            raise ConfigError("known_sigma2 must be positive")
        if self.use_newton and self.use_fista:
            raise ConfigError("use_newton and use_fista are exclusive")
        if self.use_newton and not isinstance(self.acyclicity, LogDet):
            raise ConfigError("the Newton inner solver supports LogDet only")


@dataclass
class SolverState:
    w: np.ndarray
    lam: float
    c: float
    h_history: list = field(default_factory=list)
    objective_history: list = field(default_factory=list)
    inner_iters_used: list = field(default_factory=list)
    # multiplier and penalty in force during each outer iteration
    lam_history: list = field(default_factory=list)
    c_history: list = field(default_factory=list)


@dataclass
class SolveResult:
    w_raw: np.ndarray
    w_dag: np.ndarray
    converged: bool
    final_h: float
    outer_iters: int
    wall_time: float
    state: SolverState | None = None


def _sigma(cov) -> np.ndarray:
    return cov.sigma if isinstance(cov, Covariance) else np.asarray(cov, dtype=float)


def _check_dims(w, sigma) -> None:
    if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape != sigma.shape:
        raise DimensionError(f"weights {w.shape} and covariance {sigma.shape} disagree")


def score(w, cov, alpha: float = 0.0) -> float:
    w = np.asarray(w, dtype=float)
    sigma = _sigma(cov)
    _check_dims(w, sigma)
    m = np.eye(w.shape[0]) - w
    fit = 0.5 * np.sum(m * (sigma @ m))
    return float(fit + alpha * (w.sum() - np.trace(w)))


def score_gradient(w, cov, alpha: float = 0.0) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    sigma = _sigma(cov)
    _check_dims(w, sigma)
    d = w.shape[0]
    return sigma @ (w - np.eye(d)) + alpha * (np.ones((d, d)) - np.eye(d))


def _alpha(cfg: SolverConfig) -> float:
    return 0.0 if cfg.alpha is None else cfg.alpha


def _lagrangian(w, sigma, alpha, kind, lam, c, with_grad=True):
    ev = evaluate(w, kind)
    if not ev.in_domain:
        raise DomainError("iterate left the acyclicity domain")
    h = ev.value
    d = w.shape[0]
    m = np.eye(d) - w
    sm = sigma @ m
    fit = m * sm
    penalty = alpha * (w.sum() - np.trace(w))
    val = 0.5 * np.sum(fit) + penalty + lam * h + 0.5 * c * h * h
    if not with_grad:
        return val, None, h, None
    grad = (lam + c * h) * ev.gradient - sm
    if alpha:
        grad += alpha
        grad[np.diag_indices(d)] -= alpha
    # rounding noise in val scales with the summed terms, and h carries an
    # absolute error of order d * eps amplified by lam + c h
    mag = (0.5 * np.abs(fit).sum() + penalty + abs(lam * h) + 0.5 * c * h * h
           + d * abs(lam + c * h))
    return val, grad, h, mag


def augmented_lagrangian(w, cov, cfg: SolverConfig, lam: float, c: float) -> float:
    """``F(W) + lam h(W) + c/2 h(W)^2``; raises DomainError off-domain."""
    val, _, _, _ = _lagrangian(np.asarray(w, dtype=float), _sigma(cov), _alpha(cfg),
                               cfg.acyclicity, lam, c, with_grad=False)
    return val


def augmented_lagrangian_gradient(w, cov, cfg: SolverConfig, lam: float,
                                  c: float) -> np.ndarray:
    _, grad, _, _ = _lagrangian(np.asarray(w, dtype=float), _sigma(cov), _alpha(cfg),
                                cfg.acyclicity, lam, c)
    return grad


def project(v: np.ndarray) -> np.ndarray:
    """Entrywise clip to the non-negative orthant with a zero diagonal."""
    p = np.maximum(v, 0.0)
    np.fill_diagonal(p, 0.0)
    return p


def pg_residual(w: np.ndarray, grad: np.ndarray) -> float:
    return float(np.linalg.norm(w - project(w - grad)))


class _Objective:
    """Caches one Lagrangian evaluation per point for the inner loop."""

    def __init__(self, sigma, alpha, kind, lam, c):
        self.args = (sigma, alpha, kind, lam, c)

    def __call__(self, w):
        try:
            return _lagrangian(w, *self.args)
        except DomainError:
            return None


def _accept(f, g, fn, gn, dw, eta, scale, mag) -> bool:
    # majorization test in the scaled metric; when f and fn agree to
    # rounding, fall back to the equivalent gradient-based curvature test
    dd = np.sum(scale * dw * dw)
    if fn <= f + np.vdot(g, dw) + dd / (2 * eta):
        return True
    if abs(fn - f) <= _FNOISE * mag:
        return np.vdot(gn - g, dw) <= dd / eta
    return False


def _bb_step(dw, dg, scale, eta):
    sy = np.vdot(dw, dg)
    eta = np.sum(scale * dw * dw) / sy if sy > 0 else 2 * eta
    return min(max(eta, 16 * _ETA_FLOOR), _ETA_CEIL)


def _inner(w, obj: _Objective, cfg: SolverConfig, scale):
    """Scaled projected gradient with BB trial steps and halving backtracking.

    ``scale`` holds one positive weight per row of W; the step on entry
    ``(i, j)`` is ``eta / scale[i]``. Returns ``(w, iterations, f, h)``.
    """
    cur = obj(w)
    if cur is None:
        raise DomainError("inner solve started outside the domain")
    f, g, h, mag = cur
    eta = cfg.eta0
    for it in range(cfg.inner_max_iters):
        if pg_residual(w, g) <= cfg.inner_tol:
            return w, it, f, h
        while True:
            wn = project(w - (eta / scale) * g)
            nxt = obj(wn)
            if nxt is not None:
                fn, gn, hn, magn = nxt
                dw = wn - w
                if _accept(f, g, fn, gn, dw, eta, scale, max(mag, magn)):
                    break
            eta *= 0.5
            if eta < _ETA_FLOOR:
                raise LineSearchStall("stepsize underflow in the inner solve")
        eta = _bb_step(dw, gn - g, scale, eta)
        w, f, g, h, mag = wn, fn, gn, hn, magn
    return w, cfg.inner_max_iters, f, h


def _inner_fista(w, obj: _Objective, cfg: SolverConfig, scale):
    """FISTA with backtracking and function-value restart."""
    cur = obj(w)
    if cur is None:
        raise DomainError("inner solve started outside the domain")
    f, g, h, mag = cur
    y, fy, gy, magy = w, f, g, mag
    t = 1.0
    eta = cfg.eta0
    for it in range(cfg.inner_max_iters):
        if pg_residual(w, g) <= cfg.inner_tol:
            return w, it, f, h
        while True:
            wn = project(y - (eta / scale) * gy)
            nxt = obj(wn)
            if nxt is not None:
                fn, gn, hn, magn = nxt
                if _accept(fy, gy, fn, gn, wn - y, eta, scale, max(magy, magn)):
                    break
            eta *= 0.5
            if eta < _ETA_FLOOR:
                raise LineSearchStall("stepsize underflow in the inner solve")
        if fn > f + _FNOISE * max(mag, magn):
            # restart: drop the momentum and step again from w
            y, fy, gy, magy, t = w, f, g, mag, 1.0
            continue
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        y_new = project(wn + ((t - 1) / t_next) * (wn - w))
        ext = obj(y_new)
        if ext is None:
            y, fy, gy, magy, t_next = wn, fn, gn, magn, 1.0
        else:
            y = y_new
            fy, gy, _, magy = ext
        w, f, g, h, mag, t = wn, fn, gn, hn, magn, t_next
        eta = min(eta * 1.25, _ETA_CEIL)
    return w, cfg.inner_max_iters, f, h


def lagrangian_hessian(w, sigma, kind: LogDet, lam: float, c: float) -> np.ndarray:
    """Hessian of the augmented Lagrangian in row-major ``vec(W)`` coordinates.

    With ``A = (sI - W)^{-1}`` the log-det term has second derivative
    ``A_jk A_li`` for the pair ``(W_ij, W_kl)``; the score contributes
    ``kron(sigma, I)`` and the quadratic penalty ``c vec(A^T) vec(A^T)^T``.
    """
    d = w.shape[0]
    ev = evaluate(w, kind)
    if not ev.in_domain:
        raise DomainError("iterate left the acyclicity domain")
    a = ev.gradient.T
    hh = np.einsum("jk,li->ijkl", a, a).reshape(d * d, d * d)
    gh = ev.gradient.reshape(-1)
    return np.kron(sigma, np.eye(d)) + (lam + c * ev.value) * hh + c * np.outer(gh, gh)


def _qp_target(w, g, hess) -> np.ndarray:
    """Minimizer of the local quadratic model over the cone.

    Off-diagonal coordinates only. The Hessian is shifted until it admits a
    Cholesky factor ``L``; the bound-constrained model is then the
    non-negative least-squares problem ``min ||L^T v - L^{-1}(H w - g)||``.
    Solving it exactly sidesteps active-set guessing, which chatters when
    zero weights carry zero gradient.
    """
    d = w.shape[0]
    off = ~np.eye(d, dtype=bool).reshape(-1)
    hf = hess[np.ix_(off, off)]
    x = w.reshape(-1)[off]
    gv = g.reshape(-1)[off]
    n = x.size
    shift = 0.0
    scale = float(np.abs(np.diag(hf)).mean())
    while True:
        hs = hf + shift * np.eye(n)
        try:
            chol = sla.cholesky(hs, lower=True)
            break
        except sla.LinAlgError:
            shift = max(4 * shift, 1e-8 * scale)
    rhs = sla.solve_triangular(chol, hs @ x - gv, lower=True)
    try:
        v, _ = nnls(chol.T, rhs, maxiter=50 * n)
    except RuntimeError:
        v = np.maximum(x - gv / np.diag(hs), 0.0)
    out = np.zeros(d * d)
    out[off] = v
    return out.reshape(d, d)


def _inner_newton(w, obj: _Objective, cfg: SolverConfig, scale):
    """Projected Newton: exact quadratic model on the cone, Armijo line search.

    Also stops after five consecutive accepted steps whose decrease is at
    rounding level, which happens near degenerate saddles.
    """
    sigma, _, kind, lam, c = obj.args
    cur = obj(w)
    if cur is None:
        raise DomainError("inner solve started outside the domain")
    f, g, h, mag = cur
    flat = 0
    for it in range(cfg.inner_max_iters):
        if flat >= 5 or pg_residual(w, g) <= cfg.inner_tol:
            return w, it, f, h
        step = _qp_target(w, g, lagrangian_hessian(w, sigma, kind, lam, c)) - w
        eta = 1.0
        while True:
            wn = w + eta * step
            nxt = obj(wn)
            if nxt is not None:
                fn, gn, hn, magn = nxt
                dw = wn - w
                if fn <= f + 1e-4 * np.vdot(g, dw):
                    break
                if abs(fn - f) <= _FNOISE * max(mag, magn) and np.vdot(gn, dw) <= 0:
                    break
            eta *= 0.5
            if eta < _ETA_FLOOR:
                raise LineSearchStall("stepsize underflow in the inner solve")
        flat = flat + 1 if f - fn <= _FNOISE * max(mag, magn) else 0
        w, f, g, h, mag = wn, fn, gn, hn, magn
    return w, cfg.inner_max_iters, f, h


def _inner_method(cfg: SolverConfig):
    if cfg.use_newton:
        return _inner_newton
    return _inner_fista if cfg.use_fista else _inner


def _row_scale(sigma, cfg: SolverConfig) -> np.ndarray:
    d = sigma.shape[0]
    if not cfg.precondition:
        return np.ones((d, 1))
    diag = np.clip(np.diag(sigma), 1e-12, None)
    return (diag / diag.mean()).reshape(d, 1)


def inner_solve(state: SolverState, cov, cfg: SolverConfig) -> np.ndarray:
    """Approximately minimize ``L_c(., lam)`` from ``state.w``.

    Every accepted iterate is non-negative, has a zero diagonal and lies in
    the acyclicity domain. Stops when the projected-gradient residual
    ``||W - [W - grad]_+||_F`` drops to ``cfg.inner_tol``.
    """
    sigma = _sigma(cov)
    obj = _Objective(sigma, _alpha(cfg), cfg.acyclicity, state.lam, state.c)
    run = _inner_method(cfg)
    w, _, _, _ = run(np.asarray(state.w, dtype=float), obj, cfg, _row_scale(sigma, cfg))
    return w


def _prepare(data, cfg: SolverConfig):
    if isinstance(data, Dataset):
        cov = sample_covariance(data)
        alpha = cfg.alpha
        if alpha is None:
            d, n = data.d, data.n
            alpha = 0.05 * np.sqrt(np.log(max(d, 2)) / n)
    elif isinstance(data, Covariance):
        cov = data
        alpha = 0.0 if cfg.alpha is None else cfg.alpha
    else:
        raise ConfigError("solve expects a Dataset or a Covariance")
    sigma = cov.sigma
    if cfg.known_sigma2 is not None:
        sigma = sigma / cfg.known_sigma2
    return sigma, float(alpha)


def _initial_point(w_init, d: int, kind: AcyclicityKind) -> np.ndarray:
    if w_init is None:
        return np.zeros((d, d))
    w = project(np.asarray(w_init, dtype=float))
    if w.shape != (d, d):
        raise DimensionError("w_init has the wrong shape")
    if isinstance(kind, LogDet):
        rho = spectral_radius_nonneg(w)
        if rho >= kind.s:
            w = w * (0.9 * kind.s / rho)
    return w


def solve(data, cfg: SolverConfig | None = None, *, w_init=None) -> SolveResult:
    """Run the method of multipliers on a Dataset or a Covariance.

    With data input the sample covariance is used (divided by
    ``cfg.known_sigma2`` when given). After the outer loop the raw estimate
    is thresholded at ``cfg.threshold_tau`` and any remaining cycle is
    broken by removing its weakest edge, so ``w_dag`` is always acyclic.
    """
    cfg = cfg or SolverConfig()
    cfg.validate()
    start = time.perf_counter()
    sigma, alpha = _prepare(data, cfg)
    d = sigma.shape[0]
    kind = cfg.acyclicity
    run = _inner_method(cfg)
    scale = _row_scale(sigma, cfg)

    state = SolverState(w=_initial_point(w_init, d, kind), lam=cfg.lambda0, c=cfg.c0)
    h_prev = evaluate(state.w, kind).value
    h = h_prev
    k = 0
    for k in range(1, cfg.outer_max_iters + 1):
        obj = _Objective(sigma, alpha, kind, state.lam, state.c)
        state.lam_history.append(state.lam)
        state.c_history.append(state.c)
        state.w, iters, f, h = run(state.w, obj, cfg, scale)
        state.h_history.append(h)
        state.objective_history.append(f)
        state.inner_iters_used.append(iters)
        log.debug("outer %d: h=%.3e lam=%.3g c=%.3g inner=%d", k, h, state.lam, state.c, iters)
        if not cfg.fix_multiplier:
            state.lam += state.c * h
        if h > cfg.gamma * h_prev:
            state.c *= cfg.beta
        h_prev = h
        if h <= cfg.h_tol:
            break

    w_raw = state.w
    w_dag = remove_cycles(threshold_support(w_raw, cfg.threshold_tau))
    return SolveResult(w_raw=w_raw, w_dag=w_dag, converged=bool(h <= cfg.h_tol),
                       final_h=float(h), outer_iters=k,
                       wall_time=time.perf_counter() - start, state=state)
