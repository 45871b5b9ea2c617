"""Numerical certification of the population landscape.

Everything here uses the unscaled population objective with identity noise
covariance and ``s = 1``:

    Fbar(W) = tr((I - W)^T Sigma (I - W)),
    Lbar_c(W, lam) = Fbar(W) + lam h(W) + c/2 h(W)^2,
    h(W) = -log det(I - W),

over ``W1 = {W >= 0, rho(W) < 1}``. The threshold multiplier is ``lam = 2``
(the solver's half-scaled score moves it to 1). A numerical search can only
fail to find counterexamples; reports say so explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .acyclicity import LogDet, eval_logdet
from .errors import ConfigError, CycleError, DomainError, SamplingError
from .graphs import is_acyclic
from .sem import Covariance, population_covariance

LAMBDA_STAR = 2.0

# tolerance tiers: exact identities, first-order quantities, recovery
TOL_IDENTITY = 1e-8
TOL_STATIONARY = 1e-6
TOL_RECOVERY = 1e-4

EPISTEMIC_NOTE = ("Numerical checks sample finitely many points; a pass means no "
                  "counterexample was found, not that the statement was proved.")


@dataclass
class PopulationProblem:
    """True DAG, its population covariance and the multiplier pair."""

    w0: np.ndarray
    sigma_x: Covariance
    lam: float = LAMBDA_STAR
    c: float = 1.0
    s: float = 1.0

    def __post_init__(self):
        self.w0 = np.asarray(self.w0, dtype=float)
        if not is_acyclic(self.w0):
            raise CycleError("the true graph must be acyclic")
        if self.c <= 0:
            raise ConfigError("c must be positive")
        if self.s != 1.0:
            raise ConfigError("the population analysis fixes s = 1")

    @classmethod
    def from_dag(cls, w0, lam: float = LAMBDA_STAR, c: float = 1.0) -> "PopulationProblem":
        return cls(w0=w0, sigma_x=population_covariance(w0, 1.0), lam=lam, c=c)

    @property
    def d(self) -> int:
        return self.w0.shape[0]

    def with_multipliers(self, lam: float | None = None, c: float | None = None):
        return PopulationProblem(self.w0, self.sigma_x, self.lam if lam is None else lam,
                                 self.c if c is None else c, self.s)

    def consistency_gap(self) -> float:
        """Max entrywise gap between ``sigma_x`` and the covariance implied by ``w0``."""
        return float(np.abs(self.sigma_x.sigma - population_covariance(self.w0).sigma).max())


@dataclass
class KktResidual:
    """First-order quantities of ``A(W) = 1/2 grad Lbar_c(W, 2)``."""

    grad: np.ndarray
    min_grad_entry: float
    complementarity: float
    trace_identity_gap: float
    score_bound_slack: float

    def satisfied(self, tol: float = TOL_STATIONARY) -> bool:
        return (self.min_grad_entry >= -tol and self.complementarity <= tol
                and self.trace_identity_gap <= tol)


def _h_and_inv(w):
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise DomainError("population checks are defined on W >= 0")
    ev = eval_logdet(w, 1.0)
    if not ev.in_domain:
        raise DomainError("rho(W) >= 1")
    return w, ev.value, ev.gradient


def population_score(w, prob: PopulationProblem) -> float:
    """``tr((I - W)^T Sigma_x (I - W))``; raises DomainError outside W1."""
    w, _, _ = _h_and_inv(w)
    m = np.eye(w.shape[0]) - w
    return float(np.sum(m * (prob.sigma_x.sigma @ m)))


def population_lagrangian(w, prob: PopulationProblem, lam: float | None = None) -> float:
    w, h, _ = _h_and_inv(w)
    lam = prob.lam if lam is None else lam
    m = np.eye(w.shape[0]) - w
    return float(np.sum(m * (prob.sigma_x.sigma @ m)) + lam * h + 0.5 * prob.c * h * h)


def population_gradient(w, prob: PopulationProblem, lam: float | None = None) -> np.ndarray:
    """``-2 Sigma_x (I - W) + (lam + c h(W)) (I - W)^{-T}``."""
    w, h, inv_t = _h_and_inv(w)
    lam = prob.lam if lam is None else lam
    m = np.eye(w.shape[0]) - w
    return -2.0 * prob.sigma_x.sigma @ m + (lam + prob.c * h) * inv_t


def stationarity_residual(w, prob: PopulationProblem) -> float:
    return float(np.linalg.norm(population_gradient(w, prob)))


def phi(t, lam: float, c: float, d: int):
    """Scalar lower bound ``d exp(-2t/d) + lam t + c/2 t^2``."""
    t = np.asarray(t, dtype=float)
    return d * np.exp(-2.0 * t / d) + lam * t + 0.5 * c * t * t


def phi_prime(t, lam: float, c: float, d: int):
    t = np.asarray(t, dtype=float)
    return -2.0 * np.exp(-2.0 * t / d) + lam + c * t


def phi_second(t, c: float, d: int):
    t = np.asarray(t, dtype=float)
    return 4.0 / d * np.exp(-2.0 * t / d) + c


def sample_w1(rng: np.random.Generator, d: int, size: int, *,
              zero_diagonal: bool = True, radius: float = 0.9) -> np.ndarray:
    """Random points of W1 with shape ``(size, d, d)``.

    Entries are uniform on [0, 1]; samples with ``rho >= 1`` are rescaled to
    ``rho = radius``.
    """
    w = rng.uniform(0.0, 1.0, size=(size, d, d))
    if zero_diagonal:
        idx = np.arange(d)
        w[:, idx, idx] = 0.0
    rho = np.abs(np.linalg.eigvals(w)).max(axis=1)
    over = rho >= 1.0
    w[over] *= (radius / rho[over])[:, None, None]
    rho[over] *= radius / rho[over]
    if not np.all(rho < 1.0):
        raise SamplingError("failed to draw points with rho < 1")
    return w


def _batch_terms(ws, sigma):
    """Vectorized ``(Fbar, h)`` over a stack of matrices."""
    d = ws.shape[-1]
    ms = np.eye(d) - ws
    fbar = np.einsum("kij,il,klj->k", ms, sigma, ms)
    sign, logabs = np.linalg.slogdet(ms)
    if np.any(sign <= 0):
        raise SamplingError("sampled matrix left the domain")
    return fbar, -logabs


@dataclass
class LowerBoundReport:
    num_samples: int
    d: int
    lam: float
    c: float
    min_bound_margin: float
    min_phi_margin: float
    min_amgm_margin: float
    violations: int
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.violations == 0


def check_lower_bound(prob: PopulationProblem, num_samples: int, seed,
                      tol: float = 1e-9, batch: int = 2000) -> LowerBoundReport:
    """Check ``Lbar >= phi(h) >= d`` and ``Fbar >= d exp(-2h/d)`` on random W1 points."""
    if prob.lam < LAMBDA_STAR:
        raise ConfigError("the lower bound needs lam >= 2")
    rng = np.random.default_rng(seed)
    d, sigma = prob.d, prob.sigma_x.sigma
    worst = [np.inf, np.inf, np.inf]
    violations = 0
    done = 0
    while done < num_samples:
        k = min(batch, num_samples - done)
        fbar, h = _batch_terms(sample_w1(rng, d, k), sigma)
        lbar = fbar + prob.lam * h + 0.5 * prob.c * h * h
        ph = phi(h, prob.lam, prob.c, d)
        margins = (lbar - ph, ph - d, fbar - d * np.exp(-2.0 * h / d))
        for i, mg in enumerate(margins):
            worst[i] = min(worst[i], float(mg.min()))
            violations += int(np.sum(mg < -tol))
        done += k
    return LowerBoundReport(num_samples=num_samples, d=d, lam=prob.lam, c=prob.c,
                            min_bound_margin=worst[0], min_phi_margin=worst[1],
                            min_amgm_margin=worst[2], violations=violations)


def c_matrix(w, w0) -> np.ndarray:
    """``(I - W0)^{-1} (I - W)``."""
    d = np.asarray(w0).shape[0]
    return np.linalg.solve(np.eye(d) - w0, np.eye(d) - np.asarray(w, dtype=float))


def singular_value_spread(w, w0, h: float) -> float:
    """Max deviation of the singular values of C from ``exp(-h/d)``."""
    sv = np.linalg.svd(c_matrix(w, w0), compute_uv=False)
    return float(np.abs(sv - math.exp(-h / sv.size)).max())


def _distance(w, w0) -> float:
    # nerr, or the plain squared norm when the truth is the empty graph
    denom = float(np.sum(w0 ** 2))
    err = float(np.sum((np.asarray(w) - w0) ** 2))
    return err / denom if denom > 0 else err


@dataclass
class DescentRun:
    converged: bool
    left_cone: bool
    iterations: int
    min_interior_residual: float
    final_residual: float
    final_h: float
    sv_spread: float
    distance_to_truth: float


@dataclass
class StationaryReport:
    lam: float
    d: int
    runs: list
    passed: bool
    summary: dict
    note: str = EPISTEMIC_NOTE


def _full_space_terms(w, prob, lam):
    # Lbar and its gradient on {det(I - W) > 0}, without the cone restriction
    d = w.shape[0]
    m = np.eye(d) - w
    sign, logabs = np.linalg.slogdet(m)
    if sign <= 0:
        return None
    h = -logabs
    sm = prob.sigma_x.sigma @ m
    val = np.sum(m * sm) + lam * h + 0.5 * prob.c * h * h
    grad = -2.0 * sm + (lam + prob.c * h) * np.linalg.inv(m).T
    return val, grad, h


def _descend(w, prob, lam, max_iters, tol, stop_on_exit=False):
    """Covariance-preconditioned gradient descent with Armijo backtracking.

    The run is tracked through the cone: ``min_interior_residual`` covers
    only iterates with ``W >= 0``, and leaving the cone is recorded. Unless
    ``stop_on_exit`` is set, descent continues to a stationary point of the
    full-space objective so that the limit can be inspected either way.
    """
    pre = np.linalg.inv(prob.sigma_x.sigma) / 2.0
    val, grad, h = _full_space_terms(w, prob, lam)
    left = False
    min_int = np.inf
    eta = 1.0
    it = 0
    res = float(np.linalg.norm(grad))
    for it in range(1, max_iters + 1):
        if not left:
            min_int = min(min_int, res)
        if res <= tol:
            break
        step = pre @ grad
        slope = float(np.vdot(grad, step))
        while True:
            wn = w - eta * step
            nxt = _full_space_terms(wn, prob, lam)
            if nxt is not None and nxt[0] <= val - 1e-4 * eta * slope:
                break
            if nxt is not None and abs(nxt[0] - val) <= 1e-13 * max(1.0, abs(val)):
                break
            eta *= 0.5
            if eta < 1e-16:
                return w, it, left, min_int, res, h
        w = wn
        val, grad, h = nxt
        res = float(np.linalg.norm(grad))
        if np.any(w < 0):
            left = True
            if stop_on_exit:
                break
        eta = min(1.0, 2.0 * eta)
    if not left:
        min_int = min(min_int, res)
    return w, it, left, min_int, res, h


def search_stationary_points(prob: PopulationProblem, num_inits: int, seed, *,
                             max_iters: int = 5000, tol: float = 1e-10) -> StationaryReport:
    """Look for stationary points of ``Lbar_c(., lam)`` from random interior starts.

    Starts have all entries positive (diagonal included) and ``rho <= 0.9``.
    For ``lam > 2`` the report passes when no iterate inside the cone has a
    gradient norm at or below ``TOL_RECOVERY``; those runs stop at the first
    iterate outside the cone. For ``lam = 2`` it passes
    when every run that converged without leaving the cone ends at the true
    graph, and every converged limit (inside or outside the cone) has
    ``h = 0`` and all singular values of C equal to ``exp(-h/d)``.
    """
    rng = np.random.default_rng(seed)
    d, lam = prob.d, prob.lam
    runs = []
    for w_init in sample_w1(rng, d, num_inits, zero_diagonal=False):
        w, it, left, min_int, res, h = _descend(w_init, prob, lam, max_iters, tol,
                                                stop_on_exit=lam > LAMBDA_STAR)
        conv = res <= TOL_STATIONARY
        runs.append(DescentRun(converged=bool(conv), left_cone=bool(left), iterations=it,
                               min_interior_residual=float(min_int), final_residual=res,
                               final_h=float(h),
                               sv_spread=singular_value_spread(w, prob.w0, h),
                               distance_to_truth=_distance(w, prob.w0)))

    interior = [r for r in runs if r.converged and not r.left_cone]
    if lam > LAMBDA_STAR:
        passed = all(r.min_interior_residual > TOL_RECOVERY for r in runs)
    else:
        limits_ok = all(abs(r.final_h) <= TOL_STATIONARY and r.sv_spread <= TOL_STATIONARY
                        for r in runs if r.converged)
        passed = limits_ok and all(r.distance_to_truth <= TOL_RECOVERY for r in interior)
    summary = {
        "runs": len(runs),
        "converged": sum(r.converged for r in runs),
        "left_cone": sum(r.left_cone for r in runs),
        "interior_converged": len(interior),
        "interior_at_truth": sum(r.distance_to_truth <= TOL_RECOVERY for r in interior),
        "min_interior_residual": min(r.min_interior_residual for r in runs),
        "max_sv_spread_converged": max((r.sv_spread for r in runs if r.converged),
                                       default=0.0),
    }
    return StationaryReport(lam=lam, d=d, runs=runs, passed=bool(passed), summary=summary)


def kkt_residual(w, prob: PopulationProblem) -> KktResidual:
    """KKT quantities of ``A(W) = -Sigma_x M + (1 + c h/2) M^{-T}``, ``M = I - W``."""
    w, h, inv_t = _h_and_inv(w)
    d = w.shape[0]
    m = np.eye(d) - w
    fbar = float(np.sum(m * (prob.sigma_x.sigma @ m)))
    a = -prob.sigma_x.sigma @ m + (1.0 + 0.5 * prob.c * h) * inv_t
    return KktResidual(grad=a, min_grad_entry=float(a.min()),
                       complementarity=float(np.linalg.norm(w * a)),
                       trace_identity_gap=float(abs(np.trace(a) - np.vdot(m, a))),
                       score_bound_slack=d * (1.0 + 0.5 * prob.c * h) - fbar)


@dataclass
class UniquenessReport:
    d: int
    candidates: int
    certified: int
    excluded: int
    max_certified_distance: float
    passed: bool
    details: list
    note: str = EPISTEMIC_NOTE


def verify_acyclic_kkt_uniqueness(prob: PopulationProblem, num_candidates: int, seed,
                                  solver_cfg=None) -> UniquenessReport:
    """Collect acyclic KKT candidates with the solver and compare them to the truth.

    The solver runs on the population covariance with ``alpha = 0``; its
    multiplier starts at 0 and rises to the threshold (1 under its
    half-scaled score) as the iterates become acyclic. Candidates with ``h > 1e-8`` or KKT residuals above ``1e-6`` are
    excluded; every remaining candidate must be within ``1e-4`` of the truth.
    """
    from .solver import solve

    cfg = solver_cfg or population_solver_config()
    rng = np.random.default_rng(seed)
    d = prob.d
    details = []
    for w_init in sample_w1(rng, d, num_candidates):
        res = solve(prob.sigma_x, cfg, w_init=w_init)
        w = res.w_raw
        kkt = kkt_residual(w, prob)
        h = eval_logdet(w).value
        cert = bool(h <= 1e-8 and kkt.satisfied(TOL_STATIONARY))
        details.append({"h": float(h), "certified": cert,
                        "distance": _distance(w, prob.w0),
                        "min_grad_entry": kkt.min_grad_entry,
                        "complementarity": kkt.complementarity,
                        "trace_identity_gap": kkt.trace_identity_gap})
    cert = [r for r in details if r["certified"]]
    worst = max((r["distance"] for r in cert), default=0.0)
    return UniquenessReport(d=d, candidates=len(details), certified=len(cert),
                            excluded=len(details) - len(cert),
                            max_certified_distance=worst,
                            passed=bool(worst <= TOL_RECOVERY), details=details)


def population_solver_config(**overrides):
    """Solver settings for population runs: no sparsity term, tight inner
    tolerance and the Newton inner solver (population covariances are badly
    conditioned and the problem is degenerate at the threshold multiplier)."""
    from .solver import SolverConfig

    base = dict(alpha=0.0, inner_tol=1e-10, acyclicity=LogDet(1.0), use_newton=True)
    base.update(overrides)
    return SolverConfig(**base)


REPORT_SCHEMA = {
    "type": "object",
    "required": ["passed", "checks", "note"],
    "properties": {
        "passed": {"type": "boolean"},
        "note": {"type": "string"},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "d", "seed", "passed", "worst_margin"],
                "properties": {
                    "name": {"type": "string"},
                    "d": {"type": "integer", "minimum": 1},
                    "seed": {"type": "integer"},
                    "passed": {"type": "boolean"},
                    "worst_margin": {"type": "number"},
                    "detail": {"type": "object"},
                },
            },
        },
    },
}


def _check(name, d, seed, passed, margin, **detail):
    margin = float(margin)
    if not math.isfinite(margin):
        margin = float(np.sign(margin)) * 1e308 if not math.isnan(margin) else -1e308
    return {"name": name, "d": int(d), "seed": int(seed), "passed": bool(passed),
            "worst_margin": margin, "detail": detail}


def certify_instance(prob: PopulationProblem, seed: int, *, num_samples: int = 2000,
                     num_inits: int = 10, num_candidates: int = 5,
                     lambdas=(2.0, 3.0)) -> list:
    """Run every population check on one problem; returns report entries.

    Each entry's ``worst_margin`` is non-negative exactly when the check
    passes.
    """
    d = prob.d
    w0 = prob.w0
    out = []
    gap = prob.consistency_gap()
    out.append(_check("sigma_consistent", d, seed, gap <= 1e-10, 1e-10 - gap))
    m0 = np.eye(d) - w0
    det_gap = abs(np.linalg.det(m0) - 1.0)
    out.append(_check("det_unit", d, seed, det_gap <= 1e-10, 1e-10 - det_gap))

    rng = np.random.default_rng(seed)
    gaps = []
    for w in sample_w1(rng, d, 20):
        h_direct = -np.linalg.slogdet(c_matrix(w, w0))[1]
        gaps.append(abs(h_direct - eval_logdet(w).value))
    out.append(_check("h_equals_minus_logdet_c", d, seed, max(gaps) <= 1e-10,
                      1e-10 - max(gaps)))

    grid = np.linspace(0.0, 50.0, 2001)
    curv = float(phi_second(grid, prob.c, d).min())
    out.append(_check("phi_convex", d, seed, curv > 0, curv))

    f0 = population_score(w0, prob)
    out.append(_check("score_at_truth", d, seed, abs(f0 - d) <= 1e-10, 1e-10 - abs(f0 - d)))

    for lam in lambdas:
        if lam < LAMBDA_STAR:
            continue
        rep = check_lower_bound(prob.with_multipliers(lam=lam), num_samples, seed)
        out.append(_check(f"lower_bound_lam{lam:g}", d, seed, rep.passed,
                          min(rep.min_bound_margin, rep.min_phi_margin, rep.min_amgm_margin) + 1e-9,
                          violations=rep.violations))

    res = stationarity_residual(w0, prob.with_multipliers(lam=LAMBDA_STAR))
    out.append(_check("truth_stationary", d, seed, res <= TOL_IDENTITY, TOL_IDENTITY - res))

    for lam in lambdas:
        rep = search_stationary_points(prob.with_multipliers(lam=lam), num_inits, seed)
        if lam > LAMBDA_STAR:
            margin = rep.summary["min_interior_residual"] - TOL_RECOVERY
        else:
            margin = TOL_STATIONARY - rep.summary["max_sv_spread_converged"]
        out.append(_check(f"stationary_search_lam{lam:g}", d, seed, rep.passed, margin,
                          **{k: float(v) for k, v in rep.summary.items()}))

    kkt = kkt_residual(w0, prob)
    worst = min(kkt.min_grad_entry + 1e-10, 1e-10 - kkt.complementarity,
                1e-10 - kkt.trace_identity_gap)
    out.append(_check("truth_kkt", d, seed, worst >= 0, worst,
                      score_bound_slack=kkt.score_bound_slack))

    rep = verify_acyclic_kkt_uniqueness(prob, num_candidates, seed)
    out.append(_check("acyclic_kkt_unique", d, seed, rep.passed,
                      TOL_RECOVERY - rep.max_certified_distance,
                      certified=rep.certified, excluded=rep.excluded))
    return out


def build_report(checks: list) -> dict:
    return {"passed": all(c["passed"] for c in checks), "checks": checks,
            "note": EPISTEMIC_NOTE}
