"""Non-negative DAG learning with a log-determinant acyclicity constraint."""

from .acyclicity import AcyclicityEval, LogDet, MatExp, check_domain, eval_logdet, eval_matexp
from .graphs import DagSpec, generate_dag, is_acyclic, threshold_support
from .metrics import MetricsReport, evaluate_estimate, nerr, shd, support_confusion
from .sem import Covariance, Dataset, population_covariance, sample_covariance, simulate
from .solver import SolveResult, SolverConfig, SolverState, solve

__all__ = [
    "AcyclicityEval", "LogDet", "MatExp", "check_domain", "eval_logdet", "eval_matexp",
    "DagSpec", "generate_dag", "is_acyclic", "threshold_support",
    "MetricsReport", "evaluate_estimate", "nerr", "shd", "support_confusion",
    "Covariance", "Dataset", "population_covariance", "sample_covariance", "simulate",
    "SolveResult", "SolverConfig", "SolverState", "solve",
]
