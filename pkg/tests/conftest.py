import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def nonneg_in_domain(rng, d, radius=0.9, density=0.6):
    """Random non-negative matrix with zero diagonal and spectral radius <= radius."""
    w = rng.uniform(0, 1, (d, d)) * (rng.random((d, d)) < density)
    np.fill_diagonal(w, 0.0)
    rho = np.abs(np.linalg.eigvals(w)).max()
    if rho > radius:
        w *= radius / rho
    return w


def central_difference(f, x, step=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = step
        g[idx] = (f(x + e) - f(x - e)) / (2 * step)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
