import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.integrate import solve_ivp

from geoatt.linalg import ProjectionPair
from geoatt.scenario import paper_sec8_R0

settings.register_profile(
    "geoatt", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("geoatt")

S2, S3, S6 = np.sqrt(2.0), np.sqrt(3.0), np.sqrt(6.0)

# filled by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE: dict = {}


@pytest.fixture
def sec8_R0():
    return paper_sec8_R0()


@pytest.fixture
def sec8_proj():
    return ProjectionPair(np.diag([0.0, 1.0, 0.0]), 1.0)


def closed_loop_oracle(R0, proj, times, rtol=1e-13, atol=1e-14):
    """Reference solution of the closed loop by scipy's DOP853 in the ambient space."""
    P, Q, k = proj.P, proj.Q, proj.k
    n = P.shape[0]

    def f(t, y):
        R = y.reshape(n, n)
        return (P - R @ P @ R + k * R @ Q @ (R.T - R) @ Q).ravel()

    times = np.asarray(times, dtype=float)
    sol = solve_ivp(f, (0.0, times[-1]), np.asarray(R0, float).ravel(), method="DOP853", rtol=rtol, atol=atol, t_eval=times)
    return sol.y.T.reshape(-1, n, n)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {msg}")
