import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_design(rng, n, p, rho=0.0):
    """Standardized-ish Gaussian design with optional equicorrelation."""
    Z = rng.standard_normal((n, p))
    if rho:
        Z = np.sqrt(1 - rho) * Z + np.sqrt(rho) * rng.standard_normal((n, 1))
    return Z


# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def record_acceptance(cid, passed, detail):
    ACCEPTANCE[cid] = (bool(passed), detail)
    print(f"{cid}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c[2:])):
        passed, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{cid}: {'PASS' if passed else 'FAIL'}  {detail}")
