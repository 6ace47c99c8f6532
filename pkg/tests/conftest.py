"""Shared fixtures plus the acceptance-criteria terminal summary hook.

Solver columns used by several test modules are built once per session;
everything here is unit-test scale (n <= 129), the acceptance module
builds its own production-scale columns.
"""
import numpy as np
import pytest

from polyheat import Grid2D, kernel_column, model_p1

# criterion number -> (name, passed, detail); filled by test_acceptance
_ACCEPTANCE = {}


def record_criterion(num: int, name: str, passed: bool, detail: str = ""):
    _ACCEPTANCE[num] = (name, bool(passed), detail)


@pytest.fixture
def acceptance():
    """Recorder for one acceptance criterion's pass/fail line."""
    return record_criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        name, ok, detail = _ACCEPTANCE[num]
        line = f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {name}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)


def mehler_kernel(s, z, tau):
    """Exact heat kernel of the tau|z|^2 weight from a delta at 0.

    H(s, z, 0) = (tau/pi) e^(-tau s) / sinh(tau s) * exp(-tau coth(tau s) |z|^2);
    reduces to the free kernel as tau -> 0 and to (2tau/pi) e^(-2 tau s) e^(-tau|z|^2)
    for large s (ground level 2 tau).  Oracle for tests only -- the package
    never special-cases the quadratic weight.
    """
    ts = tau * s
    return (tau / np.pi) * np.exp(-ts) / np.sinh(ts) \
        * np.exp(-tau / np.tanh(ts) * np.abs(z) ** 2)


@pytest.fixture(scope="session")
def mehler():
    return mehler_kernel


@pytest.fixture(scope="session")
def landau_column():
    """|z|^2, tau=1 kernel column at unit-test scale."""
    return kernel_column(model_p1(1), 1.0, Grid2D(L=6.0, n=129), 0j,
                         (0.25, 0.5, 1.0), dt=2e-3, rel_dt=0.02)


@pytest.fixture(scope="session")
def tau4_column():
    """|z|^2, tau=4 column reaching past s = 10 mu(0, 1/4)^2 = 2.5."""
    return kernel_column(model_p1(1), 4.0, Grid2D(L=4.0, n=97), 0j,
                         tuple(np.linspace(0.3, 3.0, 12)), dt=2e-3, rel_dt=0.02)
