import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from argraph.polyalg import MatrixPoly

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def rand_poly(rng, m, n, scale=1.0):
    B = scale * rng.standard_normal((n + 1, m, m))
    B[0] = 0.5 * (B[0] + B[0].T)
    return MatrixPoly(B)


def rand_sym(rng, d):
    A = rng.standard_normal((d, d))
    return A + A.T


def rand_lags(rng, m, n, N=400):
    """Sample lags from a short stable VAR(1) run; T(R) is positive definite."""
    A = 0.4 * rng.standard_normal((m, m)) / np.sqrt(m)
    y = np.zeros((N, m))
    for t in range(1, N):
        y[t] = A @ y[t - 1] + rng.standard_normal(m)
    B = np.stack([y[k:].T @ y[:N - k] for k in range(n + 1)]) / (N - n)
    return MatrixPoly(B)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when == "teardown":
        return
    if rep.when == "setup" and rep.passed:
        return
    num, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed and not detail:
        detail = rep.longrepr.reprcrash.message if hasattr(rep.longrepr, "reprcrash") else "error"
    _CRITERIA[num] = ("PASS" if rep.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[num]
        terminalreporter.write_line(f"{status} criterion {num:2d}: {title}  [{detail}]")
