import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def central_gradient(fn, p, h=1e-5):
    """Central differences of a scalar function of one point."""
    g = np.zeros(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        g[k] = (fn(p + e) - fn(p - e)) / (2 * h)
    return g


def central_hessian(grad_fn, p, h=1e-4):
    hess = np.zeros((3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        hess[:, k] = (grad_fn(p + e) - grad_fn(p - e)) / (2 * h)
    return hess


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12))


# acceptance criteria register (number, passed, detail) here; the summary
# prints one line per criterion after the run
ACCEPTANCE: list = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criterion (slow)")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
