import numpy as np
import pytest

from patchgraph import autodiff as ad


def central_diff(f, x, eps=1e-6):
    """Central differences of scalar ``f(x)`` for every entry of array ``x``."""
    x = np.array(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f(x)
        flat[i] = orig - eps
        down = f(x)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * eps)
    return grad


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else np.linalg.norm(a - b) / scale


def analytic_grad(build, x):
    """Gradient of ``build(Tensor(x))`` (a scalar tensor) w.r.t. ``x`` via backprop."""
    t = ad.Tensor(x, requires_grad=True)
    build(t).backward()
    return t.grad


def check_grad(build, x, eps=1e-6):
    numeric = central_diff(lambda arr: build(ad.Tensor(arr)).item(), x, eps)
    return rel_err(analytic_grad(build, x), numeric)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(number, passed, detail)``."""
    def record(number, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
