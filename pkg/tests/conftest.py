import numpy as np
import pytest

from opzeros.models import ModelSpec, build_model


def make(variant, **params):
    return build_model(ModelSpec(variant, params))


@pytest.fixture(scope="session")
def free():
    return make("Free")


@pytest.fixture(scope="session")
def cheb_t():
    return make("ChebyshevT")


@pytest.fixture(scope="session")
def sqrt_weight():
    # |x|^{1/2} on [-1, 1]; enough coefficients for n <= 400
    return make("Weight", alpha=0.5, n_coeffs=1601)


def free_zeros(n):
    k = np.arange(n, 0, -1)
    return 2 * np.cos(k * np.pi / (n + 1))


_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """``criterion(num, ok, detail)`` prints and records one acceptance verdict."""

    def record(num, ok, detail=""):
        line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _CRITERIA[num] = line
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[num])
