import numpy as np
import pytest

from isstop import _backend


def two_pass(hvals, weights):
    """Reference sums computed directly from stored samples."""
    h = np.atleast_2d(np.asarray(hvals, dtype=float))
    if h.shape[0] != len(weights):
        h = h.T
    w = np.asarray(weights, dtype=float)
    return {
        "n": len(w),
        "Sw": w.sum(),
        "Sw2": (w**2).sum(),
        "Swh": w @ h,
        "Sw2h": (w**2) @ h,
        "Sawh": w @ np.abs(h),
        "Swhh": (h * w[:, None]).T @ h,
        "Sw2hh": (h * (w**2)[:, None]).T @ h,
    }


KERNELS = {"fallback": _backend.fallback_accumulate_into}
if _backend.compiled_accumulate_into is not None:
    KERNELS["compiled"] = _backend.compiled_accumulate_into


@pytest.fixture(params=sorted(KERNELS))
def kernel(request):
    return KERNELS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# One line per acceptance criterion, printed after the run.
ACCEPTANCE_LINES = {}


def record_criterion(number, title, ok, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    print(ACCEPTANCE_LINES[number])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
