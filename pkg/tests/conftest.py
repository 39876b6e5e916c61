import numpy as np
import pytest

from prilo.generator import random_net


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_net():
    return random_net([3, 6, 5, 8], ["relu", "tanh", "sigmoid"], seed=7)


def direct_dft2(img):
    """O(n^2) DFT by explicit summation; independent of numpy.fft."""
    h, w = img.shape
    j = np.arange(h)
    k = np.arange(w)
    out = np.zeros((h, w), dtype=complex)
    for u in range(h):
        for v in range(w):
            phase = np.exp(-2j * np.pi * (u * j[:, None] / h + v * k[None, :] / w))
            out[u, v] = np.sum(img * phase)
    return out


# --- acceptance reporting ------------------------------------------------------

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record (and print) one PASS/FAIL line per acceptance criterion."""

    def record(number, title, passed, detail):
        line = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        _CRITERIA[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
