import numpy as np
import pytest

from kpo3 import fock

RESULTS = []


def record(criterion, ok, detail):
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)


def cat_state(dim, alpha, legs):
    """Normalised equal superposition of ``legs`` coherent states on a circle."""
    psi = sum(fock.coherent(dim, alpha * np.exp(2j * np.pi * k / legs)) for k in range(legs))
    return psi / np.linalg.norm(psi)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
