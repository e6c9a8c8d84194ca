import numpy as np
import pytest

from mimorelay.cmatrix import RngStream, sample_gaussian_matrix
from mimorelay.quantizer import Codebook

_ACCEPTANCE_LINES = []


def record_criterion(name, passed, detail=""):
    """Log one acceptance line; printed together at the end of the session."""
    line = f"{'PASS' if passed else 'FAIL'}  {name}"
    if detail:
        line += f"  ({detail})"
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def draw_channels(M, N, seed, stream=0):
    gen = RngStream(seed, stream).generator()
    return sample_gaussian_matrix(N, M, gen), sample_gaussian_matrix(N, N, gen), gen


def planted_codebook(v, bits, gen):
    """RVQ codebook with ``v`` itself planted at a random index (zero quantization error)."""
    x = gen.standard_normal((2, 2**bits, v.size))
    c = x[0] + 1j * x[1]
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    c[gen.integers(2**bits)] = v
    return Codebook(v.size, bits, c)


def within_3se(samples, target):
    """True when ``mean(samples)`` is within 3 standard errors of ``target``."""
    samples = np.asarray(samples, dtype=float)
    se = np.std(samples, ddof=1) / np.sqrt(samples.size)
    return abs(np.mean(samples) - target) <= 3 * se, np.mean(samples), se


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
