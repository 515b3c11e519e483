import warnings

import numpy as np
import pytest
from hypothesis import strategies as st

from blockjacobi.model import explicit


def random_block_a(rng, d, max_cond=10.0):
    """Random complex block with condition number at most ``max_cond``."""
    u, _ = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    v, _ = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    s = rng.uniform(1.0, max_cond, d) if d > 1 else rng.uniform(0.5, 2.0, 1)
    s = s / s.max() * rng.uniform(0.5, 2.0)
    return u @ np.diag(s) @ v


def random_block_b(rng, d, scale=1.0):
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * (x + x.conj().T) / 2


def random_model(rng, d, length=8):
    """Explicit model cycling through ``length`` random blocks."""
    a = [random_block_a(rng, d) for _ in range(length)]
    b = [random_block_b(rng, d) for _ in range(length)]
    return explicit(a, b, tail="periodic", name=f"random(d={d})")


@st.composite
def models(draw, dims=(1, 2, 3)):
    d = draw(st.sampled_from(dims))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return random_model(np.random.default_rng(seed), d)


upper_half = st.builds(complex, st.floats(-2.5, 2.5), st.floats(0.05, 2.0))


@pytest.fixture
def rng():
    return np.random.default_rng(0x5EED)


@pytest.fixture(autouse=True)
def _quiet_regime_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*outside the regime.*")
        yield


ACCEPTANCE_LINES = []


def record_acceptance(criterion: str, passed: bool, summary: str, seconds: float) -> None:
    """Collect one pass/fail line per acceptance criterion for the terminal summary."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {summary} ({seconds:.2f} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
