import numpy as np
import pytest

from compql.model import CompositionalDataset, logit_probabilities

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_psd(rng, D, scale=1.0):
    A = rng.normal(size=(D, D))
    return scale * (A @ A.T) / D


def random_dataset(rng, N=60, D=3, p=2, noise=0.1, B=None):
    """Lognormal multiplicative-error data from a random logit model."""
    X = rng.normal(size=(N, p))
    if B is None:
        B = rng.normal(scale=0.7, size=(D, p + 1))
    pi = logit_probabilities(B, X)
    U = np.exp(rng.normal(scale=np.sqrt(noise), size=(N, D)) - noise / 2)
    tau = rng.uniform(1, 100, size=N)
    return CompositionalDataset(tau[:, None] * pi * U, X)
