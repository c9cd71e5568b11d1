import numpy as np
import pytest

from cavmetro.atom import AtomParams
from cavmetro.params import SystemParams

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_params(g_tau=0.01, n_c=10.0, p_e=0.5, lam=0.5, kappa=1.0, tau=1e-7):
    return SystemParams.from_dimensionless(g_tau, n_c, AtomParams.from_excited(p_e, lam), kappa=kappa, tau=tau)


@pytest.fixture
def e1():
    return make_params(0.01)


@pytest.fixture
def e2():
    return make_params(0.03)


def random_density(rng, d, rank=None, support=None):
    """Random density matrix of size ``d``, optionally confined to the lowest ``support`` levels."""
    k = d if support is None else support
    rank = k if rank is None else rank
    x = rng.normal(size=(k, rank)) + 1j * rng.normal(size=(k, rank))
    m = x @ x.conj().T
    out = np.zeros((d, d), dtype=complex)
    out[:k, :k] = m / np.trace(m).real
    return out
