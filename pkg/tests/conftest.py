import numpy as np
import pytest

from twostep_sls.bench import ExperimentConfig, DEFAULT_CONFIG
from twostep_sls.clsyn import LqrWeights, synthesize_clmaps
from twostep_sls.lti import LtiSystem


def random_system(rng, n, m, radius=0.9):
    """Random (A, B) with A scaled to the given spectral radius."""
    A = rng.standard_normal((n, n))
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    A *= radius / rho if rho > 0 else 1.0
    B = rng.standard_normal((n, m))
    return LtiSystem(A, B)


def random_clmaps(rng, n, m, T=None, radius=0.9):
    sys = random_system(rng, n, m, radius)
    T = T if T is not None else n + 2
    return sys, synthesize_clmaps(sys, T, LqrWeights.identity(n, m))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def chain_cfg():
    return ExperimentConfig.from_text(DEFAULT_CONFIG)


@pytest.fixture(scope="session")
def chain_sys(chain_cfg):
    return chain_cfg.system()


@pytest.fixture(scope="session")
def chain_weights(chain_cfg):
    return chain_cfg.weights()


@pytest.fixture(scope="session")
def chain_cl(chain_sys, chain_weights):
    return synthesize_clmaps(chain_sys, 20, chain_weights)


# one summary line per acceptance criterion, shown after the run
ACCEPTANCE_LINES = {}


def record_acceptance(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
