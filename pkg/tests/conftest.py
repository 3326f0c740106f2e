import numpy as np
import pytest

from vote_dynamics.params import GlobalParamsV2
from vote_dynamics.simulate import SimConfig, make_corpus


@pytest.fixture(scope="session")
def small_corpus():
    """40 stories from the default generator, with ground truth."""
    cfg = SimConfig(n_stories=40, seed=123)
    records, truth = make_corpus(cfg)
    return cfg, records, truth


@pytest.fixture(scope="session")
def ref_g():
    return GlobalParamsV2.reference()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    """Store one acceptance line; printed in the terminal summary."""
    ACCEPTANCE[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
