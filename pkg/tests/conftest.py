import numpy as np
import pytest

from ev_discharge.dataset import CorpusSettings, NoiseConfig, build_corpus
from ev_discharge.hybrid import fit_residual_model
from ev_discharge.network import TrainConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_corpus():
    return build_corpus(settings=CorpusSettings(n_trips=300, seed=11, n_steps=200))


@pytest.fixture(scope="session")
def small_model(small_corpus):
    model, log = fit_residual_model(small_corpus, TrainConfig(seed=11, max_epochs=40, patience=10))
    return model, log


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
