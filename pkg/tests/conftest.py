import numpy as np
import pytest

from fedsgda.problems import (
    AucProblem,
    AucProblemConfig,
    SyntheticProblem,
    SyntheticProblemConfig,
    generate_auc_split,
    generate_synthetic,
    lipschitz_constants,
)


@pytest.fixture(scope="session")
def synth():
    cfg = SyntheticProblemConfig()
    datasets = generate_synthetic(cfg, 7)
    problem = SyntheticProblem(cfg)
    return problem, datasets, lipschitz_constants(problem, datasets, seed=7, probes=3)


@pytest.fixture(scope="session")
def auc():
    cfg = AucProblemConfig(d=6, num_clients=8, samples_per_client=30)
    split = generate_auc_split(cfg, 3)
    problem = AucProblem.from_data(cfg, split.clients)
    return problem, split.clients, split.test


@pytest.fixture
def gen():
    return np.random.default_rng(12345)
