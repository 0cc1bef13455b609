import os
import sys

import numpy as np
import pytest

from psy_ising.logging_config import setup_logging

# Get the absolute path to the project root
project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)

setup_logging()

from psy_ising.model.views import IsingModel  # noqa: E402

# Three nodes in a chain, tau = -0.1, omega_12 = omega_23 = 0.5
CHAIN_POTENTIALS = [3.6693, 1.1052, 0.4066, 0.9048, 1.1052, 0.3329, 0.9048, 2.0138]
CHAIN_PROBABILITIES = [0.3514, 0.1058, 0.0389, 0.0866, 0.1058, 0.0319, 0.0866, 0.1928]
CHAIN_Z = 10.443


@pytest.fixture
def chain_model() -> IsingModel:
	omega = np.zeros((3, 3))
	omega[0, 1] = omega[1, 0] = 0.5
	omega[1, 2] = omega[2, 1] = 0.5
	return IsingModel(tau=[-0.1, -0.1, -0.1], omega=omega)


def make_random_model(p: int, seed: int, weight_scale: float = 1.0, tau_scale: float = 1.0) -> IsingModel:
	rng = np.random.default_rng(seed)
	omega = np.triu(rng.uniform(-weight_scale, weight_scale, size=(p, p)), k=1)
	return IsingModel(tau=rng.uniform(-tau_scale, tau_scale, size=p), omega=omega + omega.T)


@pytest.fixture
def random_model():
	return make_random_model


@pytest.fixture
def chain_model_file(tmp_path, chain_model):
	path = tmp_path / 'chain.json'
	chain_model.save_to_file(path)
	return path
