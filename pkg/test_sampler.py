import networkx as nx
import numpy as np
import pytest
from pydantic import ValidationError

from conftest import CHAIN_PROBABILITIES
from psy_ising.model.service import IsingService, canonical_states, from_zero_one
from psy_ising.model.views import IsingModel
from psy_ising.sampler.service import Sampler
from psy_ising.sampler.views import MirtGenConfig, NetworkGenConfig, SamplerConfig


def state_frequencies(rows: np.ndarray) -> np.ndarray:
	states = canonical_states(rows.shape[1])
	return np.array([np.mean(np.all(rows == state, axis=1)) for state in states])


def test_exact_sampler_matches_table(chain_model):
	data = Sampler().sample(chain_model, SamplerConfig(method='exact', n_samples=100_000, seed=42))
	assert data.rows.shape == (100_000, 3)
	np.testing.assert_allclose(state_frequencies(data.rows), CHAIN_PROBABILITIES, atol=0.01)


def total_variation(model: IsingModel, rows: np.ndarray) -> float:
	exact = IsingService().full_distribution(model).probabilities
	return float(0.5 * np.sum(np.abs(state_frequencies(rows) - exact)))


def test_gibbs_sampler_converges_to_model(chain_model):
	cfg = SamplerConfig(method='gibbs', n_samples=200_000, burn_in=1000, seed=7)
	data = Sampler().sample(chain_model, cfg)
	assert total_variation(chain_model, data.rows) < 0.01


@pytest.mark.slow
@pytest.mark.parametrize('p', [2, 3, 4])
def test_gibbs_sampler_on_random_models(random_model, p):
	for seed in range(3):
		model = random_model(p, seed=300 + 10 * p + seed, weight_scale=0.5)
		data = Sampler().sample(model, SamplerConfig(method='gibbs', n_samples=200_000, burn_in=1000, seed=seed))
		assert total_variation(model, data.rows) < 0.01


@pytest.mark.parametrize('method', ['exact', 'gibbs'])
def test_sampler_is_deterministic(chain_model, method):
	cfg = SamplerConfig(method=method, n_samples=200, burn_in=10, seed=123)
	first = Sampler().sample(chain_model, cfg)
	second = Sampler().sample(chain_model, cfg)
	assert np.array_equal(first.rows, second.rows)
	other = Sampler().sample(chain_model, cfg.model_copy(update={'seed': 124}))
	assert not np.array_equal(first.rows, other.rows)


@pytest.mark.parametrize('method', ['exact', 'gibbs'])
def test_strong_thresholds_force_positive_responses(method):
	model = IsingModel(tau=[10.0, 10.0], omega=np.zeros((2, 2)))
	data = Sampler().sample(model, SamplerConfig(method=method, n_samples=100, burn_in=5, seed=1))
	assert np.all(data.rows == 1)


def test_sampler_config_bounds():
	with pytest.raises(ValidationError):
		SamplerConfig(n_samples=0)
	with pytest.raises(ValidationError):
		SamplerConfig(thin=0)
	with pytest.raises(ValidationError):
		SamplerConfig(seed=-1)


def test_scale_free_model_ranges():
	cfg = NetworkGenConfig(p=10, attach_prob=0.05, coding='pm1', seed=5)
	model = Sampler.generate_scale_free_model(cfg)
	weights = model.omega[np.triu_indices(10, k=1)]
	nonzero = weights[weights != 0]
	assert len(nonzero) >= 9
	assert np.all((nonzero >= 0.75) & (nonzero <= 1.0))
	assert np.all((model.tau >= -3.0) & (model.tau <= -1.0))
	graph = nx.from_numpy_array((model.omega != 0).astype(int))
	assert nx.is_connected(graph)


def test_zero_one_network_is_recoded():
	raw = Sampler.generate_scale_free_model(NetworkGenConfig(p=10, coding='pm1', seed=5))
	model = Sampler.generate_scale_free_model(NetworkGenConfig(p=10, seed=5))
	np.testing.assert_allclose(model.omega, raw.omega / 4.0)
	np.testing.assert_allclose(model.tau, raw.tau / 2.0 + raw.omega.sum(axis=1) / 4.0)
	data = Sampler().sample(model, SamplerConfig(method='exact', n_samples=2000, seed=6))
	means = data.as_float().mean(axis=0)
	assert np.all(means > -0.95)
	assert np.all(np.std(data.rows, axis=0) > 0)


def test_zero_one_recoding_preserves_the_distribution():
	rng = np.random.default_rng(12)
	b = rng.uniform(-1.0, 1.0, size=4)
	w = np.triu(rng.uniform(-1.0, 1.0, size=(4, 4)), k=1)
	w = w + w.T
	model = from_zero_one(b, w)
	states = canonical_states(4)
	u = (states + 1) / 2
	log_pot = u @ b + 0.5 * np.sum((u @ w) * u, axis=1)
	expected = np.exp(log_pot) / np.exp(log_pot).sum()
	np.testing.assert_allclose(IsingService().full_distribution(model).probabilities, expected, rtol=1e-12)


def test_scale_free_skeleton_is_a_tree():
	model = Sampler.generate_scale_free_model(NetworkGenConfig(p=12, attach_prob=0.0, seed=9))
	assert len(model.edges()) == 11
	assert nx.is_tree(nx.from_numpy_array((model.omega != 0).astype(int)))


def test_scale_free_model_is_deterministic():
	cfg = NetworkGenConfig(p=8, seed=3)
	assert Sampler.generate_scale_free_model(cfg) == Sampler.generate_scale_free_model(cfg)


def test_network_config_rejects_inverted_ranges():
	with pytest.raises(ValidationError):
		NetworkGenConfig(weight_low=1.0, weight_high=0.5)


def test_mirt_dataset_shape_and_parameters():
	data, params = Sampler.generate_mirt_dataset(MirtGenConfig(n=2000, p=10, factor_corr=0.5, seed=11))
	assert data.rows.shape == (2000, 10)
	assert params.loading_pattern == [0] * 5 + [1] * 5
	assert params.mirt.a.shape == (10, 2)
	assert np.all(params.mirt.a.sum(axis=1) == 1.0)
	assert np.corrcoef(params.theta.T)[0, 1] == pytest.approx(0.5, abs=0.06)


def test_mirt_dataset_forced_responses():
	up = MirtGenConfig(n=50, p=4, theta_scale=0.0, difficulties=[-10.0] * 4, seed=2)
	data, _ = Sampler.generate_mirt_dataset(up)
	assert np.all(data.rows == 1)
	down = up.model_copy(update={'theta_shift': -20.0, 'difficulties': [0.0] * 4})
	data, _ = Sampler.generate_mirt_dataset(down)
	assert np.all(data.rows == -1)


def test_mirt_config_checks_correlation():
	with pytest.raises(ValidationError):
		MirtGenConfig(p=3, loading_pattern=[0, 1, 2], factor_corr=-0.6)
	with pytest.raises(ValidationError):
		MirtGenConfig(p=3, loading_pattern=[0, 1])
