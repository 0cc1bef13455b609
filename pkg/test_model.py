import numpy as np
import pytest
from pydantic import ValidationError

from conftest import CHAIN_POTENTIALS, CHAIN_PROBABILITIES, CHAIN_Z
from psy_ising.model.service import IsingService, canonical_states
from psy_ising.model.views import (
	BinaryDataset,
	DimensionError,
	EnumerationCapError,
	IsingModel,
	ModelConfig,
	PotentialSet,
)


@pytest.fixture
def service():
	return IsingService()


def test_canonical_state_order():
	states = canonical_states(3)
	assert states.shape == (8, 3)
	assert states[0].tolist() == [-1, -1, -1]
	assert states[1].tolist() == [1, -1, -1]
	assert states[2].tolist() == [-1, 1, -1]
	assert states[7].tolist() == [1, 1, 1]


def test_hamiltonian_matches_table(service, chain_model):
	assert service.hamiltonian(chain_model, [-1, 1, -1]) == pytest.approx(0.9)
	assert service.hamiltonian(chain_model, [-1, -1, -1]) == pytest.approx(-1.3)
	assert np.exp(-service.hamiltonian(chain_model, [-1, -1, -1])) == pytest.approx(3.6693, abs=1e-4)


def test_hamiltonian_of_empty_model(service):
	model = IsingModel(tau=np.zeros(4), omega=np.zeros((4, 4)))
	assert service.hamiltonian(model, [1, -1, 1, 1]) == 0.0


def test_hamiltonian_rejects_wrong_length(service, chain_model):
	with pytest.raises(DimensionError):
		service.hamiltonian(chain_model, [1, 1])
	with pytest.raises(DimensionError):
		service.hamiltonian(chain_model, [1, 0, 1])


def test_full_distribution_reproduces_table(service, chain_model):
	dist = service.full_distribution(chain_model)
	assert dist.z == pytest.approx(CHAIN_Z, abs=1e-3)
	np.testing.assert_allclose(dist.potentials, CHAIN_POTENTIALS, atol=5e-4)
	np.testing.assert_allclose(dist.probabilities, CHAIN_PROBABILITIES, atol=5e-4)
	np.testing.assert_allclose(dist.probabilities, dist.potentials / dist.z, rtol=1e-12)
	assert np.sum(dist.probabilities) == pytest.approx(1.0, abs=1e-12)


def test_partition_function_and_state_probability(service, chain_model):
	assert service.partition_function(chain_model) == pytest.approx(10.4425, abs=1e-4)
	assert service.log_partition_function(chain_model) == pytest.approx(np.log(service.partition_function(chain_model)), rel=1e-12)
	assert service.state_probability(chain_model, [1, 1, 1]) == pytest.approx(0.1928, abs=1e-4)


def test_partition_function_of_independent_nodes(service):
	model = IsingModel(tau=[0.3, -0.2], omega=np.zeros((2, 2)))
	expected = (2 * np.cosh(0.3)) * (2 * np.cosh(-0.2))
	assert service.partition_function(model) == pytest.approx(expected, rel=1e-12)


def test_enumeration_cap_is_enforced(chain_model):
	capped = IsingService(ModelConfig(enumeration_cap=2))
	with pytest.raises(EnumerationCapError) as info:
		capped.partition_function(chain_model)
	assert info.value.p == 3
	assert 'cap' in str(info.value)
	with pytest.raises(EnumerationCapError):
		capped.full_distribution(chain_model)


def test_conditional_node(service, chain_model):
	assert service.conditional_node(chain_model, 1, [1, 1]) == pytest.approx(0.8581, abs=1e-4)
	assert service.conditional_node(chain_model, 0, [-1, 1]) == pytest.approx(0.2315, abs=1e-4)
	with pytest.raises(DimensionError):
		service.conditional_node(chain_model, 3, [1, 1])


def test_conditional_node_agrees_with_enumeration(service, random_model):
	model = random_model(4, seed=3)
	dist = service.full_distribution(model)
	x = np.array([1, -1, -1, 1])
	up, down = x.copy(), x.copy()
	up[2], down[2] = 1, -1
	expected = dist.probability_of(up) / (dist.probability_of(up) + dist.probability_of(down))
	assert service.conditional_node(model, 2, np.delete(x, 2)) == pytest.approx(expected, rel=1e-10)


def test_conditional_probabilities_matrix(service, chain_model):
	rows = canonical_states(3)
	matrix = service.conditional_probabilities(chain_model, rows)
	for r, row in enumerate(rows):
		for i in range(3):
			assert matrix[r, i] == pytest.approx(service.conditional_node(chain_model, i, np.delete(row, i)))


def test_marginalize(service, chain_model):
	dist = service.full_distribution(chain_model)
	marginal = service.marginalize(dist, [1])
	assert marginal.probabilities[1] == pytest.approx(0.4049, abs=5e-4)
	assert service.marginalize(dist, [0, 1, 2]).probabilities == pytest.approx(dist.probabilities)
	with pytest.raises(ValueError):
		service.marginalize(dist, [])


def test_chain_is_markov(service, chain_model):
	"""Nodes 1 and 3 are independent given node 2"""
	dist = service.full_distribution(chain_model)
	for middle in (-1, 1):
		joint = np.zeros((2, 2))
		for state, prob in zip(dist.states, dist.probabilities):
			if state[1] == middle:
				joint[(state[0] + 1) // 2, (state[2] + 1) // 2] += prob
		joint /= joint.sum()
		np.testing.assert_allclose(joint, np.outer(joint.sum(axis=1), joint.sum(axis=0)), atol=1e-12)


def test_condition_pair_and_odds_ratio(service, chain_model):
	table = service.condition_pair(chain_model, 0, 1, [1])
	assert table.sum() == pytest.approx(1.0)
	odds = table[1, 1] * table[0, 0] / (table[1, 0] * table[0, 1])
	assert odds == pytest.approx(np.exp(2.0), rel=1e-10)
	assert service.conditional_odds_ratio(chain_model, 0, 1) == pytest.approx(np.exp(2.0))
	assert service.conditional_odds_ratio(chain_model, 0, 2) == pytest.approx(1.0)
	with pytest.raises(DimensionError):
		service.condition_pair(chain_model, 1, 1, [1])


def test_entropy(service, chain_model):
	probs = service.full_distribution(chain_model).probabilities
	assert service.entropy(chain_model) == pytest.approx(-np.sum(probs * np.log(probs)), rel=1e-12)
	uniform = IsingModel(tau=np.zeros(3), omega=np.zeros((3, 3)))
	assert service.entropy(uniform) == pytest.approx(3 * np.log(2))


def test_temperature_sweep_magnetizes(service, chain_model):
	aligned = IsingModel(tau=np.zeros(3), omega=chain_model.omega)
	points = service.temperature_sweep(aligned, [0.1, 1.0, 5.0])
	entropies = [point.entropy for point in points]
	magnetizations = [point.mean_abs_magnetization for point in points]
	assert entropies == sorted(entropies, reverse=True)
	assert magnetizations == sorted(magnetizations)
	assert magnetizations[-1] > 0.95
	assert all(abs(point.mean_magnetization) < 1e-12 for point in points)


def test_beta_scales_the_distribution(service, chain_model):
	hot = IsingModel(tau=chain_model.tau, omega=chain_model.omega, beta=2.0)
	cold = hot.at_unit_temperature()
	np.testing.assert_allclose(
		service.full_distribution(hot).probabilities, service.full_distribution(cold).probabilities, rtol=1e-12
	)


def test_potentials_round_trip(service, chain_model):
	potentials = service.to_potentials(chain_model)
	assert potentials.node_potentials[0] == pytest.approx([np.exp(0.1), np.exp(-0.1)])
	assert np.all(potentials.pair_potentials[(0, 2)] == 1.0)
	assert service.from_potentials(potentials).allclose(chain_model, atol=1e-12)


@pytest.mark.parametrize('beta', [0.5, 2.0, 3.7])
def test_potentials_round_trip_keeps_beta(service, chain_model, beta):
	model = IsingModel(tau=chain_model.tau, omega=chain_model.omega, beta=beta)
	potentials = service.to_potentials(model)
	assert potentials.beta == beta
	assert potentials.node_potentials[0, 1] == pytest.approx(np.exp(-0.1 * beta))
	back = service.from_potentials(potentials)
	assert back.beta == beta
	assert back.allclose(model, atol=1e-12)


def test_potentials_identification_is_checked(service):
	bad = PotentialSet(node_potentials=np.array([[1.0, 2.0]]), pair_potentials={})
	with pytest.raises(ValueError):
		service.from_potentials(bad)


def test_loglinear_view(service, chain_model):
	view = service.loglinear_view(chain_model, 1000)
	assert view.expected.sum() == pytest.approx(1000)
	assert view.nu == pytest.approx(np.log(1000) - np.log(10.4425), abs=1e-4)
	with pytest.raises(ValueError):
		service.loglinear_view(chain_model, 0)


def test_model_invariants():
	with pytest.raises(ValidationError):
		IsingModel(tau=[0.0, 0.0], omega=[[0.0, 1.0], [0.5, 0.0]])
	with pytest.raises(ValidationError):
		IsingModel(tau=[np.inf, 0.0])
	with pytest.raises(ValidationError):
		IsingModel(tau=[0.0], beta=0.0)
	model = IsingModel(tau=[0.0, 0.0], omega=[[3.0, 0.2], [0.2, -1.0]])
	assert np.all(np.diag(model.omega) == 0)
	assert model.omega[0, 1] == 0.2
	with pytest.raises(ValueError):
		model.omega[0, 1] = 1.0


def test_model_file_round_trip(tmp_path, chain_model):
	path = tmp_path / 'models' / 'chain.json'
	chain_model.save_to_file(path)
	assert IsingModel.load_from_file(path) == chain_model


def test_dataset_recoding_and_csv(tmp_path):
	data = BinaryDataset.from_array([[0, 1], [1, 1], [0, 0]])
	assert data.rows.tolist() == [[-1, 1], [1, 1], [-1, -1]]
	path = tmp_path / 'data.csv'
	data.save_csv(path)
	loaded = BinaryDataset.load_csv(path)
	assert loaded.rows.tolist() == data.rows.tolist()
	assert loaded.names() == ['x1', 'x2']
	with pytest.raises(ValidationError):
		BinaryDataset(rows=[[1, 2]])


def test_extreme_parameters_stay_normalized(service):
	model = IsingModel(tau=np.full(12, 70.0))
	dist = service.full_distribution(model)
	assert np.all(np.isfinite(dist.probabilities))
	assert dist.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
	assert dist.probabilities[-1] == pytest.approx(1.0)
	assert dist.log_z == pytest.approx(840.0)
	assert service.log_partition_function(model) == pytest.approx(840.0)
	assert service.state_probability(model, np.ones(12)) == pytest.approx(1.0)
	assert service.state_probability(model, -np.ones(12)) == 0.0
	assert np.isfinite(service.entropy(model))
	assert service.marginalize(dist, [3]).probabilities == pytest.approx([0.0, 1.0])
	assert np.isfinite(service.loglinear_view(model, 10).nu)


@pytest.mark.parametrize('p', range(1, 9))
def test_random_models_are_normalized(service, random_model, p):
	for seed in range(25):
		dist = service.full_distribution(random_model(p, seed=1000 * p + seed))
		assert np.sum(dist.probabilities) == pytest.approx(1.0, abs=1e-12)


def test_condition_pair_factorizes_without_an_edge(service):
	rng = np.random.default_rng(2024)
	for case in range(200):
		p = int(rng.integers(3, 7))
		k, l = (int(v) for v in rng.choice(p, size=2, replace=False))
		omega = np.triu(rng.uniform(-0.3, 0.3, size=(p, p)), k=1)
		omega = omega + omega.T
		omega[k, l] = omega[l, k] = 0.0
		model = IsingModel(tau=rng.uniform(-0.5, 0.5, size=p), omega=omega)
		x_rest = rng.choice([-1, 1], size=p - 2)
		table = service.condition_pair(model, k, l, x_rest)
		assert np.max(np.abs(table - np.outer(table.sum(axis=1), table.sum(axis=0)))) < 1e-12

		omega[k, l] = omega[l, k] = rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 0.5)
		coupled = service.condition_pair(IsingModel(tau=model.tau, omega=omega), k, l, x_rest)
		assert np.max(np.abs(coupled - np.outer(coupled.sum(axis=1), coupled.sum(axis=0)))) > 1e-6


def test_entropy_decreases_with_beta(service, random_model):
	for seed in range(200):
		model = random_model(int(2 + seed % 4), seed=seed)
		entropies = [
			service.entropy(IsingModel(tau=model.tau, omega=model.omega, beta=beta)) for beta in (0.1, 0.5, 1.0, 2.0, 5.0)
		]
		assert all(later <= earlier + 1e-12 for earlier, later in zip(entropies, entropies[1:]))


def test_diagonal_is_irrelevant(service, random_model):
	for seed in range(200):
		model = random_model(4, seed=seed)
		shifted = IsingModel(tau=model.tau, omega=model.omega + (seed % 7 - 3) * np.eye(4))
		np.testing.assert_allclose(
			service.full_distribution(shifted).probabilities, service.full_distribution(model).probabilities, rtol=1e-12
		)
