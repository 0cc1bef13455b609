import logging
from typing import Any, Iterable, Optional, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from psy_ising.model.views import (
	DimensionError,
	EnumerationCapError,
	IsingModel,
	LoglinearView,
	ModelConfig,
	PotentialSet,
	StateDistribution,
	TemperaturePoint,
	check_node,
	check_state,
)
from psy_ising.utils import time_execution_sync

logger = logging.getLogger(__name__)

IDENTIFICATION_TOL = 1e-9


def canonical_states(p: int) -> np.ndarray:
	"""All 2^p states, node 0 fastest-varying, -1 before +1"""
	codes = np.arange(2**p, dtype=np.int64)[:, None]
	bits = (codes >> np.arange(p, dtype=np.int64)) & 1
	return (2 * bits - 1).astype(np.int8)


def pair_energy(omega: np.ndarray, x: np.ndarray) -> np.ndarray:
	"""sum_{i<j} omega_ij x_i x_j for one state or a matrix of states (rows)"""
	x = np.asarray(x, dtype=float)
	return 0.5 * np.sum((x @ omega) * x, axis=-1)


def energy(model: IsingModel, x: np.ndarray) -> np.ndarray:
	"""-H(x) = sum_i tau_i x_i + sum_{i<j} omega_ij x_i x_j"""
	x = np.asarray(x, dtype=float)
	return x @ model.tau + pair_energy(model.omega, x)


def from_zero_one(thresholds: Any, weights: Any) -> IsingModel:
	"""
	The -1/+1 model of a network written for 0/1 responses u, Pr(u) proportional to
	exp(sum_i b_i u_i + sum_{i<j} w_ij u_i u_j): omega = w / 4, tau_i = b_i / 2 + sum_j w_ij / 4.
	"""
	thresholds = np.asarray(thresholds, dtype=float)
	weights = np.array(weights, dtype=float)
	np.fill_diagonal(weights, 0.0)
	return IsingModel(tau=thresholds / 2.0 + weights.sum(axis=1) / 4.0, omega=weights / 4.0)


class IsingService:
	"""Exact computations on an Ising model by enumeration of its state space"""

	def __init__(self, config: Optional[ModelConfig] = None):
		self.config = config or ModelConfig()

	def check_cap(self, p: int) -> None:
		if p > self.config.enumeration_cap:
			raise EnumerationCapError(p, self.config.enumeration_cap)

	def hamiltonian(self, model: IsingModel, x: Any) -> float:
		x = check_state(x, model.p)
		return float(-energy(model, x))

	def log_potentials(self, model: IsingModel) -> np.ndarray:
		"""-beta * H(x) for every state in canonical order"""
		self.check_cap(model.p)
		return model.beta * energy(model, canonical_states(model.p))

	def partition_function(self, model: IsingModel) -> float:
		"""Z itself; inf once it exceeds the float range, use log_partition_function there"""
		with np.errstate(over='ignore'):
			return float(np.exp(self.log_partition_function(model)))

	def log_partition_function(self, model: IsingModel) -> float:
		return float(logsumexp(self.log_potentials(model)))

	def state_probability(self, model: IsingModel, x: Any) -> float:
		x = check_state(x, model.p)
		log_z = self.log_partition_function(model)
		return float(np.exp(model.beta * energy(model, x) - log_z))

	@time_execution_sync('--full_distribution')
	def full_distribution(self, model: IsingModel) -> StateDistribution:
		log_pot = self.log_potentials(model)
		log_z = float(logsumexp(log_pot))
		with np.errstate(over='ignore'):
			potentials = np.exp(log_pot)
		return StateDistribution(
			states=canonical_states(model.p),
			potentials=potentials,
			probabilities=np.exp(log_pot - log_z),
			log_z=log_z,
			nodes=tuple(range(model.p)),
		)

	def conditional_node(self, model: IsingModel, i: int, x_rest: Any) -> float:
		"""Pr(X_i = +1 | x_rest); x_rest lists the other P-1 nodes in index order"""
		i = check_node(i, model.p)
		x_rest = check_state(x_rest, model.p - 1)
		weights = np.delete(model.omega[i], i)
		eta = model.tau[i] + float(weights @ x_rest)
		return float(expit(2.0 * model.beta * eta))

	def conditional_probabilities(self, model: IsingModel, rows: np.ndarray) -> np.ndarray:
		"""N x P matrix of Pr(X_i = +1 | rest of row r)"""
		rows = np.asarray(rows, dtype=float)
		if rows.ndim != 2 or rows.shape[1] != model.p:
			raise DimensionError(f'rows must be N x {model.p}, got shape {rows.shape}')
		return expit(2.0 * model.beta * (model.tau + rows @ model.omega))

	def marginalize(self, dist: StateDistribution, keep: Iterable[int]) -> StateDistribution:
		keep = sorted(set(int(k) for k in keep))
		if not keep:
			raise ValueError('cannot marginalize to an empty set of nodes')
		missing = [k for k in keep if k not in dist.nodes]
		if missing:
			raise DimensionError(f'nodes {missing} are not part of the distribution over {list(dist.nodes)}')
		positions = [dist.nodes.index(k) for k in keep]
		bits = (dist.states[:, positions] == 1).astype(np.int64)
		codes = bits @ (np.int64(1) << np.arange(len(keep), dtype=np.int64))
		probabilities = np.bincount(codes, weights=dist.probabilities, minlength=2 ** len(keep))
		with np.errstate(over='ignore', divide='ignore'):
			potentials = np.exp(np.log(probabilities) + dist.log_z)
		return StateDistribution(
			states=canonical_states(len(keep)),
			potentials=potentials,
			probabilities=probabilities,
			log_z=dist.log_z,
			nodes=tuple(keep),
		)

	def condition_pair(self, model: IsingModel, k: int, l: int, x_rest: Any) -> np.ndarray:
		"""
		2x2 table Pr(X_k = a, X_l = b | x_rest), indexed [a, b] with 0 for -1 and 1 for +1.
		x_rest lists the remaining P-2 nodes in index order.
		"""
		k = check_node(k, model.p)
		l = check_node(l, model.p)
		if k == l:
			raise DimensionError('condition_pair needs two distinct nodes')
		x_rest = check_state(x_rest, model.p - 2).astype(float)
		rest = [m for m in range(model.p) if m not in (k, l)]
		field_k = model.tau[k] + model.omega[k, rest] @ x_rest
		field_l = model.tau[l] + model.omega[l, rest] @ x_rest
		values = np.array([-1.0, 1.0])
		log_table = model.beta * (
			field_k * values[:, None] + field_l * values[None, :] + model.omega[k, l] * np.outer(values, values)
		)
		table = np.exp(log_table - np.max(log_table))
		return table / np.sum(table)

	def entropy(self, model: IsingModel) -> float:
		log_pot = self.log_potentials(model)
		log_z = self.log_partition_function(model)
		log_prob = log_pot - log_z
		return float(-np.sum(np.exp(log_prob) * log_prob))

	def magnetization(self, dist: StateDistribution) -> tuple[float, float]:
		"""Expected mean spin and expected absolute mean spin"""
		mean_spin = np.mean(dist.states, axis=1)
		return float(dist.probabilities @ mean_spin), float(dist.probabilities @ np.abs(mean_spin))

	def temperature_sweep(self, model: IsingModel, betas: Sequence[float]) -> list[TemperaturePoint]:
		points = []
		for beta in betas:
			heated = IsingModel(tau=model.tau, omega=model.omega, beta=beta)
			mean, mean_abs = self.magnetization(self.full_distribution(heated))
			points.append(
				TemperaturePoint(
					beta=float(beta),
					entropy=self.entropy(heated),
					mean_magnetization=mean,
					mean_abs_magnetization=mean_abs,
				)
			)
		return points

	@staticmethod
	def conditional_odds_ratio(model: IsingModel, i: int, j: int) -> float:
		"""Odds ratio of X_i and X_j, the same for every configuration of the other nodes"""
		i = check_node(i, model.p)
		j = check_node(j, model.p)
		if i == j:
			raise DimensionError('odds ratio needs two distinct nodes')
		return float(np.exp(4.0 * model.beta * model.omega[i, j]))

	@staticmethod
	def to_potentials(model: IsingModel) -> PotentialSet:
		tau = model.beta * model.tau
		node_potentials = np.column_stack([np.exp(-tau), np.exp(tau)])
		pair_potentials = {}
		for i in range(model.p):
			for j in range(i + 1, model.p):
				w = model.beta * model.omega[i, j]
				pair_potentials[(i, j)] = np.array([[np.exp(w), np.exp(-w)], [np.exp(-w), np.exp(w)]])
		return PotentialSet(node_potentials=node_potentials, pair_potentials=pair_potentials, beta=model.beta)

	@staticmethod
	def from_potentials(potentials: PotentialSet) -> IsingModel:
		log_nodes = np.log(potentials.node_potentials)
		node_violation = np.max(np.abs(log_nodes.sum(axis=1)))
		if node_violation > IDENTIFICATION_TOL:
			raise ValueError(f'node potentials violate the identification constraint by {node_violation:.3g}')
		p = potentials.p
		omega = np.zeros((p, p))
		for (i, j), table in potentials.pair_potentials.items():
			log_table = np.log(np.asarray(table, dtype=float))
			violation = max(np.max(np.abs(log_table.sum(axis=0))), np.max(np.abs(log_table.sum(axis=1))))
			if violation > IDENTIFICATION_TOL:
				raise ValueError(f'pair table ({i}, {j}) violates the identification constraint by {violation:.3g}')
			omega[i, j] = omega[j, i] = log_table[1, 1]
		beta = potentials.beta
		return IsingModel(tau=log_nodes[:, 1] / beta, omega=omega / beta, beta=beta)

	def loglinear_view(self, model: IsingModel, n_total: int) -> LoglinearView:
		if int(n_total) < 1:
			raise ValueError(f'n_total must be at least 1, got {n_total}')
		dist = self.full_distribution(model)
		return LoglinearView(
			states=dist.states,
			expected=int(n_total) * dist.probabilities,
			nu=float(np.log(n_total) - dist.log_z),
			n_total=int(n_total),
		)
