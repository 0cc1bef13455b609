import itertools
import logging
from typing import Optional

import networkx as nx
import numpy as np
from scipy.special import expit

from psy_ising.bridge.views import MirtModel
from psy_ising.model.service import IsingService, from_zero_one
from psy_ising.model.views import BinaryDataset, IsingModel
from psy_ising.sampler.views import (
	MirtDatasetParameters,
	MirtGenConfig,
	NetworkGenConfig,
	SamplerConfig,
)
from psy_ising.utils import make_rng, time_execution_sync

logger = logging.getLogger(__name__)

# uniforms drawn per block of sweeps
SWEEP_BLOCK = 4096


class Sampler:
	"""
	Draws datasets from Ising models.

	All randomness comes from a PCG64 generator seeded with `cfg.seed`, so identical
	configurations give bit-identical datasets.
	"""

	def __init__(self, ising_service: Optional[IsingService] = None):
		self.ising_service = ising_service or IsingService()

	def sample(self, model: IsingModel, cfg: SamplerConfig) -> BinaryDataset:
		if cfg.method == 'exact':
			return self.sample_exact(model, cfg)
		return self.sample_gibbs(model, cfg)

	@time_execution_sync('--sample_exact')
	def sample_exact(self, model: IsingModel, cfg: SamplerConfig) -> BinaryDataset:
		"""Inverse-CDF draws over the enumerated distribution"""
		dist = self.ising_service.full_distribution(model)
		rng = make_rng(cfg.seed)
		cdf = np.cumsum(dist.probabilities)
		index = np.searchsorted(cdf, rng.random(cfg.n_samples), side='right')
		index = np.minimum(index, dist.n_states - 1)
		logger.debug(f'Drew {cfg.n_samples} exact samples over {dist.n_states} states')
		return BinaryDataset(rows=dist.states[index])

	@time_execution_sync('--sample_gibbs')
	def sample_gibbs(self, model: IsingModel, cfg: SamplerConfig) -> BinaryDataset:
		"""
		Sequential-scan Gibbs sampler. Each sweep updates nodes 0..P-1 in order from
		Pr(X_i = +1 | rest) = expit(2 beta (tau_i + sum_j omega_ij x_j)); every `thin`-th sweep
		after `burn_in` sweeps is recorded.
		"""
		rng = make_rng(cfg.seed)
		p = model.p
		tau = model.beta * model.tau
		omega = model.beta * model.omega
		x = np.where(rng.random(p) < 0.5, -1.0, 1.0)
		total_sweeps = cfg.burn_in + cfg.n_samples * cfg.thin
		rows = np.empty((cfg.n_samples, p), dtype=np.int8)
		recorded = 0
		sweep = 0
		while sweep < total_sweeps:
			block = min(SWEEP_BLOCK, total_sweeps - sweep)
			uniforms = rng.random((block, p))
			for b in range(block):
				u = uniforms[b]
				for i in range(p):
					prob_up = expit(2.0 * (tau[i] + omega[i] @ x))
					x[i] = 1.0 if u[i] < prob_up else -1.0
				sweep += 1
				if sweep > cfg.burn_in and (sweep - cfg.burn_in) % cfg.thin == 0:
					rows[recorded] = x
					recorded += 1
		logger.debug(f'Gibbs chain ran {total_sweeps} sweeps, recorded {recorded} rows')
		return BinaryDataset(rows=rows)

	@staticmethod
	def generate_scale_free_model(cfg: NetworkGenConfig) -> IsingModel:
		"""
		Preferential-attachment tree (Barabasi-Albert with one edge per new node) as a connected
		skeleton, plus every other pair independently with probability `attach_prob`. Edge weights
		~ U(weight_low, weight_high), thresholds ~ U(thresh_low, thresh_high), both in the response
		coding named by `cfg.coding`.
		"""
		rng = make_rng(cfg.seed)
		skeleton = nx.barabasi_albert_graph(cfg.p, 1, seed=int(rng.integers(2**32)))
		edges = {tuple(sorted(edge)) for edge in skeleton.edges()}
		for i, j in itertools.combinations(range(cfg.p), 2):
			if (i, j) in edges:
				continue
			if rng.random() < cfg.attach_prob:
				edges.add((i, j))
		omega = np.zeros((cfg.p, cfg.p))
		for i, j in sorted(edges):
			omega[i, j] = omega[j, i] = rng.uniform(cfg.weight_low, cfg.weight_high)
		tau = rng.uniform(cfg.thresh_low, cfg.thresh_high, size=cfg.p)
		logger.info(
			f'Generated scale-free network: {cfg.p} nodes, {len(edges)} edges (skeleton {cfg.p - 1}), {cfg.coding} coding'
		)
		if cfg.coding == 'zero_one':
			return from_zero_one(tau, omega)
		return IsingModel(tau=tau, omega=omega)

	@staticmethod
	def generate_mirt_dataset(cfg: MirtGenConfig) -> tuple[BinaryDataset, MirtDatasetParameters]:
		"""
		Correlated normal factors (unit variance, common correlation `factor_corr`), standard normal
		difficulties and unit discriminations on each item's own factor; responses follow
		Pr(X_i = x | theta) proportional to exp(x (a_i' theta - delta_i)).
		"""
		rng = make_rng(cfg.seed)
		pattern = cfg.pattern()
		m = cfg.n_factors()
		cov = np.full((m, m), cfg.factor_corr)
		np.fill_diagonal(cov, 1.0)
		theta = rng.multivariate_normal(np.zeros(m), cov, size=cfg.n, method='cholesky')
		theta = cfg.theta_shift + cfg.theta_scale * theta
		if cfg.difficulties is None:
			delta = rng.standard_normal(cfg.p)
		else:
			delta = np.asarray(cfg.difficulties, dtype=float)
		a = np.zeros((cfg.p, m))
		a[np.arange(cfg.p), pattern] = 1.0
		prob_up = expit(2.0 * (theta @ a.T - delta))
		rows = np.where(rng.random((cfg.n, cfg.p)) < prob_up, 1, -1)
		params = MirtDatasetParameters(
			mirt=MirtModel(a=a, delta=delta),
			theta=theta,
			factor_corr=cfg.factor_corr,
			loading_pattern=pattern,
		)
		logger.info(f'Generated MIRT dataset: {cfg.n} x {cfg.p}, {m} factors, correlation {cfg.factor_corr}')
		return BinaryDataset(rows=rows), params
