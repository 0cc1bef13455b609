import itertools
import logging
from typing import Any, Optional, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import logsumexp
from scipy.stats import norm

from psy_ising.bridge.views import (
	POSTERIOR_SD,
	BridgeConfig,
	EigenBridge,
	LatentPosterior,
	MirtModel,
	QuadratureDimensionError,
)
from psy_ising.model.service import IsingService
from psy_ising.model.views import DimensionError, IsingModel, check_node, check_state

logger = logging.getLogger(__name__)

SIGN_TIE_TOL = 1e-9
EIGEN_CLIP_TOL = 1e-10


def column_sign(column: np.ndarray) -> float:
	"""-1 when the first entry of largest magnitude (ties within 1e-9 relative) is negative, else +1"""
	magnitude = np.abs(column)
	top = float(np.max(magnitude)) if column.size else 0.0
	if top == 0.0:
		return 1.0
	lead = int(np.flatnonzero(magnitude >= top * (1.0 - SIGN_TIE_TOL))[0])
	return -1.0 if column[lead] < 0 else 1.0


class BridgeService:
	"""Translation between an Ising model and its equivalent multidimensional 2PL model"""

	def __init__(self, config: Optional[BridgeConfig] = None, ising_service: Optional[IsingService] = None):
		self.config = config or BridgeConfig()
		self.ising_service = ising_service or IsingService()

	def _rank_tol(self, rank_tol: Optional[float]) -> float:
		return self.config.rank_tol if rank_tol is None else float(rank_tol)

	def eigen_bridge(self, model: IsingModel, rank_tol: Optional[float] = None, extra_shift: float = 0.0) -> EigenBridge:
		"""
		Eigen-decomposition of Omega + cI with c = -lambda_min(Omega) + extra_shift, eigenvalues
		descending. The beta of the model is folded into Omega.
		"""
		if extra_shift < 0:
			raise ValueError(f'extra_shift must be non-negative, got {extra_shift}')
		omega = model.beta * model.omega
		values, vectors = np.linalg.eigh(omega)
		values, vectors = values[::-1], vectors[:, ::-1]
		shift_c = float(-values[-1] + extra_shift)
		shifted = values + shift_c
		shifted[np.abs(shifted) <= EIGEN_CLIP_TOL] = 0.0
		shifted = np.maximum(shifted, 0.0)
		top = float(shifted[0]) if shifted.size else 0.0
		rank = int(np.sum(shifted > self._rank_tol(rank_tol) * top)) if top > 0 else 0
		return EigenBridge(shift_c=shift_c, q=vectors, eigenvalues=shifted, rank=rank)

	def ising_to_mirt(
		self, model: IsingModel, rank_tol: Optional[float] = None, extra_shift: float = 0.0
	) -> tuple[MirtModel, EigenBridge]:
		"""
		delta = -tau and a_j = -2 sqrt(lambda_j / 2) q_j for every shifted eigenvalue above the rank
		tolerance (zero columns otherwise). Each nonzero column is then sign-fixed and q_j flipped with it.
		"""
		bridge = self.eigen_bridge(model, rank_tol, extra_shift)
		p = model.p
		a = np.zeros((p, p))
		q = np.array(bridge.q)
		for j in range(p):
			if j < bridge.rank:
				column = -2.0 * np.sqrt(bridge.eigenvalues[j] / 2.0) * q[:, j]
				sign = column_sign(column)
				q[:, j] *= sign
				a[:, j] = sign * column
			else:
				q[:, j] *= column_sign(q[:, j])
		bridge = bridge.model_copy(update={'q': q})
		mirt = MirtModel(a=a, delta=-model.beta * model.tau, shift_c=bridge.shift_c)
		logger.debug(f'Ising -> MIRT: shift c={bridge.shift_c:.6f}, rank {bridge.rank} of {p}')
		return mirt, bridge

	@staticmethod
	def mirt_to_ising(mirt: MirtModel, bridge_shift: Optional[float] = None) -> IsingModel:
		"""Omega + cI = A A' / 2 with the diagonal dropped; tau = -delta"""
		shifted = 0.5 * mirt.a @ mirt.a.T
		shift_c = mirt.shift_c if bridge_shift is None else float(bridge_shift)
		diagonal_gap = float(np.max(np.abs(np.diag(shifted) - shift_c))) if mirt.p else 0.0
		if diagonal_gap > 1e-8:
			logger.debug(f'Diagonal of AA\'/2 differs from the stored shift by up to {diagonal_gap:.3g}')
		omega = shifted.copy()
		np.fill_diagonal(omega, 0.0)
		return IsingModel(tau=-mirt.delta, omega=omega)

	@staticmethod
	def mirt_conditional(mirt: MirtModel, x: Any, theta: Any) -> float:
		"""Product over items of exp(x_i(a_i' theta - delta_i)) / sum_x exp(x (a_i' theta - delta_i))"""
		x = check_state(x, mirt.p).astype(float)
		theta = np.asarray(theta, dtype=float)
		if theta.shape != (mirt.m,):
			raise DimensionError(f'theta must have length {mirt.m}, got shape {theta.shape}')
		eta = mirt.a @ theta - mirt.delta
		return float(np.exp(np.sum(x * eta - np.logaddexp(eta, -eta))))

	def _quadrature_grid(self, mirt: MirtModel, quadrature_nodes: Optional[int]) -> tuple[np.ndarray, np.ndarray]:
		"""Tensor Gauss-Hermite nodes over the active dimensions and their log weights"""
		active = mirt.active_dims()
		if len(active) > self.config.max_quadrature_dims:
			raise QuadratureDimensionError(
				f'{len(active)} latent dimensions exceed the tensor quadrature limit of '
				f'{self.config.max_quadrature_dims}; use the closed form (state_probability on mirt_to_ising)'
			)
		nodes, weights = hermgauss(quadrature_nodes or self.config.quadrature_nodes)
		if not active:
			return np.zeros((1, 0)), np.zeros(1)
		grid = np.array(list(itertools.product(nodes, repeat=len(active))))
		log_weights = np.sum(np.log(np.array(list(itertools.product(weights, repeat=len(active))))), axis=1)
		return grid, log_weights

	def mirt_marginal(self, mirt: MirtModel, x: Any, quadrature_nodes: Optional[int] = None) -> float:
		"""
		Pr(X = x) under the latent density that makes the MIRT model equivalent to an Ising model:
		  sum_k w_k prod_i exp(x_i eta_ik) / sum_k w_k prod_i 2cosh(eta_ik),  eta_ik = a_i' t_k - delta_i
		with Gauss-Hermite nodes t_k. Dimensions whose discriminations are all zero cancel out.
		"""
		x = check_state(x, mirt.p).astype(float)
		grid, log_weights = self._quadrature_grid(mirt, quadrature_nodes)
		eta = grid @ mirt.a[:, mirt.active_dims()].T - mirt.delta
		log_numerator = logsumexp(log_weights + eta @ x)
		log_denominator = logsumexp(log_weights + np.sum(np.logaddexp(eta, -eta), axis=1))
		return float(np.exp(log_numerator - log_denominator))

	@staticmethod
	def latent_posterior(mirt: MirtModel, x: Any) -> LatentPosterior:
		x = check_state(x, mirt.p).astype(float)
		return LatentPosterior(mean=0.5 * mirt.a.T @ x, sd=POSTERIOR_SD)

	def latent_marginal_density(self, mirt: MirtModel, dim: int, grid: Sequence[float]) -> np.ndarray:
		"""Mixture over all states of N((A'x)_dim / 2, sqrt(1/2)) weighted by the Ising state probabilities"""
		dim = check_node(dim, mirt.m)
		dist = self.ising_service.full_distribution(self.mirt_to_ising(mirt))
		means = 0.5 * (dist.states.astype(float) @ mirt.a[:, dim])
		theta = np.asarray(grid, dtype=float)
		densities = norm.pdf(theta[:, None], loc=means[None, :], scale=POSTERIOR_SD)
		return densities @ dist.probabilities

	def latent_density(self, mirt: MirtModel, theta: Any) -> np.ndarray:
		"""Joint latent density at each row of a K x M grid (mixture of the state posteriors)"""
		dist = self.ising_service.full_distribution(self.mirt_to_ising(mirt))
		theta = np.atleast_2d(np.asarray(theta, dtype=float))
		means = 0.5 * dist.states.astype(float) @ mirt.a
		log_pdf = norm.logpdf(theta[:, None, :], loc=means[None, :, :], scale=POSTERIOR_SD).sum(axis=2)
		return np.exp(log_pdf) @ dist.probabilities

	def rank_of_network(self, model: IsingModel, rank_tol: Optional[float] = None) -> tuple[int, np.ndarray]:
		"""Number of latent dimensions and the shifted spectrum, descending"""
		bridge = self.eigen_bridge(model, rank_tol)
		return bridge.rank, bridge.eigenvalues

	def low_rank_approximation(self, model: IsingModel, rank: int) -> IsingModel:
		"""Ising model rebuilt from the `rank` leading latent dimensions of the equivalent MIRT model"""
		if rank < 0:
			raise ValueError(f'rank must be non-negative, got {rank}')
		mirt, bridge = self.ising_to_mirt(model)
		a = np.array(mirt.a)
		a[:, rank:] = 0.0
		if rank < bridge.rank:
			logger.info(f'Dropped {bridge.rank - rank} of {bridge.rank} latent dimensions')
		return self.mirt_to_ising(MirtModel(a=a, delta=mirt.delta, shift_c=mirt.shift_c))
