import logging
from typing import Any, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from psy_ising.estimator.penalized import log_two_cosh, soft_threshold, solve_node
from psy_ising.estimator.views import (
	EdgeRule,
	FitConfig,
	FitResult,
	FullLikelihoodSizeError,
	NodeFit,
	Penalty,
	SeparationError,
)
from psy_ising.model.service import IsingService, canonical_states, energy
from psy_ising.model.views import BinaryDataset, DimensionError, IsingError, IsingModel, check_node
from psy_ising.utils import ordered_map, time_execution_sync

logger = logging.getLogger(__name__)


def ebic(loglik: float, df: int, n: int, p_nodes: int, gamma: float) -> float:
	"""-2 L + df ln N + 2 gamma df ln(k - 1)"""
	if df < 0:
		raise ValueError(f'df must be non-negative, got {df}')
	if n < 1:
		raise ValueError(f'n must be at least 1, got {n}')
	value = -2.0 * loglik
	if df > 0:
		if p_nodes < 2:
			raise ValueError('EBIC with nonzero edges needs at least 2 nodes')
		value += df * np.log(n) + 2.0 * gamma * df * np.log(p_nodes - 1)
	return float(value)


def logistic01_to_pm1(b0: float, b: Sequence[float]) -> tuple[float, np.ndarray]:
	"""
	Node parameters from a logistic regression fit on 0/1-coded data
	(logit Pr(u_i = 1) = b0 + sum_j b_j u_j): omega_ij = b_j / 4, tau_i = b0 / 2 + sum_j b_j / 4.
	"""
	b = np.asarray(b, dtype=float)
	return float(b0 / 2.0 + np.sum(b) / 4.0), b / 4.0


def pm1_to_logistic01(tau_i: float, omega_row: Sequence[float]) -> tuple[float, np.ndarray]:
	"""Inverse of `logistic01_to_pm1`"""
	omega_row = np.asarray(omega_row, dtype=float)
	return float(2.0 * tau_i - 2.0 * np.sum(omega_row)), 4.0 * omega_row


def symmetrize(rows: np.ndarray, edge_rule: EdgeRule) -> np.ndarray:
	"""
	Combine per-node rows into one network. AND keeps an edge when both estimates are nonzero,
	OR when either is; kept edges get the average of the two estimates.
	"""
	nonzero = rows != 0
	np.fill_diagonal(nonzero, False)
	keep = nonzero & nonzero.T if edge_rule == 'AND' else nonzero | nonzero.T
	omega = np.where(keep, (rows + rows.T) / 2.0, 0.0)
	np.fill_diagonal(omega, 0.0)
	return omega


def constant_columns(x: np.ndarray) -> list[tuple[int, int]]:
	"""(node, value) for every column without variation"""
	found = []
	for i in range(x.shape[1]):
		column = x[:, i]
		if np.all(column == column[0]):
			found.append((i, int(column[0])))
	return found


def continuity_threshold(y: np.ndarray) -> float:
	n_plus = float(np.sum(y == 1))
	n_minus = float(y.size) - n_plus
	return float(0.5 * np.log((n_plus + 0.5) / (n_minus + 0.5)))


class Estimator:
	"""Likelihoods and fitting procedures for Ising models on -1/+1 data"""

	def __init__(self, ising_service: Optional[IsingService] = None):
		self.ising_service = ising_service or IsingService()

	# --- likelihoods ---

	@staticmethod
	def _check_data(model: IsingModel, data: BinaryDataset) -> None:
		if data.p != model.p:
			raise DimensionError(f'data has {data.p} columns but the model has {model.p} nodes')

	def log_likelihood(self, model: IsingModel, data: BinaryDataset) -> float:
		self._check_data(model, data)
		log_z = self.ising_service.log_partition_function(model)
		return float(model.beta * np.sum(energy(model, data.as_float())) - data.n * log_z)

	@staticmethod
	def node_loglik_at(data: BinaryDataset, i: int, params: Sequence[float]) -> float:
		"""
		Node conditional log-likelihood with params[i] = tau_i and params[j] = omega_ij (j != i),
		at unit temperature.
		"""
		i = check_node(i, data.p)
		x = data.as_float()
		w = np.array(params, dtype=float)
		if w.shape != (data.p,):
			raise DimensionError(f'params must have length {data.p}, got shape {w.shape}')
		tau_i = w[i]
		w[i] = 0.0
		eta = tau_i + x @ w
		return float(np.sum(x[:, i] * eta - log_two_cosh(eta)))

	def node_conditional_loglik(self, model: IsingModel, data: BinaryDataset, i: int) -> float:
		self._check_data(model, data)
		i = check_node(i, model.p)
		params = model.beta * np.array(model.omega[i])
		params[i] = model.beta * model.tau[i]
		return self.node_loglik_at(data, i, params)

	def pseudolikelihood(self, model: IsingModel, data: BinaryDataset) -> float:
		return float(sum(self.node_conditional_loglik(model, data, i) for i in range(model.p)))

	@staticmethod
	def gradient_node_loglik(data: BinaryDataset, i: int, params: Sequence[float]) -> np.ndarray:
		"""Gradient of `node_loglik_at` in the same layout as `params`"""
		i = check_node(i, data.p)
		x = data.as_float()
		w = np.array(params, dtype=float)
		if w.shape != (data.p,):
			raise DimensionError(f'params must have length {data.p}, got shape {w.shape}')
		tau_i = w[i]
		w[i] = 0.0
		residual = x[:, i] - np.tanh(tau_i + x @ w)
		grad = x.T @ residual
		grad[i] = np.sum(residual)
		return grad

	# --- full maximum likelihood ---

	@time_execution_sync('--fit_full_ml')
	def fit_full_ml(self, data: BinaryDataset, cfg: Optional[FitConfig] = None) -> FitResult:
		"""
		Damped Newton ascent on the exact log-likelihood. The gradient is observed minus expected
		sufficient statistics, with expectations taken over the enumerated state space.
		"""
		cfg = cfg or FitConfig(method='full_ml')
		p = data.p
		if p > cfg.full_ml_max_p:
			raise FullLikelihoodSizeError(p, cfg.full_ml_max_p)
		self.ising_service.check_cap(p)
		x = data.as_float()
		constant = constant_columns(x)
		if constant:
			raise SeparationError(*constant[0])

		upper = np.triu_indices(p, k=1)
		states = canonical_states(p).astype(float)
		features = np.hstack([states, states[:, upper[0]] * states[:, upper[1]]])
		observed = np.concatenate([x.sum(axis=0), (x[:, upper[0]] * x[:, upper[1]]).sum(axis=0)])
		n = data.n

		def loglik(theta: np.ndarray) -> float:
			return float(theta @ observed - n * logsumexp(features @ theta))

		theta = np.zeros(features.shape[1])
		current = loglik(theta)
		converged = False
		iteration = 0
		for iteration in range(1, cfg.max_iter + 1):
			log_pot = features @ theta
			prob = np.exp(log_pot - logsumexp(log_pot))
			mean = features.T @ prob
			cov = (features * prob[:, None]).T @ features - np.outer(mean, mean)
			grad = observed - n * mean
			step = np.linalg.lstsq(n * cov, grad, rcond=None)[0]

			scale = 1.0
			candidate = theta + step
			value = loglik(candidate)
			while value < current and scale > 1e-10:
				scale *= 0.5
				candidate = theta + scale * step
				value = loglik(candidate)
			if value < current:
				converged = bool(np.max(np.abs(grad)) / n < np.sqrt(cfg.tol))
				break

			change = float(np.max(np.abs(candidate - theta)))
			theta, current = candidate, value
			if change < cfg.tol:
				converged = True
				break

		if not converged:
			logger.warning(f'Full ML did not converge after {iteration} iterations')
		omega = np.zeros((p, p))
		omega[upper] = theta[p:]
		omega = omega + omega.T
		logger.info(f'Full ML fit: P={p}, N={n}, log-likelihood {current:.4f}, {iteration} iterations')
		return FitResult(
			tau_hat=theta[:p].copy(),
			omega_hat=omega,
			method='full_ml',
			iterations=iteration,
			converged=converged,
			config=cfg.model_dump(mode='json'),
		)

	# --- node-wise penalized regressions ---

	@staticmethod
	def lambda_max(data: BinaryDataset, i: int, alpha: float) -> float:
		"""
		Smallest lambda at which node i's weight row is identically zero: the largest absolute
		predictor gradient at the intercept-only fit, divided by alpha. Infinite for ridge.
		"""
		i = check_node(i, data.p)
		if alpha <= 0:
			return float('inf')
		x = data.as_float()
		y = x[:, i]
		z = np.delete(x, i, axis=1)
		if z.shape[1] == 0 or np.all(y == y[0]):
			return 0.0
		# at tau = 0.5 ln(n+/n-), tanh(tau) is the column mean
		grad = z.T @ (y - np.mean(y)) / data.n
		return float(np.max(np.abs(grad)) / alpha)

	def fit_node_penalized(
		self,
		data: BinaryDataset,
		i: int,
		penalty: Penalty,
		cfg: Optional[FitConfig] = None,
		init: Optional[tuple[float, np.ndarray]] = None,
	) -> NodeFit:
		"""
		Maximize (1/N) L_i - lambda Pen(omega_i) over (tau_i, omega_i.), tau_i unpenalized.
		A constant node gets an all-zero row and the continuity-corrected threshold under
		lambda > 0 and raises SeparationError at lambda = 0.
		"""
		cfg = cfg or FitConfig()
		i = check_node(i, data.p)
		x = data.as_float()
		y = x[:, i]
		z = np.delete(x, i, axis=1)

		if np.all(y == y[0]):
			if penalty.lam == 0:
				raise SeparationError(i, int(y[0]))
			tau = continuity_threshold(y)
			logger.warning(f'Node {i} is constant ({int(y[0]):+d}); threshold set to {tau:.4f}, weights to zero')
			omega_row = np.zeros(data.p)
			params = omega_row.copy()
			params[i] = tau
			return NodeFit(
				node=i,
				tau=tau,
				omega_row=omega_row,
				alpha=penalty.alpha,
				lam=penalty.lam,
				loglik=self.node_loglik_at(data, i, params),
				iterations=0,
				converged=True,
			)

		solution = solve_node(y, z, penalty.alpha, penalty.lam, tol=cfg.tol, max_iter=cfg.max_iter, init=init)
		if not solution.converged:
			logger.warning(f'Node {i} did not converge at lambda={penalty.lam:.4g}, alpha={penalty.alpha:.3g}')
		omega_row = np.insert(solution.coef, i, 0.0)
		params = omega_row.copy()
		params[i] = solution.intercept
		return NodeFit(
			node=i,
			tau=solution.intercept,
			omega_row=omega_row,
			alpha=penalty.alpha,
			lam=penalty.lam,
			loglik=self.node_loglik_at(data, i, params),
			iterations=solution.iterations,
			converged=solution.converged,
		)

	def fit_node_path(
		self, data: BinaryDataset, i: int, penalties: Sequence[Penalty], cfg: Optional[FitConfig] = None
	) -> list[NodeFit]:
		"""Fits along `penalties` in the given order, warm-starting each from the previous solution"""
		path = []
		init = None
		for penalty in penalties:
			fit = self.fit_node_penalized(data, i, penalty, cfg, init=init)
			init = (fit.tau, np.delete(fit.omega_row, i))
			path.append(fit)
		return path

	@staticmethod
	def select_by_ebic(path: Sequence[NodeFit]) -> NodeFit:
		"""Lowest EBIC; among ties the smaller lambda wins"""
		best = None
		for fit in path:
			if best is None or fit.ebic < best.ebic or (fit.ebic == best.ebic and fit.lam < best.lam):
				best = fit
		return best

	@staticmethod
	def _select_global_ebic(paths: list[list[NodeFit]], n: int, p: int, cfg: FitConfig) -> list[NodeFit]:
		"""One lambda for all nodes, scored by EBIC on the summed node log-likelihoods and the edge count"""
		best_index, best_score, best_lam = 0, np.inf, np.inf
		for index in range(len(paths[0])):
			fits = [path[index] for path in paths]
			rows = np.vstack([fit.omega_row for fit in fits])
			n_edges = int(np.count_nonzero(np.triu(symmetrize(rows, cfg.edge_rule), k=1)))
			score = ebic(sum(fit.loglik for fit in fits), n_edges, n, p, cfg.ebic_gamma)
			lam = fits[0].lam
			if score < best_score or (score == best_score and lam < best_lam):
				best_index, best_score, best_lam = index, score, lam
		logger.info(f'Global EBIC selected lambda={best_lam:.4g} (EBIC {best_score:.3f})')
		return [path[best_index] for path in paths]

	@time_execution_sync('--fit_disjoint')
	def fit_disjoint(self, data: BinaryDataset, cfg: Optional[FitConfig] = None) -> FitResult:
		"""
		One penalized logistic regression per node, lambda chosen per node by EBIC (or globally),
		then the edge rule and averaging of the two estimates of every weight.
		"""
		cfg = cfg or FitConfig()
		penalties = cfg.candidate_penalties()
		p, n = data.p, data.n

		def fit_node(i: int) -> list[NodeFit]:
			try:
				path = self.fit_node_path(data, i, penalties, cfg)
			except SeparationError:
				raise
			except Exception as e:
				raise IsingError(f'Fitting node {i} failed: {e}') from e
			return [fit.model_copy(update={'ebic': ebic(fit.loglik, fit.df, n, p, cfg.ebic_gamma)}) for fit in path]

		paths = ordered_map(fit_node, range(p), cfg.threads)

		if len(penalties) == 1:
			chosen = [path[0] for path in paths]
		elif cfg.lambda_selection == 'global_ebic':
			chosen = self._select_global_ebic(paths, n, p, cfg)
		else:
			chosen = [self.select_by_ebic(path) for path in paths]
			logger.info('Node EBIC selected lambdas: ' + ', '.join(f'{fit.lam:.4g}' for fit in chosen))

		omega = symmetrize(np.vstack([fit.omega_row for fit in chosen]), cfg.edge_rule)
		converged = all(fit.converged for fit in chosen)
		if not converged:
			logger.warning(f'Nodes {[fit.node for fit in chosen if not fit.converged]} did not converge')
		return FitResult(
			tau_hat=np.array([fit.tau for fit in chosen]),
			omega_hat=omega,
			method='disjoint_pl',
			edge_rule=cfg.edge_rule,
			per_node=chosen,
			iterations=max(fit.iterations for fit in chosen),
			converged=converged,
			config=cfg.model_dump(mode='json'),
		)

	# --- joint pseudolikelihood ---

	@staticmethod
	def _optimize_joint(x: np.ndarray, penalty: Penalty, cfg: FitConfig) -> tuple[np.ndarray, np.ndarray, int, bool]:
		n, p = x.shape
		upper = np.triu_indices(p, k=1)
		l1 = penalty.lam * penalty.alpha
		l2 = penalty.lam * (1.0 - penalty.alpha)

		def unpack(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
			omega = np.zeros((p, p))
			omega[upper] = theta[p:]
			return theta[:p], omega + omega.T

		def smooth(theta: np.ndarray) -> tuple[float, np.ndarray]:
			"""-(1/N) ln PL plus the ridge part of the penalty"""
			tau, omega = unpack(theta)
			eta = tau + x @ omega
			residual = x - np.tanh(eta)
			cross = x.T @ residual
			weights = theta[p:]
			value = -float(np.sum(x * eta - log_two_cosh(eta))) / n + 0.5 * l2 * float(weights @ weights)
			grad_tau = -residual.sum(axis=0) / n
			grad_omega = -(cross[upper] + cross.T[upper]) / n + l2 * weights
			return value, np.concatenate([grad_tau, grad_omega])

		theta = np.zeros(p + upper[0].size)
		if l1 == 0:
			result = minimize(smooth, theta, jac=True, method='L-BFGS-B', tol=cfg.tol, options={'maxiter': cfg.max_iter})
			tau, omega = unpack(result.x)
			return tau, omega, int(result.nit), bool(result.success)

		step = 1.0
		value, grad = smooth(theta)
		for iteration in range(1, cfg.max_iter + 1):
			while True:
				candidate = theta - step * grad
				candidate[p:] = soft_threshold(candidate[p:], step * l1)
				diff = candidate - theta
				candidate_value, candidate_grad = smooth(candidate)
				if candidate_value <= value + grad @ diff + (diff @ diff) / (2.0 * step) + 1e-15:
					break
				step *= 0.5
			theta, value, grad = candidate, candidate_value, candidate_grad
			if np.max(np.abs(diff), initial=0.0) < cfg.tol:
				tau, omega = unpack(theta)
				return tau, omega, iteration, True
		tau, omega = unpack(theta)
		return tau, omega, cfg.max_iter, False

	@time_execution_sync('--fit_joint_pl')
	def fit_joint_pl(self, data: BinaryDataset, cfg: Optional[FitConfig] = None) -> FitResult:
		"""
		Single optimization of the (penalized) joint pseudolikelihood with omega_ij = omega_ji tied.
		Each weight is penalized once.
		"""
		cfg = cfg or FitConfig(method='joint_pl')
		penalty = cfg.penalty or Penalty(alpha=cfg.alpha, lam=0.0)
		x = data.as_float()
		p = data.p
		constant = constant_columns(x)
		if constant and penalty.lam == 0:
			raise SeparationError(*constant[0])

		tau = np.zeros(p)
		omega = np.zeros((p, p))
		for node, value in constant:
			tau[node] = continuity_threshold(x[:, node])
			logger.warning(f'Node {node} is constant ({value:+d}); threshold set to {tau[node]:.4f}, weights to zero')
		free = [i for i in range(p) if i not in {node for node, _ in constant}]

		iterations, converged = 0, True
		if free:
			free_tau, free_omega, iterations, converged = self._optimize_joint(x[:, free], penalty, cfg)
			tau[free] = free_tau
			omega[np.ix_(free, free)] = free_omega
		if not converged:
			logger.warning(f'Joint pseudolikelihood did not converge after {iterations} iterations')
		return FitResult(
			tau_hat=tau,
			omega_hat=omega,
			method='joint_pl',
			iterations=iterations,
			converged=converged,
			config=cfg.model_dump(mode='json'),
		)

	def fit(self, data: BinaryDataset, cfg: Optional[FitConfig] = None) -> FitResult:
		cfg = cfg or FitConfig()
		if cfg.method == 'full_ml':
			result = self.fit_full_ml(data, cfg)
		elif cfg.method == 'joint_pl':
			result = self.fit_joint_pl(data, cfg)
		else:
			result = self.fit_disjoint(data, cfg)
		logger.result(f'{cfg.method} fit: {len(result.edges())} edges over {data.p} nodes, converged={result.converged}')
		return result

	def describe(self, result: FitResult, data: BinaryDataset) -> dict[str, Any]:
		"""Fit summary with likelihood values under the fitted model"""
		model = result.to_model()
		summary: dict[str, Any] = {
			'method': result.method,
			'n': data.n,
			'p': data.p,
			'n_edges': len(result.edges()),
			'pseudolikelihood': self.pseudolikelihood(model, data),
		}
		if data.p <= self.ising_service.config.enumeration_cap:
			summary['log_likelihood'] = self.log_likelihood(model, data)
		return summary
