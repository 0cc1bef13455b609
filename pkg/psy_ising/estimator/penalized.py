"""
Proximal Newton solver for one node's elastic-net logistic regression in -1/+1 coding.

Minimizes  (1/N) sum_r [ ln 2cosh(eta_r) - y_r eta_r ]  +  lam * [ (1-alpha)/2 ||w||^2 + alpha ||w||_1 ]
with eta_r = b + z_r . w and an unpenalized intercept b.

Each outer iteration builds the quadratic model of the loss (gradient and weighted Gram matrix) once,
solves the penalized quadratic by coordinate descent in covariance form over an active set, and
backtracks along the resulting direction until the objective decreases.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

CURVATURE_FLOOR = 1e-10
INNER_MAX_SWEEPS = 1000
ARMIJO = 1e-4
MAX_BACKTRACK = 50


@dataclass
class NodeSolution:
	intercept: float
	coef: np.ndarray
	iterations: int
	converged: bool


def soft_threshold(value: np.ndarray | float, threshold: float) -> np.ndarray:
	return np.sign(value) * np.maximum(np.abs(value) - threshold, 0.0)


def log_two_cosh(eta: np.ndarray) -> np.ndarray:
	return np.logaddexp(eta, -eta)


def penalty_value(coef: np.ndarray, alpha: float, lam: float) -> float:
	return lam * (0.5 * (1.0 - alpha) * float(coef @ coef) + alpha * float(np.sum(np.abs(coef))))


def penalized_objective(y: np.ndarray, z: np.ndarray, intercept: float, coef: np.ndarray, alpha: float, lam: float) -> float:
	eta = intercept + z @ coef
	return float(np.mean(log_two_cosh(eta) - y * eta)) + penalty_value(coef, alpha, lam)


def _solve_quadratic(
	gram: np.ndarray, grad: np.ndarray, start: np.ndarray, l1: np.ndarray, l2: np.ndarray, tol: float
) -> np.ndarray:
	"""
	Minimizes grad'd + d'Gd/2 + sum_j l1_j |s_j + d_j| + l2_j (s_j + d_j)^2 / 2 over d by cyclic
	coordinate descent, sweeping the active set until it settles and then every coordinate once more.
	Returns the new point s + d.
	"""
	beta = start.copy()
	partial = grad.copy()
	diagonal = np.maximum(np.diag(gram), CURVATURE_FLOOR)
	everything = np.arange(beta.size)
	active = everything

	for _ in range(INNER_MAX_SWEEPS):
		max_change = 0.0
		for j in active:
			old = beta[j]
			new = float(soft_threshold(diagonal[j] * old - partial[j], l1[j])) / (diagonal[j] + l2[j])
			if new != old:
				partial += gram[:, j] * (new - old)
				beta[j] = new
				max_change = max(max_change, abs(new - old))
		if max_change < tol:
			if active is everything:
				break
			active = everything
		elif active is everything:
			# intercept always stays in the active set
			active = np.flatnonzero((beta != 0) | (l1 == 0))
	return beta


def solve_node(
	y: np.ndarray,
	z: np.ndarray,
	alpha: float,
	lam: float,
	tol: float = 1e-8,
	max_iter: int = 10000,
	init: Optional[tuple[float, np.ndarray]] = None,
) -> NodeSolution:
	"""
	Proximal Newton iterations on (intercept, coef) until the largest parameter change of an
	accepted step drops below `tol`. `init` warm-starts the solver.
	"""
	n, k = z.shape
	if init is None:
		params = np.zeros(k + 1)
	else:
		params = np.concatenate([[float(init[0])], np.asarray(init[1], dtype=float)])
	design = np.column_stack([np.ones(n), z])
	l1 = np.concatenate([[0.0], np.full(k, lam * alpha)])
	l2 = np.concatenate([[0.0], np.full(k, lam * (1.0 - alpha))])

	def objective(beta: np.ndarray, eta: np.ndarray) -> float:
		return float(np.mean(log_two_cosh(eta) - y * eta)) + penalty_value(beta[1:], alpha, lam)

	eta = design @ params
	current = objective(params, eta)

	for iteration in range(1, max_iter + 1):
		t = np.tanh(eta)
		grad = design.T @ (t - y) / n
		gram = (design * (1.0 - t * t)[:, None]).T @ design / n
		proposal = _solve_quadratic(gram, grad, params, l1, l2, tol * 0.1)
		direction = proposal - params
		if np.max(np.abs(direction)) < tol:
			return NodeSolution(intercept=float(params[0]), coef=params[1:], iterations=iteration, converged=True)

		decrease = float(grad @ direction) + penalty_value(proposal[1:], alpha, lam) - penalty_value(params[1:], alpha, lam)
		step = 1.0
		eta_direction = design @ direction
		for _ in range(MAX_BACKTRACK):
			candidate = params + step * direction
			candidate_eta = eta + step * eta_direction
			value = objective(candidate, candidate_eta)
			if value <= current + ARMIJO * step * min(decrease, 0.0):
				break
			step *= 0.5
		else:
			logger.debug(f'Line search stalled at lambda={lam:.4g}, alpha={alpha:.3g}')
			return NodeSolution(intercept=float(params[0]), coef=params[1:], iterations=iteration, converged=True)

		change = step * float(np.max(np.abs(direction)))
		params, eta, current = candidate, candidate_eta, value
		if change < tol:
			return NodeSolution(intercept=float(params[0]), coef=params[1:], iterations=iteration, converged=True)

	logger.debug(f'Proximal Newton stopped after {max_iter} iterations (lambda={lam:.4g}, alpha={alpha:.3g})')
	return NodeSolution(intercept=float(params[0]), coef=params[1:], iterations=max_iter, converged=False)
