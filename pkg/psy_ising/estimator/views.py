from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from psy_ising.model.views import IsingError, IsingModel

FitMethod = Literal['full_ml', 'joint_pl', 'disjoint_pl']
EdgeRule = Literal['AND', 'OR']
LambdaSelection = Literal['node_ebic', 'global_ebic']


class SeparationError(IsingError):
	"""Error raised when a node is constant in the data and the fit is unpenalized"""

	def __init__(self, node: int, value: int):
		self.node = node
		self.value = value
		super().__init__(
			f'Node {node} takes the single value {value:+d} in every row; its threshold has no finite '
			'unpenalized estimate. Use a penalized fit (lambda > 0) or drop the column.'
		)


class ConvergenceError(IsingError):
	"""Error raised when a fit flagged as not converged is treated as a failure"""


class FullLikelihoodSizeError(IsingError):
	"""Error raised when exact maximum likelihood is asked for more nodes than its limit"""

	def __init__(self, p: int, limit: int):
		self.p = p
		self.limit = limit
		super().__init__(f'full ML is limited to P <= {limit} nodes, got P={p}; use joint_pl or disjoint_pl')


class Penalty(BaseModel):
	"""lambda * [ (1 - alpha)/2 * ||w||_2^2 + alpha * ||w||_1 ]; alpha=1 is the LASSO, alpha=0 ridge"""

	model_config = ConfigDict(frozen=True)

	alpha: float = Field(default=1.0, ge=0.0, le=1.0)
	lam: float = Field(default=0.0, ge=0.0)

	def value(self, w: np.ndarray) -> float:
		w = np.asarray(w, dtype=float)
		return self.lam * (0.5 * (1.0 - self.alpha) * float(w @ w) + self.alpha * float(np.sum(np.abs(w))))


def default_lambda_grid(n: int = 100) -> list[float]:
	"""n log-spaced values in [0.001, 1]"""
	return np.logspace(-3, 0, n).tolist()


def default_alpha_grid(n: int = 100) -> list[float]:
	"""n equally spaced values in [0, 1]"""
	return np.linspace(0.0, 1.0, n).tolist()


class FitConfig(BaseModel):
	"""
	Estimation settings.

	With `penalty` set, every node is fit at that single (alpha, lambda). Otherwise disjoint fits
	select lambda from `lambda_grid` (default: 100 log-spaced values in [0.001, 1]) at `alpha`
	using `lambda_selection`. `full_ml` ignores the penalty.
	"""

	model_config = ConfigDict(frozen=True)

	method: FitMethod = 'disjoint_pl'
	penalty: Optional[Penalty] = None
	alpha: float = Field(default=1.0, ge=0.0, le=1.0)
	lambda_grid: Optional[list[float]] = None
	lambda_selection: LambdaSelection = 'node_ebic'
	edge_rule: EdgeRule = 'AND'
	ebic_gamma: float = Field(default=0.25, ge=0.0)
	max_iter: int = Field(default=10000, ge=1)
	tol: float = Field(default=1e-8, gt=0.0)
	cv_folds: int = Field(default=10, ge=2)
	seed: int = Field(default=0, ge=0)
	threads: Optional[int] = Field(default=None, ge=1)
	full_ml_max_p: int = Field(default=10, ge=1)

	@field_validator('lambda_grid')
	@classmethod
	def check_grid(cls, grid: Optional[list[float]]) -> Optional[list[float]]:
		if grid is None:
			return grid
		if not grid:
			raise ValueError('lambda_grid must not be empty')
		if min(grid) < 0:
			raise ValueError('lambda values must be non-negative')
		return grid

	def candidate_penalties(self) -> list[Penalty]:
		"""Penalties tried per node, lambda descending"""
		if self.penalty is not None:
			return [self.penalty]
		grid = self.lambda_grid if self.lambda_grid is not None else default_lambda_grid()
		return [Penalty(alpha=self.alpha, lam=lam) for lam in sorted(set(grid), reverse=True)]


class NodeFit(BaseModel):
	"""One node's logistic regression on the other nodes, in -1/+1 coding"""

	model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

	node: int
	tau: float
	omega_row: np.ndarray  # length P, zero at `node`
	alpha: float
	lam: float
	loglik: float
	ebic: Optional[float] = None
	iterations: int
	converged: bool

	@property
	def df(self) -> int:
		return int(np.count_nonzero(self.omega_row))

	def to_dict(self) -> dict[str, Any]:
		return {
			'node': self.node,
			'tau': self.tau,
			'omega_row': self.omega_row.tolist(),
			'alpha': self.alpha,
			'lambda': self.lam,
			'loglik': self.loglik,
			'ebic': self.ebic,
			'iterations': self.iterations,
			'converged': self.converged,
		}

	@classmethod
	def from_dict(cls, data: dict[str, Any]) -> NodeFit:
		return cls(
			node=data['node'],
			tau=data['tau'],
			omega_row=np.asarray(data['omega_row'], dtype=float),
			alpha=data['alpha'],
			lam=data['lambda'],
			loglik=data['loglik'],
			ebic=data.get('ebic'),
			iterations=data['iterations'],
			converged=data['converged'],
		)


class FitResult(BaseModel):
	"""Estimated thresholds and network plus how they were obtained"""

	model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

	tau_hat: np.ndarray
	omega_hat: np.ndarray
	method: FitMethod
	edge_rule: Optional[EdgeRule] = None
	per_node: list[NodeFit] = Field(default_factory=list)
	iterations: int = 0
	converged: bool = True
	config: dict[str, Any] = Field(default_factory=dict)

	@model_validator(mode='after')
	def check_symmetric(self) -> FitResult:
		p = self.tau_hat.size
		if self.omega_hat.shape != (p, p):
			raise ValueError(f'omega_hat must be {p}x{p}, got {self.omega_hat.shape}')
		if not np.array_equal(self.omega_hat, self.omega_hat.T):
			raise ValueError('omega_hat must be exactly symmetric')
		if np.any(np.diag(self.omega_hat) != 0):
			raise ValueError('omega_hat must have a zero diagonal')
		return self

	@property
	def p(self) -> int:
		return int(self.tau_hat.size)

	def to_model(self) -> IsingModel:
		return IsingModel(tau=self.tau_hat, omega=self.omega_hat)

	def edges(self) -> list[tuple[int, int]]:
		return self.to_model().edges()

	def to_dict(self) -> dict[str, Any]:
		return {
			'method': self.method,
			'edge_rule': self.edge_rule,
			'tau_hat': self.tau_hat.tolist(),
			'omega_hat': self.omega_hat.tolist(),
			'per_node': [node.to_dict() for node in self.per_node],
			'iterations': self.iterations,
			'converged': self.converged,
			'config': self.config,
		}

	def save_to_file(self, filepath: str | Path) -> None:
		Path(filepath).parent.mkdir(parents=True, exist_ok=True)
		with open(filepath, 'w', encoding='utf-8') as f:
			json.dump(self.to_dict(), f, indent=2, sort_keys=True)

	@classmethod
	def load_from_file(cls, filepath: str | Path) -> FitResult:
		with open(filepath, 'r', encoding='utf-8') as f:
			data = json.load(f)
		return cls(
			tau_hat=np.asarray(data['tau_hat'], dtype=float),
			omega_hat=np.asarray(data['omega_hat'], dtype=float),
			method=data['method'],
			edge_rule=data.get('edge_rule'),
			per_node=[NodeFit.from_dict(node) for node in data.get('per_node', [])],
			iterations=data.get('iterations', 0),
			converged=data.get('converged', True),
			config=data.get('config', {}),
		)
