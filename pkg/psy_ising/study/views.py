from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from psy_ising.estimator.crossval.views import CvSurface
from psy_ising.estimator.views import EdgeRule, FitResult, default_alpha_grid, default_lambda_grid

SCORING = 'negative mean squared error between Pr(X_i = +1 | rest) and the 0/1-coded response'


class StudyConfig(BaseModel):
	"""
	Two simulated datasets analysed over an elastic-net grid: A from a two-factor Rasch model,
	B from a scale-free Ising network sampled by Gibbs sampling.
	"""

	model_config = ConfigDict(frozen=True)

	n: int = Field(default=500, ge=2)
	p: int = Field(default=10, ge=2)
	lambda_grid: list[float] = Field(default_factory=default_lambda_grid)
	alpha_grid: list[float] = Field(default_factory=default_alpha_grid)
	folds: int = Field(default=10, ge=2)
	seed_a: int = Field(default=1, ge=0)
	seed_b: int = Field(default=2, ge=0)
	seed_cv: int = Field(default=3, ge=0)
	factor_corr: float = Field(default=0.5, gt=-1.0, lt=1.0)
	attach_prob: float = Field(default=0.05, ge=0.0, le=1.0)
	network_coding: Literal['zero_one', 'pm1'] = 'zero_one'
	sampling: Literal['gibbs', 'exact'] = 'gibbs'
	burn_in: int = Field(default=2000, ge=0)
	thin: int = Field(default=10, ge=1)
	edge_rule: EdgeRule = 'AND'
	dominant_ratio: float = Field(default=2.0, gt=1.0)
	threads: Optional[int] = Field(default=None, ge=1)

	@model_validator(mode='after')
	def check_grids(self) -> StudyConfig:
		for name, grid in (('lambda_grid', self.lambda_grid), ('alpha_grid', self.alpha_grid)):
			if not grid:
				raise ValueError(f'{name} must not be empty')
			if any(b <= a for a, b in zip(grid, grid[1:])):
				raise ValueError(f'{name} must be strictly increasing')
		if self.lambda_grid[0] < 0:
			raise ValueError('lambda values must be non-negative')
		if self.alpha_grid[0] < 0 or self.alpha_grid[-1] > 1:
			raise ValueError('alpha values must lie in [0, 1]')
		if self.folds > self.n:
			raise ValueError(f'{self.folds} folds for {self.n} rows')
		return self

	@classmethod
	def reduced(cls, size: int = 20, **kwargs: Any) -> StudyConfig:
		"""Same study on a size x size grid"""
		return cls(lambda_grid=default_lambda_grid(size), alpha_grid=default_alpha_grid(size), **kwargs)


class DatasetReport(BaseModel):
	"""Selection, fit and spectrum of one dataset; verdicts derive from the stored values"""

	model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

	label: str
	surface: CvSurface
	fit: FitResult
	eigenvalues: np.ndarray
	dominant_components: int
	min_lambda_column_mean: float
	min_lambda_column_best: float
	max_lambda_column_mean: float

	@property
	def best_alpha(self) -> float:
		return self.surface.best_alpha

	@property
	def best_lambda(self) -> float:
		return self.surface.best_lambda

	@property
	def verdict(self) -> str:
		return 'ridge-favored' if self.best_alpha < 0.5 else 'lasso-favored'

	@property
	def regularization_helps(self) -> bool:
		"""The optimum lies above the smallest lambda and beats every cell of that column"""
		return bool(self.best_lambda > self.surface.lambda_grid[0] and self.surface.best_accuracy > self.min_lambda_column_best)

	def to_dict(self) -> dict[str, Any]:
		return {
			'label': self.label,
			'best_alpha': self.best_alpha,
			'best_lambda': self.best_lambda,
			'best_accuracy': self.surface.best_accuracy,
			'min_lambda_column_mean': self.min_lambda_column_mean,
			'min_lambda_column_best': self.min_lambda_column_best,
			'max_lambda_column_mean': self.max_lambda_column_mean,
			'regularization_helps': self.regularization_helps,
			'verdict': self.verdict,
			'eigenvalues': self.eigenvalues.tolist(),
			'dominant_components': self.dominant_components,
			'n_edges': len(self.fit.edges()),
		}


class StudyReport(BaseModel):
	model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

	config: StudyConfig
	datasets: dict[str, DatasetReport]

	def sampling(self) -> dict[str, Any]:
		return {
			'dataset_b_sampler': self.config.sampling,
			'burn_in': self.config.burn_in,
			'thin': self.config.thin,
			'network_coding': self.config.network_coding,
			'scoring': SCORING,
			'folds': self.config.folds,
		}

	def to_dict(self) -> dict[str, Any]:
		return {
			'config': self.config.model_dump(mode='json'),
			'sampling': self.sampling(),
			'datasets': {label: report.to_dict() for label, report in sorted(self.datasets.items())},
		}

	def save_to_file(self, filepath: str | Path) -> None:
		Path(filepath).parent.mkdir(parents=True, exist_ok=True)
		with open(filepath, 'w', encoding='utf-8') as f:
			json.dump(self.to_dict(), f, indent=2, sort_keys=True)


class ReplicationSummary(BaseModel):
	"""How often the qualitative claims of the study hold over independent seeds"""

	n_replicates: int
	a_ridge_favored: float
	b_lasso_favored: float
	a_two_dominant: float
	regularization_helps_a: float
	regularization_helps_b: float
	replicates: list[dict[str, Any]]

	def save_to_file(self, filepath: str | Path) -> None:
		Path(filepath).parent.mkdir(parents=True, exist_ok=True)
		with open(filepath, 'w', encoding='utf-8') as f:
			json.dump(self.model_dump(mode='json'), f, indent=2, sort_keys=True)
