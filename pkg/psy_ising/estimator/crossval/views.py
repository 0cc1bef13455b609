from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator


class CvSurface(BaseModel):
	"""
	Fold-mean predictive accuracy (negative mean squared error of Pr(+1) against the 0/1 response)
	for every (alpha, lambda) cell. `accuracy[a, l]` belongs to `alpha_grid[a]` and `lambda_grid[l]`;
	both grids are ascending.
	"""

	model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

	lambda_grid: np.ndarray
	alpha_grid: np.ndarray
	accuracy: np.ndarray
	fold_accuracy: np.ndarray  # folds x alphas x lambdas
	best_alpha: float
	best_lambda: float
	best_accuracy: float

	@model_validator(mode='after')
	def check_shapes(self) -> CvSurface:
		shape = (self.alpha_grid.size, self.lambda_grid.size)
		if self.accuracy.shape != shape:
			raise ValueError(f'accuracy must be {shape}, got {self.accuracy.shape}')
		if self.fold_accuracy.shape[1:] != shape:
			raise ValueError(f'fold_accuracy must be K x {shape}, got {self.fold_accuracy.shape}')
		if self.best_accuracy != float(np.max(self.accuracy)):
			raise ValueError('best cell does not attain the maximum accuracy')
		return self

	@property
	def n_folds(self) -> int:
		return int(self.fold_accuracy.shape[0])

	def column(self, lam: float) -> np.ndarray:
		"""Accuracies over alpha at one lambda"""
		index = int(np.argmin(np.abs(self.lambda_grid - lam)))
		return self.accuracy[:, index]

	def to_frame(self) -> pd.DataFrame:
		alphas, lambdas = np.meshgrid(self.alpha_grid, self.lambda_grid, indexing='ij')
		return pd.DataFrame(
			{
				'alpha': alphas.ravel(),
				'lambda': lambdas.ravel(),
				'fold_mean_accuracy': self.accuracy.ravel(),
			}
		)

	def save_csv(self, filepath: str | Path) -> None:
		Path(filepath).parent.mkdir(parents=True, exist_ok=True)
		self.to_frame().to_csv(filepath, index=False, float_format='%.17g')

	@classmethod
	def load_csv(cls, filepath: str | Path) -> CvSurface:
		"""Rebuilds the surface from its long-format CSV; per-fold values are not stored there"""
		frame = pd.read_csv(filepath)
		alpha_grid = np.unique(frame['alpha'].to_numpy())
		lambda_grid = np.unique(frame['lambda'].to_numpy())
		table = frame.pivot(index='alpha', columns='lambda', values='fold_mean_accuracy')
		accuracy = table.loc[alpha_grid, lambda_grid].to_numpy()
		a, l = best_cell(accuracy)
		return cls(
			lambda_grid=lambda_grid,
			alpha_grid=alpha_grid,
			accuracy=accuracy,
			fold_accuracy=accuracy[None, :, :],
			best_alpha=float(alpha_grid[a]),
			best_lambda=float(lambda_grid[l]),
			best_accuracy=float(accuracy[a, l]),
		)


def best_cell(accuracy: np.ndarray) -> tuple[int, int]:
	"""Index of the maximum; ties go to the smallest alpha, then the smallest lambda"""
	flat = int(np.argmax(accuracy))
	return int(flat // accuracy.shape[1]), int(flat % accuracy.shape[1])
