import logging
from typing import Optional, Sequence

import numpy as np
from sklearn.model_selection import KFold

from psy_ising.estimator.crossval.views import CvSurface, best_cell
from psy_ising.estimator.service import Estimator, symmetrize
from psy_ising.estimator.views import FitConfig, Penalty
from psy_ising.model.views import BinaryDataset, IsingError, IsingModel
from psy_ising.utils import ordered_map, time_execution_sync

logger = logging.getLogger(__name__)


def _ascending_grid(values: Sequence[float], name: str) -> np.ndarray:
	grid = np.unique(np.asarray(values, dtype=float))
	if grid.size == 0:
		raise ValueError(f'{name} must not be empty')
	return grid


class CrossValidator:
	"""
	K-fold cross-validation of disjoint penalized fits over an (alpha, lambda) grid.

	Each (alpha, fold) pair is one task: the lambda path is fit in descending order with warm
	starts and every cell is scored on the held-out rows.
	"""

	def __init__(self, estimator: Optional[Estimator] = None):
		self.estimator = estimator or Estimator()

	def fold_indices(self, n: int, cfg: FitConfig) -> list[tuple[np.ndarray, np.ndarray]]:
		if cfg.cv_folds > n:
			raise ValueError(f'{cfg.cv_folds} folds requested for only {n} rows')
		kfold = KFold(n_splits=cfg.cv_folds, shuffle=True, random_state=cfg.seed % 2**32)
		return list(kfold.split(np.arange(n)))

	def score(self, model: IsingModel, held_out: BinaryDataset) -> float:
		"""Negative mean squared difference between Pr(X_i = +1 | rest) and the response coded 0/1"""
		rows = held_out.as_float()
		predicted = self.estimator.ising_service.conditional_probabilities(model, rows)
		return -float(np.mean((predicted - (rows + 1.0) / 2.0) ** 2))

	def _path_scores(
		self,
		train: BinaryDataset,
		test: BinaryDataset,
		alpha: float,
		lambdas_desc: np.ndarray,
		cfg: FitConfig,
	) -> np.ndarray:
		penalties = [Penalty(alpha=alpha, lam=float(lam)) for lam in lambdas_desc]
		paths = [self.estimator.fit_node_path(train, i, penalties, cfg) for i in range(train.p)]
		scores = np.empty(lambdas_desc.size)
		for k in range(lambdas_desc.size):
			fits = [path[k] for path in paths]
			model = IsingModel(
				tau=[fit.tau for fit in fits],
				omega=symmetrize(np.vstack([fit.omega_row for fit in fits]), cfg.edge_rule),
			)
			scores[k] = self.score(model, test)
		return scores

	@time_execution_sync('--cross_validate')
	def cross_validate(
		self,
		data: BinaryDataset,
		lambda_grid: Sequence[float],
		alpha_grid: Sequence[float],
		cfg: Optional[FitConfig] = None,
	) -> CvSurface:
		cfg = cfg or FitConfig()
		lambdas = _ascending_grid(lambda_grid, 'lambda_grid')
		alphas = _ascending_grid(alpha_grid, 'alpha_grid')
		if lambdas[0] < 0 or alphas[0] < 0 or alphas[-1] > 1:
			raise ValueError('lambda values must be >= 0 and alpha values in [0, 1]')
		folds = self.fold_indices(data.n, cfg)
		lambdas_desc = lambdas[::-1]

		tasks = [(a, k) for a in range(alphas.size) for k in range(len(folds))]

		def run(task: tuple[int, int]) -> np.ndarray:
			a, k = task
			train_index, test_index = folds[k]
			try:
				scores = self._path_scores(data.subset(train_index), data.subset(test_index), alphas[a], lambdas_desc, cfg)
			except IsingError as e:
				raise IsingError(f'Cross-validation failed at alpha={alphas[a]:.4g}, fold {k}: {e}') from e
			return scores[::-1]

		results = ordered_map(run, tasks, cfg.threads)
		fold_accuracy = np.empty((len(folds), alphas.size, lambdas.size))
		for (a, k), scores in zip(tasks, results):
			fold_accuracy[k, a] = scores
		accuracy = fold_accuracy.mean(axis=0)
		a, l = best_cell(accuracy)
		logger.info(
			f'Cross-validation ({len(folds)} folds, {alphas.size}x{lambdas.size} grid): '
			f'best alpha={alphas[a]:.4g}, lambda={lambdas[l]:.4g}, accuracy={accuracy[a, l]:.6f}'
		)
		return CvSurface(
			lambda_grid=lambdas,
			alpha_grid=alphas,
			accuracy=accuracy,
			fold_accuracy=fold_accuracy,
			best_alpha=float(alphas[a]),
			best_lambda=float(lambdas[l]),
			best_accuracy=float(accuracy[a, l]),
		)
