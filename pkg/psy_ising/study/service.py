import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from psy_ising.bridge.service import BridgeService
from psy_ising.estimator.crossval.service import CrossValidator
from psy_ising.estimator.service import Estimator
from psy_ising.estimator.views import FitConfig, FitResult, Penalty
from psy_ising.model.views import BinaryDataset, IsingError, IsingModel
from psy_ising.sampler.service import Sampler
from psy_ising.sampler.views import MirtGenConfig, NetworkGenConfig, SamplerConfig
from psy_ising.study.views import DatasetReport, ReplicationSummary, StudyConfig, StudyReport
from psy_ising.utils import derive_seed, time_execution_sync

logger = logging.getLogger(__name__)


def dominant_components(eigenvalues: Sequence[float], ratio: float = 2.0, reference: int = 3) -> int:
	"""
	How many of the `reference - 1` largest eigenvalues exceed `ratio` times the `reference`-th
	largest (taken as 0 when the spectrum is shorter or it is negative). A spectrum with two
	dominant components gives 2 under the defaults.
	"""
	values = np.sort(np.asarray(eigenvalues, dtype=float))[::-1]
	floor = max(float(values[reference - 1]), 0.0) if values.size >= reference else 0.0
	leading = values[: reference - 1]
	return int(np.count_nonzero(leading > ratio * floor))


class StudyService:
	"""Runs the two-dataset elastic-net study and writes its artifacts"""

	def __init__(
		self,
		sampler: Optional[Sampler] = None,
		cross_validator: Optional[CrossValidator] = None,
		bridge_service: Optional[BridgeService] = None,
	):
		self.sampler = sampler or Sampler()
		self.cross_validator = cross_validator or CrossValidator()
		self.bridge_service = bridge_service or BridgeService()

	@property
	def estimator(self) -> Estimator:
		return self.cross_validator.estimator

	def generate_datasets(self, cfg: StudyConfig) -> tuple[BinaryDataset, BinaryDataset, IsingModel]:
		dataset_a, _ = self.sampler.generate_mirt_dataset(
			MirtGenConfig(n=cfg.n, p=cfg.p, factor_corr=cfg.factor_corr, seed=cfg.seed_a)
		)
		model_b = self.sampler.generate_scale_free_model(
			NetworkGenConfig(
				p=cfg.p, attach_prob=cfg.attach_prob, coding=cfg.network_coding, seed=derive_seed(cfg.seed_b, 0)
			)
		)
		dataset_b = self.sampler.sample(
			model_b,
			SamplerConfig(
				method=cfg.sampling,
				n_samples=cfg.n,
				burn_in=cfg.burn_in,
				thin=cfg.thin,
				seed=derive_seed(cfg.seed_b, 1),
			),
		)
		return dataset_a, dataset_b, model_b

	def eigen_report(self, fit: FitResult) -> np.ndarray:
		_, eigenvalues = self.bridge_service.rank_of_network(fit.to_model())
		return eigenvalues

	def analyse(self, label: str, data: BinaryDataset, cfg: StudyConfig) -> DatasetReport:
		fit_cfg = FitConfig(method='disjoint_pl', edge_rule=cfg.edge_rule, cv_folds=cfg.folds, seed=cfg.seed_cv, threads=cfg.threads)
		try:
			surface = self.cross_validator.cross_validate(data, cfg.lambda_grid, cfg.alpha_grid, fit_cfg)
			best = Penalty(alpha=surface.best_alpha, lam=surface.best_lambda)
			fit = self.estimator.fit_disjoint(data, fit_cfg.model_copy(update={'penalty': best}))
		except IsingError as e:
			raise IsingError(f'Dataset {label}: {e}') from e
		eigenvalues = self.eigen_report(fit)
		report = DatasetReport(
			label=label,
			surface=surface,
			fit=fit,
			eigenvalues=eigenvalues,
			dominant_components=dominant_components(eigenvalues, cfg.dominant_ratio),
			min_lambda_column_mean=float(np.mean(surface.accuracy[:, 0])),
			min_lambda_column_best=float(np.max(surface.accuracy[:, 0])),
			max_lambda_column_mean=float(np.mean(surface.accuracy[:, -1])),
		)
		logger.result(
			f'Dataset {label}: alpha*={report.best_alpha:.3f}, lambda*={report.best_lambda:.4g} '
			f'({report.verdict}), {report.dominant_components} dominant components'
		)
		return report

	@time_execution_sync('--run_study')
	def run_study(self, cfg: StudyConfig, output_dir: Optional[str | Path] = None) -> StudyReport:
		dataset_a, dataset_b, model_b = self.generate_datasets(cfg)
		report = StudyReport(
			config=cfg,
			datasets={'a': self.analyse('a', dataset_a, cfg), 'b': self.analyse('b', dataset_b, cfg)},
		)
		if output_dir is not None:
			self.write_artifacts(report, Path(output_dir), dataset_a, dataset_b, model_b)
		return report

	@staticmethod
	def write_artifacts(
		report: StudyReport, output_dir: Path, dataset_a: BinaryDataset, dataset_b: BinaryDataset, model_b: IsingModel
	) -> None:
		output_dir.mkdir(parents=True, exist_ok=True)
		dataset_a.save_csv(output_dir / 'datasetA.csv')
		dataset_b.save_csv(output_dir / 'datasetB.csv')
		model_b.save_to_file(output_dir / 'model_b_true.json')
		for label, dataset_report in report.datasets.items():
			dataset_report.surface.save_csv(output_dir / f'cv_surface_{label}.csv')
			dataset_report.fit.save_to_file(output_dir / f'fit_{label}.json')
			eigen = pd.DataFrame(
				{
					'component': np.arange(1, dataset_report.eigenvalues.size + 1),
					'eigenvalue': dataset_report.eigenvalues,
				}
			)
			eigen.to_csv(output_dir / f'eigen_{label}.csv', index=False, float_format='%.17g')
		report.save_to_file(output_dir / 'report.json')
		logger.info(f'Study artifacts written to {output_dir}')

	def run_replicates(self, cfg: StudyConfig, n_replicates: int) -> ReplicationSummary:
		"""Repeats the study with seeds derived from the configured ones"""
		if n_replicates < 1:
			raise ValueError(f'n_replicates must be at least 1, got {n_replicates}')
		reports = []
		for r in range(n_replicates):
			replicate_cfg = cfg.model_copy(
				update={
					'seed_a': derive_seed(cfg.seed_a, r),
					'seed_b': derive_seed(cfg.seed_b, r),
					'seed_cv': derive_seed(cfg.seed_cv, r),
				}
			)
			logger.info(f'Replicate {r + 1}/{n_replicates}')
			reports.append(self.run_study(replicate_cfg))

		def fraction(flags: list[bool]) -> float:
			return float(np.mean(flags))

		summary = ReplicationSummary(
			n_replicates=n_replicates,
			a_ridge_favored=fraction([rep.datasets['a'].verdict == 'ridge-favored' for rep in reports]),
			b_lasso_favored=fraction([rep.datasets['b'].verdict == 'lasso-favored' for rep in reports]),
			a_two_dominant=fraction([rep.datasets['a'].dominant_components == 2 for rep in reports]),
			regularization_helps_a=fraction([rep.datasets['a'].regularization_helps for rep in reports]),
			regularization_helps_b=fraction([rep.datasets['b'].regularization_helps for rep in reports]),
			replicates=[
				{
					'seed_a': rep.config.seed_a,
					'seed_b': rep.config.seed_b,
					'seed_cv': rep.config.seed_cv,
					'a': rep.datasets['a'].to_dict(),
					'b': rep.datasets['b'].to_dict(),
				}
				for rep in reports
			],
		)
		logger.result(
			f'{n_replicates} replicates: A ridge-favored {summary.a_ridge_favored:.0%}, '
			f'B lasso-favored {summary.b_lasso_favored:.0%}, A two dominant {summary.a_two_dominant:.0%}'
		)
		return summary
