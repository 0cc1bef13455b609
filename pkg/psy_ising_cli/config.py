"""
Configuration management for the psy-ising command line

Defaults live in dataclass sections; an optional JSON file and then command-line flags are
layered on top.
"""

import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from psy_ising.bridge.views import BridgeConfig
from psy_ising.estimator.views import FitConfig, Penalty, default_alpha_grid, default_lambda_grid
from psy_ising.model.views import ModelConfig
from psy_ising.sampler.views import SamplerConfig
from psy_ising.study.views import StudyConfig

load_dotenv()


@dataclass
class RunSection:
	"""Settings shared by every subcommand"""

	seed: Optional[int] = None
	threads: Optional[int] = None  # None: all available cores
	format: str = 'csv'  # csv, json
	enumeration_cap: int = int(os.getenv('PSY_ISING_ENUMERATION_CAP', '20'))


@dataclass
class SamplerSection:
	method: str = 'gibbs'  # exact, gibbs
	n_samples: int = 1000
	burn_in: int = 1000
	thin: int = 1


@dataclass
class FitSection:
	method: str = 'disjoint_pl'  # full_ml, joint_pl, disjoint_pl
	alpha: float = 1.0
	lam: Optional[float] = None  # fixed lambda; None selects from the grid
	n_lambda: int = 100
	n_alpha: int = 100
	lambda_selection: str = 'node_ebic'
	edge_rule: str = 'AND'
	ebic_gamma: float = 0.25
	max_iter: int = 10000
	tol: float = 1e-8
	cv_folds: int = 10
	cross_validate: bool = False


@dataclass
class BridgeSection:
	rank_tol: float = 1e-8


@dataclass
class StudySection:
	n: int = 500
	p: int = 10
	grid_size: int = 100
	folds: int = 10
	sampling: str = 'gibbs'
	burn_in: int = 2000
	thin: int = 10
	replicates: int = 1


SECTIONS = ('run', 'sampler', 'fit', 'bridge', 'study')


class ConfigManager:
	"""Resolves the configuration of one command-line run"""

	def __init__(self, config_file: Optional[str] = None):
		self.config_file = Path(config_file) if config_file else None

		# Initialize with defaults
		self.run_config = RunSection()
		self.sampler_config = SamplerSection()
		self.fit_config = FitSection()
		self.bridge_config = BridgeSection()
		self.study_config = StudySection()

		if self.config_file is not None:
			self.load_config()

	def load_config(self) -> None:
		"""Load configuration from file; unknown sections or keys are rejected"""
		with open(self.config_file, 'r', encoding='utf-8') as f:
			config_data = json.load(f)

		unknown = sorted(set(config_data) - set(SECTIONS))
		if unknown:
			raise ValueError(f'Unknown config sections: {unknown}')

		try:
			if 'run' in config_data:
				self.run_config = RunSection(**config_data['run'])
			if 'sampler' in config_data:
				self.sampler_config = SamplerSection(**config_data['sampler'])
			if 'fit' in config_data:
				self.fit_config = FitSection(**config_data['fit'])
			if 'bridge' in config_data:
				self.bridge_config = BridgeSection(**config_data['bridge'])
			if 'study' in config_data:
				self.study_config = StudySection(**config_data['study'])
		except TypeError as e:
			raise ValueError(f'Invalid config file {self.config_file}: {e}') from e

	def to_dict(self) -> Dict[str, Any]:
		return {
			'run': asdict(self.run_config),
			'sampler': asdict(self.sampler_config),
			'fit': asdict(self.fit_config),
			'bridge': asdict(self.bridge_config),
			'study': asdict(self.study_config),
		}

	@staticmethod
	def _update(section: Any, **kwargs) -> None:
		names = {f.name for f in fields(section)}
		for key, value in kwargs.items():
			if value is not None and key in names:
				setattr(section, key, value)

	def update_run_config(self, **kwargs) -> None:
		"""Update shared settings; None values keep the current setting"""
		self._update(self.run_config, **kwargs)

	def update_sampler_config(self, **kwargs) -> None:
		self._update(self.sampler_config, **kwargs)

	def update_fit_config(self, **kwargs) -> None:
		self._update(self.fit_config, **kwargs)

	def update_bridge_config(self, **kwargs) -> None:
		self._update(self.bridge_config, **kwargs)

	def update_study_config(self, **kwargs) -> None:
		self._update(self.study_config, **kwargs)

	def validate_config(self) -> List[str]:
		"""Validate current configuration and return list of issues"""
		issues = []

		if self.run_config.format not in ('csv', 'json'):
			issues.append(f"Unknown output format '{self.run_config.format}'")
		if self.run_config.threads is not None and self.run_config.threads < 1:
			issues.append('threads must be at least 1')
		if self.run_config.seed is not None and self.run_config.seed < 0:
			issues.append('seed must be non-negative')
		if self.sampler_config.method not in ('exact', 'gibbs'):
			issues.append(f"Unknown sampling method '{self.sampler_config.method}'")
		if self.fit_config.method not in ('full_ml', 'joint_pl', 'disjoint_pl'):
			issues.append(f"Unknown fit method '{self.fit_config.method}'")
		if self.fit_config.edge_rule not in ('AND', 'OR'):
			issues.append(f"Unknown edge rule '{self.fit_config.edge_rule}'")
		if not 0 <= self.fit_config.alpha <= 1:
			issues.append('alpha must be between 0 and 1')
		if self.fit_config.lam is not None and self.fit_config.lam < 0:
			issues.append('lambda must be non-negative')
		if self.fit_config.cv_folds < 2 or self.study_config.folds < 2:
			issues.append('cross-validation needs at least 2 folds')
		if self.study_config.grid_size < 1:
			issues.append('grid_size must be at least 1')

		return issues

	def threads(self) -> int:
		return self.run_config.threads or os.cpu_count() or 1

	def model_config(self) -> ModelConfig:
		return ModelConfig(enumeration_cap=self.run_config.enumeration_cap)

	def make_sampler_config(self) -> SamplerConfig:
		return SamplerConfig(
			method=self.sampler_config.method,
			n_samples=self.sampler_config.n_samples,
			burn_in=self.sampler_config.burn_in,
			thin=self.sampler_config.thin,
			seed=self.run_config.seed or 0,
		)

	def make_fit_config(self) -> FitConfig:
		section = self.fit_config
		penalty = None if section.lam is None else Penalty(alpha=section.alpha, lam=section.lam)
		return FitConfig(
			method=section.method,
			penalty=penalty,
			alpha=section.alpha,
			lambda_grid=default_lambda_grid(section.n_lambda),
			lambda_selection=section.lambda_selection,
			edge_rule=section.edge_rule,
			ebic_gamma=section.ebic_gamma,
			max_iter=section.max_iter,
			tol=section.tol,
			cv_folds=section.cv_folds,
			seed=self.run_config.seed or 0,
			threads=self.threads(),
		)

	def make_bridge_config(self) -> BridgeConfig:
		return BridgeConfig(rank_tol=self.bridge_config.rank_tol)

	def cv_grids(self) -> tuple[list[float], list[float]]:
		return default_lambda_grid(self.fit_config.n_lambda), default_alpha_grid(self.fit_config.n_alpha)

	def make_study_config(self, seeds: tuple[int, int, int]) -> StudyConfig:
		section = self.study_config
		return StudyConfig(
			n=section.n,
			p=section.p,
			lambda_grid=default_lambda_grid(section.grid_size),
			alpha_grid=default_alpha_grid(section.grid_size),
			folds=section.folds,
			seed_a=seeds[0],
			seed_b=seeds[1],
			seed_cv=seeds[2],
			sampling=section.sampling,
			burn_in=section.burn_in,
			thin=section.thin,
			edge_rule=self.fit_config.edge_rule,
			threads=self.threads(),
		)
