from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from psy_ising.bridge.views import MirtModel

SEED_MAX = 2**64 - 1


class SamplerConfig(BaseModel):
	"""How to draw a dataset from an Ising model"""

	model_config = ConfigDict(frozen=True)

	method: Literal['exact', 'gibbs'] = 'gibbs'
	n_samples: int = Field(default=1000, ge=1)
	burn_in: int = Field(default=1000, ge=0)  # gibbs only
	thin: int = Field(default=1, ge=1)
	seed: int = Field(default=0, ge=0, le=SEED_MAX)


class NetworkGenConfig(BaseModel):
	"""
	Scale-free network with uniform weights and thresholds. With `coding="zero_one"` the draws
	parameterize 0/1 responses and are converted to the -1/+1 model; `"pm1"` uses them as is.
	"""

	model_config = ConfigDict(frozen=True)

	p: int = Field(default=10, ge=2)
	attach_prob: float = Field(default=0.05, ge=0.0, le=1.0)
	weight_low: float = 0.75
	weight_high: float = 1.0
	thresh_low: float = -3.0
	thresh_high: float = -1.0
	coding: Literal['zero_one', 'pm1'] = 'zero_one'
	seed: int = Field(default=0, ge=0, le=SEED_MAX)

	@model_validator(mode='after')
	def check_ranges(self) -> NetworkGenConfig:
		if self.weight_low > self.weight_high:
			raise ValueError(f'weight_low ({self.weight_low}) exceeds weight_high ({self.weight_high})')
		if self.thresh_low > self.thresh_high:
			raise ValueError(f'thresh_low ({self.thresh_low}) exceeds thresh_high ({self.thresh_high})')
		return self


class MirtGenConfig(BaseModel):
	"""
	Correlated-factor Rasch-type data. `loading_pattern[i]` is the factor of item i (defaults to
	the first half of the items on factor 0 and the rest on factor 1). `difficulties`,
	`theta_scale` and `theta_shift` override the random draws for controlled experiments.
	"""

	model_config = ConfigDict(frozen=True)

	n: int = Field(default=500, ge=1)
	p: int = Field(default=10, ge=2)
	factor_corr: float = Field(default=0.5, gt=-1.0, lt=1.0)
	loading_pattern: Optional[list[int]] = None
	difficulties: Optional[list[float]] = None
	theta_scale: float = Field(default=1.0, ge=0.0)
	theta_shift: float = 0.0
	seed: int = Field(default=0, ge=0, le=SEED_MAX)

	@model_validator(mode='after')
	def check_pattern(self) -> MirtGenConfig:
		if self.loading_pattern is not None:
			if len(self.loading_pattern) != self.p:
				raise ValueError(f'loading_pattern needs {self.p} entries, got {len(self.loading_pattern)}')
			if min(self.loading_pattern) < 0:
				raise ValueError('factor indices must be non-negative')
		if self.difficulties is not None and len(self.difficulties) != self.p:
			raise ValueError(f'difficulties needs {self.p} entries, got {len(self.difficulties)}')
		m = self.n_factors()
		if m > 1 and self.factor_corr <= -1.0 / (m - 1):
			raise ValueError(f'factor_corr {self.factor_corr} gives a non positive-definite {m}-factor correlation')
		return self

	def pattern(self) -> list[int]:
		if self.loading_pattern is not None:
			return list(self.loading_pattern)
		half = self.p // 2
		return [0] * half + [1] * (self.p - half)

	def n_factors(self) -> int:
		return max(self.pattern()) + 1


class MirtDatasetParameters(BaseModel):
	"""Generating parameters of a simulated MIRT dataset"""

	model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

	mirt: MirtModel
	theta: np.ndarray
	factor_corr: float
	loading_pattern: list[int]
