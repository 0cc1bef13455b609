from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.stats import norm

from psy_ising.model.views import IsingError

POSTERIOR_SD = float(np.sqrt(0.5))


class QuadratureDimensionError(IsingError):
	"""Error raised when tensor quadrature is asked for too many latent dimensions"""


@dataclass
class BridgeConfig:
	"""
	Configuration for the Ising / MIRT equivalence.

	Default values:
		rank_tol: 1e-8
			Eigenvalues of the shifted weight matrix at or below rank_tol * largest eigenvalue
			count as zero (no latent dimension)

		quadrature_nodes: 40
			Gauss-Hermite nodes per latent dimension

		max_quadrature_dims: 3
			Largest number of non-degenerate dimensions integrated by tensor quadrature
	"""

	rank_tol: float = 1e-8
	quadrature_nodes: int = 40
	max_quadrature_dims: int = 3


class MirtModel(BaseModel):
	"""
	Multidimensional 2PL model on -1/+1 items:
	Pr(X_i = x_i | theta) = exp(x_i (a_i' theta - delta_i)) / sum_x exp(x (a_i' theta - delta_i)).
	"""

	model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

	a: np.ndarray
	delta: np.ndarray
	shift_c: float = 0.0

	@model_validator(mode='before')
	@classmethod
	def validate_shapes(cls, data: Any) -> Any:
		if not isinstance(data, dict):
			return data
		data = dict(data)
		a = np.array(data.get('a'), dtype=float)
		delta = np.array(data.get('delta'), dtype=float)
		if a.ndim == 1:
			a = a.reshape(-1, 1)
		if a.ndim != 2 or a.shape[1] < 1:
			raise ValueError(f'a must be a P x M matrix with M >= 1, got shape {a.shape}')
		if delta.ndim != 1 or delta.size != a.shape[0]:
			raise ValueError(f'delta must have one entry per item ({a.shape[0]}), got shape {delta.shape}')
		if not (np.all(np.isfinite(a)) and np.all(np.isfinite(delta))):
			raise ValueError('a and delta must be finite')
		a.setflags(write=False)
		delta.setflags(write=False)
		data['a'] = a
		data['delta'] = delta
		data['shift_c'] = float(data.get('shift_c', 0.0))
		return data

	@property
	def p(self) -> int:
		return int(self.a.shape[0])

	@property
	def m(self) -> int:
		return int(self.a.shape[1])

	def active_dims(self) -> list[int]:
		"""Dimensions with at least one nonzero discrimination"""
		return [j for j in range(self.m) if np.any(self.a[:, j] != 0)]

	def to_dict(self) -> dict[str, Any]:
		return {
			'p': self.p,
			'm': self.m,
			'a': self.a.tolist(),
			'delta': self.delta.tolist(),
			'shift_c': self.shift_c,
		}

	def save_to_file(self, filepath: str | Path) -> None:
		Path(filepath).parent.mkdir(parents=True, exist_ok=True)
		with open(filepath, 'w', encoding='utf-8') as f:
			json.dump(self.to_dict(), f, indent=2, sort_keys=True)

	@classmethod
	def load_from_file(cls, filepath: str | Path) -> MirtModel:
		with open(filepath, 'r', encoding='utf-8') as f:
			data = json.load(f)
		model = cls(a=data['a'], delta=data['delta'], shift_c=data.get('shift_c', 0.0))
		if (int(data.get('p', model.p)), int(data.get('m', model.m))) != (model.p, model.m):
			raise ValueError('p/m fields do not match the shape of a')
		return model


class EigenBridge(BaseModel):
	"""Omega + cI = Q diag(eigenvalues) Q', eigenvalues descending"""

	model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

	shift_c: float
	q: np.ndarray
	eigenvalues: np.ndarray
	rank: int

	def to_dict(self) -> dict[str, Any]:
		return {
			'shift_c': self.shift_c,
			'q': self.q.tolist(),
			'eigenvalues': self.eigenvalues.tolist(),
			'rank': self.rank,
		}


class LatentPosterior(BaseModel):
	"""theta | x ~ N(mean, sd^2 I) with sd = sqrt(1/2)"""

	model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

	mean: np.ndarray
	sd: float = POSTERIOR_SD

	def density(self, theta: Any) -> np.ndarray:
		"""Joint density at one point (length M) or at each row of a K x M grid"""
		theta = np.atleast_2d(np.asarray(theta, dtype=float))
		return np.prod(norm.pdf(theta, loc=self.mean, scale=self.sd), axis=-1)
