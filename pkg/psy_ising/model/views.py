from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-9


class IsingError(Exception):
	"""Base class for all psy-ising errors"""


class DimensionError(IsingError, ValueError):
	"""Error raised when a state, row or node index does not fit the model"""


class EnumerationCapError(IsingError):
	"""Error raised when an exact operation would enumerate more states than allowed"""

	def __init__(self, p: int, cap: int):
		self.p = p
		self.cap = cap
		super().__init__(
			f'Exact enumeration over 2^{p} states refused: P={p} exceeds the enumeration cap of {cap}. '
			'Raise the cap explicitly (ModelConfig.enumeration_cap / --enumeration-cap) to override.'
		)


def _default_enumeration_cap() -> int:
	return int(os.getenv('PSY_ISING_ENUMERATION_CAP', '20'))


@dataclass
class ModelConfig:
	"""
	Configuration for exact computations.

	Default values:
		enumeration_cap: 20 (or PSY_ISING_ENUMERATION_CAP)
			Largest P for which operations enumerating all 2^P states are allowed
	"""

	enumeration_cap: int = field(default_factory=_default_enumeration_cap)


def _readonly(arr: np.ndarray) -> np.ndarray:
	arr.setflags(write=False)
	return arr


class IsingModel(BaseModel):
	"""
	Thresholds `tau`, symmetric zero-diagonal weights `omega` and inverse temperature `beta`.

	The pair sum of the Hamiltonian runs over i < j exactly once, which equals the matrix form
	0.5 * x' Omega x only because the stored diagonal is zero.
	"""

	model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

	tau: np.ndarray
	omega: np.ndarray
	beta: float = 1.0

	@model_validator(mode='before')
	@classmethod
	def canonicalize(cls, data: Any) -> Any:
		if not isinstance(data, dict):
			return data
		data = dict(data)
		tau = np.array(data.get('tau'), dtype=float)
		if tau.ndim != 1 or tau.size < 1:
			raise ValueError(f'tau must be a non-empty vector, got shape {tau.shape}')
		p = tau.size
		omega_raw = data.get('omega')
		omega = np.zeros((p, p)) if omega_raw is None else np.array(omega_raw, dtype=float)
		if omega.shape != (p, p):
			raise ValueError(f'omega must be {p}x{p}, got shape {omega.shape}')
		if not (np.all(np.isfinite(tau)) and np.all(np.isfinite(omega))):
			raise ValueError('tau and omega must be finite')
		asymmetry = float(np.max(np.abs(omega - omega.T)))
		if asymmetry > SYMMETRY_TOL:
			raise ValueError(f'omega is not symmetric (max |omega_ij - omega_ji| = {asymmetry:.3g})')
		omega = (omega + omega.T) / 2
		if np.any(np.diag(omega) != 0):
			logger.debug('Diagonal of omega set to zero (diagonal is unidentified)')
			np.fill_diagonal(omega, 0.0)
		beta = float(data.get('beta', 1.0))
		if not np.isfinite(beta) or beta <= 0:
			raise ValueError(f'beta must be a positive finite number, got {beta}')
		data['tau'] = _readonly(tau)
		data['omega'] = _readonly(omega)
		data['beta'] = beta
		return data

	@property
	def p(self) -> int:
		return int(self.tau.size)

	def __eq__(self, other: object) -> bool:
		if not isinstance(other, IsingModel):
			return NotImplemented
		return (
			self.beta == other.beta and np.array_equal(self.tau, other.tau) and np.array_equal(self.omega, other.omega)
		)

	def allclose(self, other: IsingModel, atol: float = 1e-12) -> bool:
		return (
			self.p == other.p
			and abs(self.beta - other.beta) <= atol
			and np.allclose(self.tau, other.tau, rtol=0, atol=atol)
			and np.allclose(self.omega, other.omega, rtol=0, atol=atol)
		)

	def edges(self) -> list[tuple[int, int]]:
		"""Pairs (i, j), i < j, with a nonzero weight"""
		rows, cols = np.nonzero(np.triu(self.omega, k=1))
		return [(int(i), int(j)) for i, j in zip(rows, cols)]

	def at_unit_temperature(self) -> IsingModel:
		"""Same distribution written with beta = 1"""
		return IsingModel(tau=self.beta * self.tau, omega=self.beta * self.omega, beta=1.0)

	def to_dict(self) -> dict[str, Any]:
		return {
			'p': self.p,
			'tau': self.tau.tolist(),
			'omega': self.omega.tolist(),
			'beta': self.beta,
		}

	@classmethod
	def from_dict(cls, data: dict[str, Any]) -> IsingModel:
		model = cls(tau=data['tau'], omega=data.get('omega'), beta=data.get('beta', 1.0))
		if 'p' in data and int(data['p']) != model.p:
			raise ValueError(f'p={data["p"]} does not match length of tau ({model.p})')
		return model

	def save_to_file(self, filepath: str | Path) -> None:
		Path(filepath).parent.mkdir(parents=True, exist_ok=True)
		with open(filepath, 'w', encoding='utf-8') as f:
			json.dump(self.to_dict(), f, indent=2, sort_keys=True)

	@classmethod
	def load_from_file(cls, filepath: str | Path) -> IsingModel:
		with open(filepath, 'r', encoding='utf-8') as f:
			data = json.load(f)
		return cls.from_dict(data)


def check_state(x: Any, p: int) -> np.ndarray:
	"""Validate a ±1 state of length p"""
	arr = np.asarray(x)
	if arr.ndim != 1 or arr.size != p:
		raise DimensionError(f'state must have length {p}, got shape {arr.shape}')
	if not np.all((arr == 1) | (arr == -1)):
		raise DimensionError('state entries must be -1 or +1')
	return arr.astype(np.int8)


def check_node(i: int, p: int) -> int:
	if not 0 <= int(i) < p:
		raise DimensionError(f'node index {i} out of range for P={p}')
	return int(i)


class BinaryDataset(BaseModel):
	"""N x P observations coded -1/+1"""

	model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

	rows: np.ndarray
	column_names: Optional[list[str]] = None

	@model_validator(mode='before')
	@classmethod
	def validate_rows(cls, data: Any) -> Any:
		if not isinstance(data, dict):
			return data
		data = dict(data)
		rows = np.array(data.get('rows'))
		if rows.ndim == 1:
			rows = rows.reshape(-1, 1)
		if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
			raise ValueError(f'rows must be a non-empty N x P matrix, got shape {rows.shape}')
		if not np.all((rows == 1) | (rows == -1)):
			raise ValueError('every cell must be -1 or +1')
		names = data.get('column_names')
		if names is not None and len(names) != rows.shape[1]:
			raise ValueError(f'{len(names)} column names given for {rows.shape[1]} columns')
		data['rows'] = _readonly(rows.astype(np.int8))
		data['column_names'] = None if names is None else [str(n) for n in names]
		return data

	@property
	def n(self) -> int:
		return int(self.rows.shape[0])

	@property
	def p(self) -> int:
		return int(self.rows.shape[1])

	def names(self) -> list[str]:
		return self.column_names or [f'x{i + 1}' for i in range(self.p)]

	def as_float(self) -> np.ndarray:
		return self.rows.astype(float)

	def subset(self, index: np.ndarray) -> BinaryDataset:
		return BinaryDataset(rows=self.rows[index], column_names=self.column_names)

	def permute_columns(self, order: list[int]) -> BinaryDataset:
		names = None if self.column_names is None else [self.column_names[i] for i in order]
		return BinaryDataset(rows=self.rows[:, order], column_names=names)

	@classmethod
	def from_array(cls, values: Any, column_names: Optional[list[str]] = None) -> BinaryDataset:
		"""Accepts -1/+1 or 0/1 coding; 0/1 data is mapped 0 -> -1"""
		arr = np.asarray(values)
		if arr.ndim == 1:
			arr = arr.reshape(-1, 1)
		if np.all((arr == 0) | (arr == 1)) and np.any(arr == 0):
			logger.info(f'Recoding {arr.shape[0]}x{arr.shape[1]} dataset from 0/1 to -1/+1 (0 -> -1)')
			arr = np.where(arr == 0, -1, 1)
		return cls(rows=arr, column_names=column_names)

	def to_frame(self) -> pd.DataFrame:
		return pd.DataFrame(self.rows, columns=self.names())

	def save_csv(self, filepath: str | Path) -> None:
		Path(filepath).parent.mkdir(parents=True, exist_ok=True)
		self.to_frame().to_csv(filepath, index=False)

	@classmethod
	def load_csv(cls, filepath: str | Path) -> BinaryDataset:
		frame = pd.read_csv(filepath)
		return cls.from_array(frame.to_numpy(), column_names=[str(c) for c in frame.columns])


class StateDistribution(BaseModel):
	"""
	Every state over `nodes` in canonical order (first node fastest, -1 before +1).
	Potentials and z overflow to inf for extreme models; probabilities and log_z stay finite.
	"""

	model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

	states: np.ndarray
	potentials: np.ndarray
	probabilities: np.ndarray
	log_z: float
	nodes: tuple[int, ...]

	@model_validator(mode='after')
	def check_normalized(self) -> StateDistribution:
		k = len(self.nodes)
		if self.states.shape != (2**k, k):
			raise ValueError(f'expected {2**k} states over {k} nodes, got {self.states.shape}')
		if not np.isfinite(self.log_z):
			raise ValueError('log_z must be finite')
		if not np.all(np.isfinite(self.probabilities)) or abs(float(np.sum(self.probabilities)) - 1.0) > 1e-10:
			raise ValueError('probabilities do not sum to 1')
		return self

	@property
	def z(self) -> float:
		with np.errstate(over='ignore'):
			return float(np.exp(self.log_z))

	@property
	def n_states(self) -> int:
		return int(self.states.shape[0])

	def index_of(self, x: Any) -> int:
		"""Row of state x in canonical order"""
		x = check_state(x, len(self.nodes))
		return int(np.sum((x == 1).astype(np.int64) << np.arange(x.size, dtype=np.int64)))

	def probability_of(self, x: Any) -> float:
		return float(self.probabilities[self.index_of(x)])

	def to_frame(self) -> pd.DataFrame:
		frame = pd.DataFrame(self.states, columns=[f'x{i + 1}' for i in self.nodes])
		frame['potential'] = self.potentials
		frame['probability'] = self.probabilities
		return frame

	def save_csv(self, filepath: str | Path) -> None:
		Path(filepath).parent.mkdir(parents=True, exist_ok=True)
		self.to_frame().to_csv(filepath, index=False)


class PotentialSet(BaseModel):
	"""
	Node potentials phi_i as (phi_i(-1), phi_i(+1)) rows and pair tables phi_ij indexed
	[x_i, x_j] with index 0 for -1 and 1 for +1. The tables already include beta; `beta` records it
	so the parameters can be recovered.
	"""

	model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

	node_potentials: np.ndarray
	pair_potentials: dict[tuple[int, int], np.ndarray]
	beta: float = 1.0

	@model_validator(mode='after')
	def check_positive(self) -> PotentialSet:
		if self.node_potentials.ndim != 2 or self.node_potentials.shape[1] != 2:
			raise ValueError('node_potentials must be P x 2')
		if np.any(self.node_potentials <= 0):
			raise ValueError('node potentials must be strictly positive')
		if not self.beta > 0:
			raise ValueError('beta must be positive')
		p = self.node_potentials.shape[0]
		for (i, j), table in self.pair_potentials.items():
			if not 0 <= i < j < p:
				raise ValueError(f'pair ({i}, {j}) is not an ordered pair of nodes')
			if np.shape(table) != (2, 2) or np.any(np.asarray(table) <= 0):
				raise ValueError(f'pair table ({i}, {j}) must be a strictly positive 2x2 table')
		return self

	@property
	def p(self) -> int:
		return int(self.node_potentials.shape[0])


class LoglinearView(BaseModel):
	"""Expected cell frequencies E[n(x)] = N Pr(X = x) and nu = ln N - ln Z"""

	model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

	states: np.ndarray
	expected: np.ndarray
	nu: float
	n_total: int

	def to_frame(self) -> pd.DataFrame:
		frame = pd.DataFrame(self.states, columns=[f'x{i + 1}' for i in range(self.states.shape[1])])
		frame['expected'] = self.expected
		return frame


class TemperaturePoint(BaseModel):
	beta: float
	entropy: float
	mean_magnetization: float
	mean_abs_magnetization: float
