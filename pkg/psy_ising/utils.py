import logging
import time
from concurrent.futures import ThreadPoolExecutor
from functools import wraps
from typing import Callable, Iterable, ParamSpec, TypeVar

import numpy as np

logger = logging.getLogger(__name__)


R = TypeVar('R')
P = ParamSpec('P')
T = TypeVar('T')


def time_execution_sync(additional_text: str = '') -> Callable[[Callable[P, R]], Callable[P, R]]:
	def decorator(func: Callable[P, R]) -> Callable[P, R]:
		@wraps(func)
		def wrapper(*args: P.args, **kwargs: P.kwargs) -> R:
			start_time = time.time()
			result = func(*args, **kwargs)
			execution_time = time.time() - start_time
			logger.debug(f'{additional_text} Execution time: {execution_time:.2f} seconds')
			return result

		return wrapper

	return decorator


def ordered_map(func: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
	"""Apply `func` to every item, possibly in threads, returning results in input order"""
	items = list(items)
	if threads is not None and threads <= 1 or len(items) <= 1:
		return [func(item) for item in items]
	with ThreadPoolExecutor(max_workers=threads) as executor:
		return list(executor.map(func, items))


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
	"""PCG64 generator from an integer seed or a spawned SeedSequence"""
	if isinstance(seed, np.random.SeedSequence):
		return np.random.Generator(np.random.PCG64(seed))
	return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def spawn_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
	"""Independent child streams of one root seed"""
	return np.random.SeedSequence(int(seed)).spawn(n)


def derive_seed(seed: int, index: int) -> int:
	"""64-bit integer seed of the `index`-th child stream of `seed`"""
	child = spawn_seeds(seed, index + 1)[index]
	return int(child.generate_state(1, dtype=np.uint64)[0])
