import numpy as np
import pytest

from psy_ising.estimator.crossval.service import CrossValidator
from psy_ising.estimator.crossval.views import CvSurface, best_cell
from psy_ising.estimator.views import FitConfig
from psy_ising.model.views import BinaryDataset, IsingError, IsingModel
from psy_ising.sampler.service import Sampler
from psy_ising.sampler.views import SamplerConfig

LAMBDAS = [0.0, 0.01, 0.1, 1.0]
ALPHAS = [0.0, 0.5, 1.0]


@pytest.fixture
def chain_data(chain_model):
	return Sampler().sample(chain_model, SamplerConfig(method='exact', n_samples=300, seed=17))


@pytest.fixture
def validator():
	return CrossValidator()


def test_surface_shape_and_best_cell(validator, chain_data):
	surface = validator.cross_validate(chain_data, LAMBDAS, ALPHAS, FitConfig(cv_folds=5, seed=3))
	assert surface.accuracy.shape == (3, 4)
	assert surface.fold_accuracy.shape == (5, 3, 4)
	assert surface.n_folds == 5
	assert surface.best_accuracy == np.max(surface.accuracy)
	a, l = best_cell(surface.accuracy)
	assert surface.best_alpha == ALPHAS[a]
	assert surface.best_lambda == LAMBDAS[l]
	assert np.all(surface.accuracy <= 0)
	assert np.all(surface.accuracy >= -1)


def test_cross_validation_is_deterministic(validator, chain_data):
	cfg = FitConfig(cv_folds=4, seed=9)
	first = validator.cross_validate(chain_data, LAMBDAS, ALPHAS, cfg)
	second = validator.cross_validate(chain_data, LAMBDAS, ALPHAS, cfg.model_copy(update={'threads': 1}))
	assert np.array_equal(first.fold_accuracy, second.fold_accuracy)
	assert (first.best_alpha, first.best_lambda) == (second.best_alpha, second.best_lambda)


def test_grids_are_sorted_and_deduplicated(validator, chain_data):
	surface = validator.cross_validate(chain_data, [1.0, 0.1, 0.1], [1.0, 0.0], FitConfig(cv_folds=3))
	assert surface.lambda_grid.tolist() == [0.1, 1.0]
	assert surface.alpha_grid.tolist() == [0.0, 1.0]


def test_unpenalized_column_does_not_depend_on_alpha(validator, chain_data):
	surface = validator.cross_validate(chain_data, LAMBDAS, ALPHAS, FitConfig(cv_folds=3, seed=1))
	column = surface.column(0.0)
	assert column == pytest.approx(np.full(3, column[0]), rel=1e-6)


def test_empty_network_scores_the_marginal_fit(validator, chain_data):
	"""At lambda >= lambda_max every node predicts its training mean"""
	surface = validator.cross_validate(chain_data, [100.0], [1.0], FitConfig(cv_folds=3, seed=2))
	assert surface.best_lambda == 100.0
	assert -0.25 <= surface.best_accuracy < -0.2


def test_score_of_a_perfect_predictor(validator):
	model = IsingModel(tau=[20.0, 20.0], omega=np.zeros((2, 2)))
	held_out = BinaryDataset(rows=np.ones((5, 2), dtype=int))
	assert validator.score(model, held_out) == pytest.approx(0.0, abs=1e-12)


def test_too_many_folds(validator):
	data = BinaryDataset(rows=[[1, -1], [-1, 1], [1, 1]])
	with pytest.raises(ValueError):
		validator.cross_validate(data, [0.1], [1.0], FitConfig(cv_folds=4))


def test_bad_grids(validator, chain_data):
	with pytest.raises(ValueError):
		validator.cross_validate(chain_data, [], [1.0], FitConfig(cv_folds=3))
	with pytest.raises(ValueError):
		validator.cross_validate(chain_data, [0.1], [1.5], FitConfig(cv_folds=3))


def test_fold_failure_names_the_cell(validator):
	"""A training fold with a constant column cannot be fit without a penalty"""
	rows = np.ones((6, 2), dtype=int)
	rows[0, 1] = -1
	rows[0, 0] = -1
	with pytest.raises(IsingError) as info:
		validator.cross_validate(BinaryDataset(rows=rows), [0.0], [1.0], FitConfig(cv_folds=2, seed=0))
	assert 'alpha=' in str(info.value)


def test_best_cell_tie_break():
	accuracy = np.array([[-0.2, -0.1, -0.1], [-0.1, -0.3, -0.2]])
	assert best_cell(accuracy) == (0, 1)


def test_surface_csv_round_trip(tmp_path, validator, chain_data):
	surface = validator.cross_validate(chain_data, LAMBDAS, ALPHAS, FitConfig(cv_folds=3, seed=4))
	path = tmp_path / 'cv.csv'
	surface.save_csv(path)
	loaded = CvSurface.load_csv(path)
	assert np.array_equal(loaded.accuracy, surface.accuracy)
	assert (loaded.best_alpha, loaded.best_lambda) == (surface.best_alpha, surface.best_lambda)
	frame = surface.to_frame()
	assert list(frame.columns) == ['alpha', 'lambda', 'fold_mean_accuracy']
	assert len(frame) == 12


def test_plateau_matches_the_independence_model(validator, chain_data):
	cfg = FitConfig(cv_folds=4, seed=5)
	surface = validator.cross_validate(chain_data, [0.01, 100.0], [0.5, 1.0], cfg)
	scores = []
	for train_index, test_index in validator.fold_indices(chain_data.n, cfg):
		train = chain_data.subset(train_index).as_float()
		test = chain_data.subset(test_index).as_float()
		predicted = np.mean((train + 1.0) / 2.0, axis=0)
		scores.append(-np.mean((predicted - (test + 1.0) / 2.0) ** 2))
	np.testing.assert_allclose(surface.accuracy[:, 1], np.mean(scores), atol=1e-6)


def test_independent_items_select_a_large_lambda(validator):
	model = IsingModel(tau=[0.2, -0.1, 0.0, 0.3], omega=np.zeros((4, 4)))
	data = Sampler().sample(model, SamplerConfig(method='exact', n_samples=3000, seed=23))
	lambdas = np.logspace(-3, 0, 7)
	surface = validator.cross_validate(data, lambdas, [1.0], FitConfig(cv_folds=5, seed=4))
	assert surface.best_lambda >= lambdas[3]
	assert surface.best_accuracy - surface.accuracy[0, -1] < 1e-3
