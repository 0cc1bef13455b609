"""
Command-line entry point: psy-ising <subcommand> [flags]

stdout carries data (CSV or JSON), stderr carries logs, the resolved configuration and errors.
Exit codes: 0 success, 1 unexpected internal error, 2 usage error, 3 numerical failure.
"""

import argparse
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, TextIO

import numpy as np
import pandas as pd

from psy_ising.bridge.service import BridgeService
from psy_ising.bridge.views import MirtModel
from psy_ising.estimator.crossval.service import CrossValidator
from psy_ising.estimator.service import Estimator
from psy_ising.estimator.views import ConvergenceError, FitResult, Penalty
from psy_ising.model.service import IsingService
from psy_ising.model.views import BinaryDataset, DimensionError, IsingError, IsingModel
from psy_ising.sampler.service import Sampler
from psy_ising.study.service import StudyService, dominant_components
from psy_ising.utils import derive_seed
from psy_ising_cli.config import ConfigManager

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

HELP_WIDTH = 100
STOCHASTIC_COMMANDS = ('sample', 'replicate')


class UsageError(Exception):
	"""Invalid combination of flags or inputs"""


class ErrorReport:
	"""Machine-readable error line written to stderr"""

	@staticmethod
	def exit_code_for(error: BaseException) -> int:
		if isinstance(error, DimensionError):
			return EXIT_USAGE
		if isinstance(error, (IsingError, np.linalg.LinAlgError, ArithmeticError)):
			return EXIT_NUMERICAL
		if isinstance(error, (UsageError, ValueError, OSError)):
			return EXIT_USAGE
		return EXIT_INTERNAL

	@staticmethod
	def format_error(error: BaseException, exit_code: int) -> str:
		return json.dumps({'error': type(error).__name__, 'message': str(error), 'exit_code': exit_code}, sort_keys=True)


def _to_builtin(value: Any) -> Any:
	if isinstance(value, np.ndarray):
		return value.tolist()
	if isinstance(value, np.generic):
		return value.item()
	raise TypeError(f'{type(value).__name__} is not JSON serializable')


def _truncate(mirt: MirtModel, rank: Optional[int]) -> MirtModel:
	if rank is None:
		return mirt
	if rank < 0:
		raise UsageError('--rank must be non-negative')
	a = np.array(mirt.a)
	a[:, rank:] = 0.0
	return MirtModel(a=a, delta=mirt.delta, shift_c=mirt.shift_c)


def _formatter(prog: str) -> argparse.HelpFormatter:
	return argparse.HelpFormatter(prog, width=HELP_WIDTH)


def build_parser() -> argparse.ArgumentParser:
	common = argparse.ArgumentParser(add_help=False)
	common.add_argument('--config', help='JSON config file with run/sampler/fit/bridge/study sections')
	common.add_argument('--seed', type=int, help='Seed of every random stream (required for stochastic commands)')
	common.add_argument('--threads', type=int, help='Worker threads (default: all cores)')
	common.add_argument('--format', choices=['csv', 'json'], help='Output format on stdout (default: csv)')
	common.add_argument('--output', help='Write the result to this file instead of stdout')
	common.add_argument('--enumeration-cap', type=int, help='Largest P for exact enumeration (default: 20)')

	parser = argparse.ArgumentParser(
		prog='psy-ising', description='Ising models for binary psychometric data', formatter_class=_formatter
	)
	commands = parser.add_subparsers(dest='command', required=True, metavar='command')

	def add(name: str, help_text: str) -> argparse.ArgumentParser:
		return commands.add_parser(name, parents=[common], help=help_text, description=help_text, formatter_class=_formatter)

	table = add('table', 'Probability of every state of a model')
	table.add_argument('--model', required=True, help='Ising model JSON')

	entropy = add('entropy', 'Entropy of a model, optionally over a range of inverse temperatures')
	entropy.add_argument('--model', required=True, help='Ising model JSON')
	entropy.add_argument('--betas', type=float, nargs='+', help='Inverse temperatures for a sweep')

	loglik = add('loglik', 'Log-likelihood and pseudolikelihood of data under a model')
	loglik.add_argument('--model', required=True, help='Ising model JSON')
	loglik.add_argument('--data', required=True, help='Dataset CSV (-1/+1 or 0/1)')

	sample = add('sample', 'Draw a dataset from a model')
	sample.add_argument('--model', required=True, help='Ising model JSON')
	sample.add_argument('--n', type=int, dest='n_samples', help='Number of rows')
	sample.add_argument('--method', choices=['exact', 'gibbs'], help='Sampler (default: gibbs)')
	sample.add_argument('--burn-in', type=int, help='Gibbs sweeps discarded before recording')
	sample.add_argument('--thin', type=int, help='Record every thin-th sweep')

	estimate = add('estimate', 'Fit an Ising model to data')
	estimate.add_argument('--data', required=True, help='Dataset CSV (-1/+1 or 0/1)')
	estimate.add_argument('--method', choices=['full_ml', 'joint_pl', 'disjoint', 'disjoint_pl'], help='Estimator')
	estimate.add_argument('--alpha', type=float, help='Elastic-net mixing (1 = LASSO, 0 = ridge)')
	estimate.add_argument('--lambda', type=float, dest='lam', help='Fixed penalty; omitted: selected from the grid')
	estimate.add_argument('--n-lambda', type=int, help='Size of the log-spaced lambda grid on [0.001, 1]')
	estimate.add_argument('--lambda-selection', choices=['node_ebic', 'global_ebic'], help='How lambda is chosen')
	estimate.add_argument('--edge-rule', choices=['AND', 'OR'], help='Combination of the two estimates of each edge')
	estimate.add_argument('--ebic-gamma', type=float, help='EBIC hyperparameter (default: 0.25)')
	estimate.add_argument('--max-iter', type=int, help='Iteration limit')
	estimate.add_argument('--tol', type=float, help='Convergence tolerance')
	estimate.add_argument('--cv', action='store_true', dest='cross_validate', help='Choose (alpha, lambda) by cross-validation')
	estimate.add_argument('--folds', type=int, dest='cv_folds', help='Cross-validation folds (default: 10)')
	estimate.add_argument('--n-alpha', type=int, help='Size of the alpha grid on [0, 1] for --cv')

	convert = add('convert', 'Convert between an Ising model and its multidimensional IRT form')
	convert.add_argument('--to', required=True, choices=['mirt', 'ising'], help='Target representation')
	convert.add_argument('--model', required=True, help='Ising model JSON (--to mirt) or MIRT model JSON (--to ising)')
	convert.add_argument('--rank-tol', type=float, help='Relative eigenvalue threshold for a latent dimension')
	convert.add_argument('--rank', type=int, help='Keep only this many leading latent dimensions')

	density = add('density', 'Marginal density of one latent dimension')
	density.add_argument('--model', required=True, help='Ising or MIRT model JSON')
	density.add_argument('--dim', type=int, default=0, help='Latent dimension, 0-based (default: 0)')
	density.add_argument('--grid-min', type=float, default=-4.0, help='Lowest theta (default: -4)')
	density.add_argument('--grid-max', type=float, default=4.0, help='Highest theta (default: 4)')
	density.add_argument('--points', type=int, default=161, help='Grid points (default: 161)')

	eigen = add('eigen', 'Shifted eigenvalue spectrum of a network')
	source = eigen.add_mutually_exclusive_group(required=True)
	source.add_argument('--model', help='Ising model JSON')
	source.add_argument('--fit', help='Fit result JSON')
	eigen.add_argument('--rank-tol', type=float, help='Relative eigenvalue threshold for a latent dimension')

	replicate = add('replicate', 'Run the two-dataset elastic-net study')
	replicate.add_argument('--output-dir', help='Directory for datasets, surfaces, fits and report')
	replicate.add_argument('--replicates', type=int, help='Independent replicates (default: 1)')
	replicate.add_argument('--grid-size', type=int, help='Points per tuning grid (default: 100)')
	replicate.add_argument('--n', type=int, help='Rows per dataset (default: 500)')
	replicate.add_argument('--p', type=int, help='Items per dataset (default: 10)')
	replicate.add_argument('--folds', type=int, help='Cross-validation folds (default: 10)')
	replicate.add_argument('--sampling', choices=['gibbs', 'exact'], help='Sampler for the network dataset')
	replicate.add_argument('--burn-in', type=int, help='Gibbs burn-in sweeps (default: 2000)')
	replicate.add_argument('--thin', type=int, help='Gibbs thinning (default: 10)')

	return parser


def subcommand_parsers(parser: argparse.ArgumentParser) -> dict[str, argparse.ArgumentParser]:
	for action in parser._actions:
		if isinstance(action, argparse._SubParsersAction):
			return dict(action.choices)
	return {}


def render_cli_reference() -> str:
	"""Markdown reference of every subcommand, generated from the parser"""
	parser = build_parser()
	lines = ['# psy-ising command reference', '', '```', parser.format_help().rstrip(), '```', '']
	for name, sub in subcommand_parsers(parser).items():
		lines += [f'## {name}', '', '```', sub.format_help().rstrip(), '```', '']
	return '\n'.join(lines)


def resolve_config(args: argparse.Namespace) -> ConfigManager:
	manager = ConfigManager(args.config)
	manager.update_run_config(
		seed=args.seed, threads=args.threads, format=args.format, enumeration_cap=args.enumeration_cap
	)
	options = vars(args)
	if args.command == 'sample':
		manager.update_sampler_config(**{k: options.get(k) for k in ('method', 'n_samples', 'burn_in', 'thin')})
	elif args.command == 'estimate':
		method = 'disjoint_pl' if args.method == 'disjoint' else args.method
		manager.update_fit_config(
			method=method,
			cross_validate=args.cross_validate or None,
			**{
				k: options.get(k)
				for k in (
					'alpha',
					'lam',
					'n_lambda',
					'n_alpha',
					'lambda_selection',
					'edge_rule',
					'ebic_gamma',
					'max_iter',
					'tol',
					'cv_folds',
				)
			},
		)
	elif args.command in ('convert', 'eigen'):
		manager.update_bridge_config(rank_tol=args.rank_tol)
	elif args.command == 'replicate':
		manager.update_study_config(
			replicates=args.replicates,
			grid_size=args.grid_size,
			n=args.n,
			p=args.p,
			folds=args.folds,
			sampling=args.sampling,
			burn_in=args.burn_in,
			thin=args.thin,
		)

	issues = manager.validate_config()
	if issues:
		raise UsageError('; '.join(issues))
	stochastic = args.command in STOCHASTIC_COMMANDS or (args.command == 'estimate' and manager.fit_config.cross_validate)
	if stochastic and manager.run_config.seed is None:
		raise UsageError(f'{args.command} is stochastic: --seed is required')
	return manager


class Runner:
	"""Thin adapters from parsed arguments to library calls"""

	def __init__(self, args: argparse.Namespace, manager: ConfigManager, out: TextIO):
		self.args = args
		self.manager = manager
		self.out = out
		self.ising_service = IsingService(manager.model_config())
		self.estimator = Estimator(self.ising_service)
		self.bridge_service = BridgeService(manager.make_bridge_config(), self.ising_service)

	@property
	def fmt(self) -> str:
		return self.manager.run_config.format

	def emit_json(self, payload: Any) -> None:
		json.dump(payload, self.out, indent=2, sort_keys=True, default=_to_builtin)
		self.out.write('\n')

	def emit_frame(self, frame: pd.DataFrame) -> None:
		if self.fmt == 'json':
			self.emit_json(frame.to_dict(orient='list'))
		else:
			frame.to_csv(self.out, index=False, float_format='%.10g')

	def load_model(self, path: str) -> IsingModel:
		return IsingModel.load_from_file(path)

	def run_table(self) -> int:
		dist = self.ising_service.full_distribution(self.load_model(self.args.model))
		if self.fmt == 'json':
			self.emit_json({**dist.to_frame().to_dict(orient='list'), 'z': dist.z, 'log_z': dist.log_z})
		else:
			self.emit_frame(dist.to_frame())
		return EXIT_OK

	def run_entropy(self) -> int:
		model = self.load_model(self.args.model)
		payload: dict[str, Any] = {'beta': model.beta, 'entropy': self.ising_service.entropy(model)}
		if self.args.betas:
			sweep = self.ising_service.temperature_sweep(model, self.args.betas)
			frame = pd.DataFrame([point.model_dump() for point in sweep])
			if self.fmt == 'csv':
				self.emit_frame(frame)
				return EXIT_OK
			payload['sweep'] = frame.to_dict(orient='list')
		self.emit_json(payload)
		return EXIT_OK

	def run_loglik(self) -> int:
		model = self.load_model(self.args.model)
		data = BinaryDataset.load_csv(self.args.data)
		payload: dict[str, Any] = {
			'n': data.n,
			'pseudolikelihood': self.estimator.pseudolikelihood(model, data),
			'node_conditional': [self.estimator.node_conditional_loglik(model, data, i) for i in range(model.p)],
		}
		if model.p <= self.ising_service.config.enumeration_cap:
			payload['log_likelihood'] = self.estimator.log_likelihood(model, data)
		self.emit_json(payload)
		return EXIT_OK

	def run_sample(self) -> int:
		model = self.load_model(self.args.model)
		data = Sampler(self.ising_service).sample(model, self.manager.make_sampler_config())
		if self.fmt == 'json':
			self.emit_json({'columns': data.names(), 'rows': data.rows.tolist()})
		else:
			self.emit_frame(data.to_frame())
		return EXIT_OK

	def run_estimate(self) -> int:
		data = BinaryDataset.load_csv(self.args.data)
		cfg = self.manager.make_fit_config()
		if self.manager.fit_config.cross_validate:
			lambda_grid, alpha_grid = self.manager.cv_grids()
			surface = CrossValidator(self.estimator).cross_validate(data, lambda_grid, alpha_grid, cfg)
			cfg = cfg.model_copy(
				update={'method': 'disjoint_pl', 'penalty': Penalty(alpha=surface.best_alpha, lam=surface.best_lambda)}
			)
		result = self.estimator.fit(data, cfg)
		if self.fmt == 'json':
			self.emit_json({'fit': result.to_dict(), 'summary': self.estimator.describe(result, data)})
		else:
			frame = pd.DataFrame(result.omega_hat, columns=data.names())
			frame.insert(0, 'tau', result.tau_hat)
			frame.insert(0, 'node', data.names())
			self.emit_frame(frame)
		if not result.converged:
			raise ConvergenceError(f'{result.method} fit did not converge within {cfg.max_iter} iterations')
		return EXIT_OK

	def run_convert(self) -> int:
		if self.args.to == 'mirt':
			model = self.load_model(self.args.model)
			mirt, bridge = self.bridge_service.ising_to_mirt(model)
			mirt = _truncate(mirt, self.args.rank)
			self.emit_json({'mirt': mirt.to_dict(), 'eigenvalues': bridge.eigenvalues.tolist(), 'rank': bridge.rank})
		else:
			mirt = _truncate(MirtModel.load_from_file(self.args.model), self.args.rank)
			self.emit_json(self.bridge_service.mirt_to_ising(mirt).to_dict())
		return EXIT_OK

	def run_density(self) -> int:
		with open(self.args.model, 'r', encoding='utf-8') as f:
			raw = json.load(f)
		if 'a' in raw:
			mirt = MirtModel.load_from_file(self.args.model)
		else:
			mirt, _ = self.bridge_service.ising_to_mirt(IsingModel.from_dict(raw))
		if self.args.points < 2 or self.args.grid_max <= self.args.grid_min:
			raise UsageError('density needs --points >= 2 and --grid-max > --grid-min')
		grid = np.linspace(self.args.grid_min, self.args.grid_max, self.args.points)
		values = self.bridge_service.latent_marginal_density(mirt, self.args.dim, grid)
		self.emit_frame(pd.DataFrame({'theta': grid, 'density': values}))
		return EXIT_OK

	def run_eigen(self) -> int:
		model = self.load_model(self.args.model) if self.args.model else FitResult.load_from_file(self.args.fit).to_model()
		rank, eigenvalues = self.bridge_service.rank_of_network(model)
		if self.fmt == 'json':
			self.emit_json(
				{
					'eigenvalues': eigenvalues.tolist(),
					'rank': rank,
					'dominant_components': dominant_components(eigenvalues),
				}
			)
		else:
			self.emit_frame(pd.DataFrame({'component': np.arange(1, eigenvalues.size + 1), 'eigenvalue': eigenvalues}))
		return EXIT_OK

	def run_replicate(self) -> int:
		seed = self.manager.run_config.seed
		seeds = (derive_seed(seed, 0), derive_seed(seed, 1), derive_seed(seed, 2))
		study_cfg = self.manager.make_study_config(seeds)
		service = StudyService(
			sampler=Sampler(self.ising_service),
			cross_validator=CrossValidator(self.estimator),
			bridge_service=self.bridge_service,
		)
		output_dir = Path(self.args.output_dir) if self.args.output_dir else None
		if self.manager.study_config.replicates == 1:
			report = service.run_study(study_cfg, output_dir)
			self.emit_json(report.to_dict())
		else:
			summary = service.run_replicates(study_cfg, self.manager.study_config.replicates)
			if output_dir is not None:
				summary.save_to_file(output_dir / 'replicates.json')
			self.emit_json(summary.model_dump(mode='json'))
		return EXIT_OK


def dispatch(argv: Optional[Sequence[str]] = None, stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
	stdout = stdout or sys.stdout
	stderr = stderr or sys.stderr
	parser = build_parser()
	try:
		args = parser.parse_args(argv)
	except SystemExit as e:
		return EXIT_OK if e.code in (0, None) else EXIT_USAGE

	try:
		manager = resolve_config(args)
	except (UsageError, ValueError, OSError) as e:
		stderr.write(ErrorReport.format_error(e, EXIT_USAGE) + '\n')
		return EXIT_USAGE
	stderr.write(json.dumps({'command': args.command, 'config': manager.to_dict()}, sort_keys=True) + '\n')

	buffer = io.StringIO()
	runner = Runner(args, manager, buffer)
	handler: Callable[[], int] = getattr(runner, f'run_{args.command}')
	try:
		code = handler()
	except Exception as e:
		code = ErrorReport.exit_code_for(e)
		if isinstance(e, ConvergenceError):
			_write_result(buffer.getvalue(), args.output, stdout)
		stderr.write(ErrorReport.format_error(e, code) + '\n')
		if code == EXIT_INTERNAL:
			logger.error(f'{args.command} failed unexpectedly', exc_info=True)
		else:
			logger.debug('Command failed', exc_info=True)
		return code
	_write_result(buffer.getvalue(), args.output, stdout)
	return code


def _write_result(text: str, output: Optional[str], stdout: TextIO) -> None:
	if output:
		Path(output).parent.mkdir(parents=True, exist_ok=True)
		Path(output).write_text(text, encoding='utf-8')
	else:
		stdout.write(text)


def main() -> None:
	sys.exit(dispatch(sys.argv[1:]))


if __name__ == '__main__':
	main()
