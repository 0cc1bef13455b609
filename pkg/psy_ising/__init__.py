from psy_ising.logging_config import setup_logging

setup_logging()

from psy_ising.bridge.service import BridgeService as BridgeService
from psy_ising.bridge.views import BridgeConfig as BridgeConfig
from psy_ising.bridge.views import MirtModel as MirtModel
from psy_ising.estimator.crossval.service import CrossValidator as CrossValidator
from psy_ising.estimator.crossval.views import CvSurface as CvSurface
from psy_ising.estimator.service import Estimator as Estimator
from psy_ising.estimator.service import ebic as ebic
from psy_ising.estimator.views import FitConfig as FitConfig
from psy_ising.estimator.views import FitResult as FitResult
from psy_ising.estimator.views import Penalty as Penalty
from psy_ising.model.service import IsingService as IsingService
from psy_ising.model.views import BinaryDataset as BinaryDataset
from psy_ising.model.views import IsingError as IsingError
from psy_ising.model.views import IsingModel as IsingModel
from psy_ising.model.views import ModelConfig as ModelConfig
from psy_ising.sampler.service import Sampler as Sampler
from psy_ising.sampler.views import SamplerConfig as SamplerConfig
from psy_ising.study.service import StudyService as StudyService
from psy_ising.study.views import StudyConfig as StudyConfig

__all__ = [
	'BinaryDataset',
	'BridgeConfig',
	'BridgeService',
	'CrossValidator',
	'CvSurface',
	'Estimator',
	'FitConfig',
	'FitResult',
	'IsingError',
	'IsingModel',
	'IsingService',
	'MirtModel',
	'ModelConfig',
	'Penalty',
	'Sampler',
	'SamplerConfig',
	'StudyConfig',
	'StudyService',
	'ebic',
]
