"""
psy-ising command line

Subcommands for exact computation, sampling, estimation, IRT conversion and the elastic-net study.
"""

from .config import ConfigManager
from .main import dispatch, render_cli_reference

__all__ = ['ConfigManager', 'dispatch', 'render_cli_reference']
