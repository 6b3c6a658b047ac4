"""Annealing-time dynamics of small transverse-field Ising problems."""

__version__ = "0.1.0"

from .config import ExperimentConfig
from .simulator import AnnealingSimulator
from .file_processor import DataFileProcessor
from .formatters import ResultFormatter
from .app import ExperimentApp

__all__ = [
    "ExperimentConfig",
    "AnnealingSimulator",
    "DataFileProcessor",
    "ResultFormatter",
    "ExperimentApp",
]
