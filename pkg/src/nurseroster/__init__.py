"""Co-evolutionary genetic algorithm for grade-structured nurse rostering."""

from .engine import GAConfig, RunResult, preset, run, run_many
from .instgen import GenSpec, generate
from .model import Individual, Instance, enumerate_patterns, validate_instance
from .oracle import exact_solve

__all__ = [
    "GAConfig",
    "GenSpec",
    "Individual",
    "Instance",
    "RunResult",
    "enumerate_patterns",
    "exact_solve",
    "generate",
    "preset",
    "run",
    "run_many",
    "validate_instance",
]

__version__ = "0.1.0"
