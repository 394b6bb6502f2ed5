"""Evolutionary discrete prompt optimization with GA and DE engines."""

from .config import InitStrategy, OptimizerConfig
from .de import DEEngine, DeVariant, de_step
from .ga import GAEngine, ga_step, top_n_merge
from .optimizer import initialize_population, run_optimization
from .selection import SelectionStrategy, roulette_pick, select_parents, tournament_pick
from .types import (CachedFitness, ConfigError, EngineStepError, EvoforgeError, OperatorError,
                    Population, Prompt, ScoredPrompt)

__version__ = "0.1.0"

__all__ = [
    "CachedFitness", "ConfigError", "DEEngine", "DeVariant", "EngineStepError", "EvoforgeError",
    "GAEngine", "InitStrategy", "OperatorError", "OptimizerConfig", "Population", "Prompt",
    "ScoredPrompt", "SelectionStrategy", "de_step", "ga_step", "initialize_population",
    "roulette_pick", "run_optimization", "select_parents", "top_n_merge", "tournament_pick",
]
