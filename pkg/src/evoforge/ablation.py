"""Initialization and DE-variant ablation grid on the synthetic task.

Each cell runs a few seeds with the simulated operators and yields one summary row, so the
init strategies and DE variants can be compared side by side.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, replace
from typing import Sequence

from .config import InitStrategy, OptimizerConfig
from .de import DEEngine, DeVariant
from .ga import GAEngine
from .optimizer import initialize_population, rng_streams, run_optimization
from .reporting import convergence_summary
from .sim import (DEFAULT_KEYWORDS, SimulatedOperator, SyntheticFitness, SyntheticTask,
                  default_manual_prompts, default_vocabulary)
from .types import CachedFitness


def init_cells(n: int) -> list[InitStrategy]:
    half = n // 2
    return [
        InitStrategy("bottom"),
        InitStrategy("random"),
        InitStrategy("random", n - half, half),
        InitStrategy("top"),
        InitStrategy("top", n - half, half),
    ]


DE_CELLS = (
    DeVariant("diff", "best"),
    DeVariant("all", "best"),
    DeVariant("diff", "random"),
    DeVariant("diff", "eliminate"),
)

ROW_COLUMNS = ("axis", "engine", "cell", "seeds", "best_mean", "best_std", "final_mean",
               "operator_calls", "converged_runs")


@dataclass(frozen=True)
class Cell:
    axis: str
    engine: str
    label: str
    config: OptimizerConfig


def ablation_cells(population_size: int = 10, iterations: int = 10,
                   engines: Sequence[str] = ("ga", "de")) -> list[Cell]:
    base = OptimizerConfig(population_size=population_size, iterations=iterations)
    cells = []
    for engine in engines:
        for init in init_cells(population_size):
            cells.append(Cell("init", engine, init.label(population_size),
                              replace(base, engine=engine, init=init)))
    for variant in DE_CELLS:
        cells.append(Cell("de_variant", "de", variant.label, replace(base, engine="de",
                                                                      de_variant=variant)))
    return cells


def run_cell(cell: Cell, seeds: Sequence[int], manual_prompts: Sequence[str],
             task: SyntheticTask) -> dict:
    bests, means, calls, converged = [], [], 0, 0
    for seed in seeds:
        cfg = replace(cell.config, rng_seed=seed)
        operator = SimulatedOperator(default_vocabulary())
        engine = GAEngine(operator, cfg.selection) if cfg.engine == "ga" \
            else DEEngine(operator, cfg.de_variant)
        fitness = CachedFitness(SyntheticFitness(task), task.task_id)
        init_rng, loop_rng = rng_streams(seed)
        init = initialize_population(manual_prompts, cfg, operator, fitness, init_rng)
        best, ledger = run_optimization(cfg, init, engine, fitness, rng=loop_rng)
        bests.append(best.score)
        means.append(ledger.records[-1]["mean"])
        calls += operator.calls
        if convergence_summary(ledger)["iterations_to_convergence"] != "not converged":
            converged += 1
    return {
        "axis": cell.axis,
        "engine": cell.engine,
        "cell": cell.label,
        "seeds": len(seeds),
        "best_mean": statistics.fmean(bests),
        "best_std": statistics.stdev(bests) if len(bests) > 1 else 0.0,
        "final_mean": statistics.fmean(means),
        "operator_calls": calls,
        "converged_runs": converged,
    }


def run_ablation(seeds: Sequence[int] = (0, 1, 2), population_size: int = 10,
                 iterations: int = 10, engines: Sequence[str] = ("ga", "de"),
                 manual_prompts: Sequence[str] | None = None,
                 keywords: Sequence[str] = DEFAULT_KEYWORDS) -> list[dict]:
    if not seeds:
        raise ValueError("ablation needs at least one seed")
    task = SyntheticTask("keyword_coverage", frozenset(keywords))
    manual = list(manual_prompts or default_manual_prompts(2 * population_size,
                                                           keywords=keywords))
    return [run_cell(c, seeds, manual, task)
            for c in ablation_cells(population_size, iterations, engines)]
