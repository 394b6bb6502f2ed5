"""Population initialization and the generic evolve-evaluate-update loop."""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from .config import OptimizerConfig
from .reporting import RunLedger, log_iteration
from .types import (EngineStepError, EvolutionOperator, EvoforgeError, FitnessFunction,
                    OperatorError, Population, Prompt, ScoredPrompt, best_of, evaluate_many)

log = logging.getLogger(__name__)


def rng_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (initialization, evolution) generators derived from one seed."""
    init_ss, loop_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(loop_ss)


def as_prompts(manual: Sequence[Prompt | str]) -> list[Prompt]:
    out = []
    for i, p in enumerate(manual):
        out.append(p if isinstance(p, Prompt) else Prompt(p.strip(), f"m{i}", "manual"))
    return out


def initialize_population(manual_prompts: Sequence[Prompt | str], config: OptimizerConfig,
                          resampler: EvolutionOperator | None, fitness: FitnessFunction,
                          rng: np.random.Generator | None = None) -> Population:
    """Keep ``config.keep_count`` manual prompts chosen by dev score and fill the rest of the
    population with resampled variations of them (round-robin over the kept prompts)."""
    if rng is None:
        rng = rng_streams(config.rng_seed)[0]
    manual = as_prompts(manual_prompts)
    n, keep, nvar = config.population_size, config.keep_count, config.init.variations
    if not manual:
        raise ValueError("no manual prompts given")
    if len(manual) < keep:
        raise ValueError(f"{keep} manual prompts requested, only {len(manual)} available")
    if keep + nvar != n:
        raise ValueError(f"keep ({keep}) + variations ({nvar}) != population size ({n})")

    pick = config.init.pick
    if pick == "random":
        chosen = sorted(int(i) for i in rng.choice(len(manual), size=keep, replace=False))
        scores = evaluate_many(fitness, [manual[i].text for i in chosen])
        kept = [ScoredPrompt(manual[i], s) for i, s in zip(chosen, scores)]
    else:
        scores = evaluate_many(fitness, [p.text for p in manual])
        sign = -1 if pick == "top" else 1
        order = sorted(range(len(manual)), key=lambda i: (sign * scores[i], i))[:keep]
        kept = [ScoredPrompt(manual[i], scores[i]) for i in order]

    variants = []
    if nvar:
        if resampler is None:
            raise ValueError("resampled initialization needs a resampling operator")
        for j, sub in enumerate(rng.spawn(nvar)):
            seed = kept[j % keep].prompt
            text = resampler.resample(seed, sub)
            if not text or not text.strip():
                raise OperatorError(f"resampling {seed.id} returned empty text")
            variants.append(Prompt(text, f"v{j}", "llm-resampled", (seed.id,)))
        vscores = evaluate_many(fitness, [v.text for v in variants])
        variants = [ScoredPrompt(v, s) for v, s in zip(variants, vscores)]
    return Population(tuple(kept + variants), n)


def _counter(obj, attr: str) -> int:
    return int(getattr(obj, attr, 0) or 0)


def run_optimization(config: OptimizerConfig, init: Population, engine, fitness: FitnessFunction,
                     ledger: RunLedger | None = None, budget=None,
                     rng: np.random.Generator | None = None) -> tuple[ScoredPrompt, RunLedger]:
    """Run ``config.iterations`` engine steps from ``init``; return the best final member.

    Every iteration (record 0 is ``init``) is appended to ``ledger`` before the next step.
    ``budget`` is anything with a ``snapshot()`` method, normally the provider's ledger.
    """
    config.validate()
    if len(init) != config.population_size:
        raise ValueError(f"initial population has {len(init)} members, "
                         f"expected {config.population_size}")
    if rng is None:
        rng = rng_streams(config.rng_seed)[1]
    if ledger is None:
        ledger = RunLedger(run_id="run", config=config.to_dict())
    operator = getattr(engine, "operator", None)

    def snapshot():
        return budget.snapshot() if budget is not None else {}

    calls0, evals0 = _counter(operator, "calls"), _counter(fitness, "evaluations")
    log_iteration(ledger, init, snapshot(), calls0, evals0, iteration=0)
    population = init
    for t in range(1, config.iterations + 1):
        calls0, evals0 = _counter(operator, "calls"), _counter(fitness, "evaluations")
        try:
            population = engine.step(population, fitness, rng, t)
        except EvoforgeError as exc:
            raise EngineStepError(t, exc) from exc
        if len(population) != config.population_size:
            raise EngineStepError(t, RuntimeError("engine changed the population size"))
        log_iteration(ledger, population, snapshot(),
                      _counter(operator, "calls") - calls0,
                      _counter(fitness, "evaluations") - evals0, iteration=t)
        log.info("iteration %d: best %.4f mean %.4f", t, best_of(population).score,
                 population.mean_score())
    best = best_of(population)
    ledger.final_best = best.to_dict()
    return best, ledger
