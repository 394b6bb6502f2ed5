"""One GA iteration: N independent parent selections, N offspring, keep the top N of the union."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .selection import SelectionStrategy, select_parents
from .types import (EvolutionOperator, FitnessFunction, OperatorError, Population, Prompt,
                    ScoredPrompt, evaluate_many)


def top_n_merge(old: Sequence[ScoredPrompt], new: Sequence[ScoredPrompt], n: int) -> Population:
    """Sort the union by (score desc, incumbent first, index asc) and keep ``n``."""
    if len(old) + len(new) < n:
        raise ValueError(f"cannot keep {n} of {len(old) + len(new)} members")
    keyed = [(-m.score, 0, i, m) for i, m in enumerate(old)]
    keyed += [(-m.score, 1, i, m) for i, m in enumerate(new)]
    keyed.sort(key=lambda k: k[:3])
    return Population(tuple(k[3] for k in keyed[:n]), n)


def make_offspring(population: Population, strategy: SelectionStrategy,
                   operator: EvolutionOperator, rngs: Sequence[np.random.Generator],
                   iteration: int) -> list[Prompt]:
    children = []
    for i, rng in enumerate(rngs):
        r1, r2 = select_parents(population, strategy, rng)
        p1, p2 = population[r1].prompt, population[r2].prompt
        text = operator.crossover_mutate(p1, p2, rng)
        if not text or not text.strip():
            raise OperatorError(f"GA operator returned empty text for offspring {i}")
        children.append(Prompt(text, f"t{iteration}-{i}", "evolved", (p1.id, p2.id)))
    return children


def ga_step(population: Population, strategy: SelectionStrategy, operator: EvolutionOperator,
            fitness: FitnessFunction, rng: np.random.Generator, iteration: int = 1) -> Population:
    n = len(population)
    children = make_offspring(population, strategy, operator, rng.spawn(n), iteration)
    scores = evaluate_many(fitness, [c.text for c in children])
    offspring = [ScoredPrompt(c, s) for c, s in zip(children, scores)]
    return top_n_merge(population.members, offspring, n)


class GAEngine:
    name = "ga"

    def __init__(self, operator: EvolutionOperator, strategy: SelectionStrategy | None = None):
        self.operator = operator
        self.strategy = strategy or SelectionStrategy()

    def min_population(self) -> int:
        return 2

    def step(self, population: Population, fitness: FitnessFunction,
             rng: np.random.Generator, iteration: int) -> Population:
        return ga_step(population, self.strategy, self.operator, fitness, rng, iteration)
