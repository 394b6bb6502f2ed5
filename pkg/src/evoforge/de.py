"""One DE iteration: each slot evolves against two donors and Prompt 3, keeping the better prompt."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import (EvolutionOperator, FitnessFunction, OperatorError, Population, Prompt,
                    ScoredPrompt, best_of, evaluate_many)

MUTATE_SCOPES = ("diff", "all")
PROMPT3_SOURCES = ("best", "random", "eliminate")


@dataclass(frozen=True)
class DeVariant:
    mutate_scope: str = "diff"
    prompt3_source: str = "best"

    def __post_init__(self):
        if self.mutate_scope not in MUTATE_SCOPES:
            raise ValueError(f"unknown mutate_scope {self.mutate_scope!r}")
        if self.prompt3_source not in PROMPT3_SOURCES:
            raise ValueError(f"unknown prompt3_source {self.prompt3_source!r}")

    @property
    def label(self) -> str:
        return f"{self.mutate_scope}/{self.prompt3_source}"


def sample_donors(population, basic_index: int, rng: np.random.Generator) -> tuple[int, int]:
    """Ordered donor pair (r1, r2), uniform over pairs with r1, r2, basic_index pairwise distinct."""
    n = len(population)
    if n < 3:
        raise ValueError("donor sampling needs at least three members")
    pool = [j for j in range(n) if j != basic_index]
    r1, r2 = rng.choice(len(pool), size=2, replace=False)
    return pool[int(r1)], pool[int(r2)]


def resolve_prompt3(population: Population, variant: DeVariant,
                    rng: np.random.Generator) -> Prompt | None:
    if variant.prompt3_source == "best":
        return best_of(population).prompt
    if variant.prompt3_source == "random":
        return population[int(rng.integers(len(population)))].prompt
    return None


def de_step(population: Population, variant: DeVariant, operator: EvolutionOperator,
            fitness: FitnessFunction, rng: np.random.Generator, iteration: int = 1) -> Population:
    # every slot sees the population as it stood at step start, including best
    n = len(population)
    children = []
    for i, slot_rng in enumerate(rng.spawn(n)):
        r1, r2 = sample_donors(population, i, slot_rng)
        basic, d1, d2 = population[i].prompt, population[r1].prompt, population[r2].prompt
        prompt3 = resolve_prompt3(population, variant, slot_rng)
        text = operator.de_evolve(basic, d1, d2, prompt3, variant, slot_rng)
        if not text or not text.strip():
            raise OperatorError(f"DE operator returned empty text for slot {i}")
        parents = (basic.id, d1.id, d2.id) + ((prompt3.id,) if prompt3 is not None else ())
        children.append(Prompt(text, f"t{iteration}-{i}", "evolved", parents))

    scores = evaluate_many(fitness, [c.text for c in children])
    members = []
    for incumbent, child, score in zip(population, children, scores):
        members.append(ScoredPrompt(child, score) if score > incumbent.score else incumbent)
    return population.replace(members)


class DEEngine:
    name = "de"

    def __init__(self, operator: EvolutionOperator, variant: DeVariant | None = None):
        self.operator = operator
        self.variant = variant or DeVariant()

    def min_population(self) -> int:
        return 3

    def step(self, population: Population, fitness: FitnessFunction,
             rng: np.random.Generator, iteration: int) -> Population:
        return de_step(population, self.variant, self.operator, fitness, rng, iteration)
