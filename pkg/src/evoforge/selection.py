"""Parent selection for the GA engine: roulette wheel, tournament, uniform random."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .types import Population, best_index

KINDS = ("roulette", "tournament", "random")

# added to shifted scores so the worst member keeps a non-zero slice
SHIFT_EPS = 1e-6


@dataclass(frozen=True)
class SelectionStrategy:
    kind: str = "roulette"
    tournament_size: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown selection kind {self.kind!r}")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be positive")


def _scores(population: Population | Sequence[float]) -> np.ndarray:
    if isinstance(population, Population):
        return np.asarray(population.scores, dtype=float)
    return np.asarray(list(population), dtype=float)


def roulette_weights(scores: Sequence[float]) -> np.ndarray:
    """Selection weights s_i, shifted by -min(s)+eps when any score is negative."""
    s = np.asarray(scores, dtype=float)
    if s.size and s.min() < 0:
        s = s - s.min() + SHIFT_EPS
    if (s < 0).any():
        raise ValueError("negative roulette weight after shift")
    return s


def roulette_probabilities(scores: Sequence[float], exclude: int | None = None) -> np.ndarray:
    w = roulette_weights(scores)
    if exclude is not None:
        w = w.copy()
        w[exclude] = 0.0
    total = w.sum()
    if total <= 0:
        w = np.ones_like(w)
        if exclude is not None:
            w[exclude] = 0.0
        total = w.sum()
    return w / total


def roulette_pick(population, rng: np.random.Generator, exclude: int | None = None) -> int:
    """Draw index i with probability s_i / sum(s); uniform when every weight is zero."""
    p = roulette_probabilities(_scores(population), exclude)
    cdf = np.cumsum(p)
    u = rng.random() * cdf[-1]
    i = int(np.searchsorted(cdf, u, side="right"))
    # guards u landing exactly on the final edge through rounding
    i = min(i, len(p) - 1)
    while p[i] == 0:
        i -= 1
    return i


def tournament_pick(population, k: int, rng: np.random.Generator,
                    exclude: int | None = None) -> int:
    scores = _scores(population)
    n = len(scores)
    if not 1 <= k <= n:
        raise ValueError(f"tournament size {k} outside [1, {n}]")
    pool = np.array([i for i in range(n) if i != exclude])
    k = min(k, len(pool))
    entrants = np.sort(rng.choice(pool, size=k, replace=False))
    return int(entrants[best_index(scores[entrants].tolist())])


def random_pick(population, rng: np.random.Generator, exclude: int | None = None) -> int:
    n = len(_scores(population))
    pool = [i for i in range(n) if i != exclude]
    return int(pool[rng.integers(len(pool))])


def pick(population, strategy: SelectionStrategy, rng: np.random.Generator,
         exclude: int | None = None) -> int:
    if strategy.kind == "roulette":
        return roulette_pick(population, rng, exclude)
    if strategy.kind == "tournament":
        return tournament_pick(population, strategy.tournament_size, rng, exclude)
    return random_pick(population, rng, exclude)


def select_parents(population, strategy: SelectionStrategy,
                   rng: np.random.Generator) -> tuple[int, int]:
    """Two distinct parent indices; the second draw excludes the first."""
    n = len(_scores(population))
    if n < 2:
        raise ValueError("parent selection needs at least two members")
    first = pick(population, strategy, rng)
    second = pick(population, strategy, rng, exclude=first)
    return first, second
