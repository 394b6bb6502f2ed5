"""Shared domain types: prompts, scored prompts, populations, fitness caching."""

from __future__ import annotations

import hashlib
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Protocol, Sequence

ORIGINS = ("manual", "llm-resampled", "evolved")


class EvoforgeError(Exception):
    """Base class for all package errors."""


class ConfigError(EvoforgeError):
    """Invalid configuration. ``diagnostics`` holds one ``"field.path: message"`` per problem."""

    def __init__(self, diagnostics: Sequence[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class OperatorError(EvoforgeError):
    """An evolution operator could not produce a usable prompt."""


class EngineStepError(EvoforgeError):
    def __init__(self, iteration: int, cause: BaseException):
        self.iteration = iteration
        self.cause = cause
        super().__init__(f"iteration {iteration}: {cause}")


@dataclass(frozen=True)
class Prompt:
    text: str
    id: str
    origin: str = "manual"
    parent_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"prompt {self.id!r} has empty text")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        object.__setattr__(self, "parent_ids", tuple(self.parent_ids))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "origin": self.origin,
            "parent_ids": list(self.parent_ids),
        }


@dataclass(frozen=True)
class ScoredPrompt:
    prompt: Prompt
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"non-finite score {self.score!r} for prompt {self.prompt.id!r}")

    @property
    def text(self) -> str:
        return self.prompt.text

    def to_dict(self) -> dict:
        d = self.prompt.to_dict()
        d["score"] = self.score
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScoredPrompt":
        prompt = Prompt(d["text"], d["id"], d.get("origin", "manual"), tuple(d.get("parent_ids", ())))
        return cls(prompt, float(d["score"]))


@dataclass(frozen=True)
class Population:
    """Ordered multiset of scored prompts whose size must equal ``capacity``."""

    members: tuple[ScoredPrompt, ...]
    capacity: int = field(default=-1)

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if self.capacity == -1:
            object.__setattr__(self, "capacity", len(self.members))
        if self.capacity < 1:
            raise ValueError("population capacity must be positive")
        if len(self.members) != self.capacity:
            raise ValueError(
                f"population holds {len(self.members)} members, capacity is {self.capacity}"
            )

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, i: int) -> ScoredPrompt:
        return self.members[i]

    def __iter__(self) -> Iterator[ScoredPrompt]:
        return iter(self.members)

    @property
    def scores(self) -> list[float]:
        return [m.score for m in self.members]

    @property
    def texts(self) -> list[str]:
        return [m.text for m in self.members]

    def mean_score(self) -> float:
        return sum(self.scores) / len(self.members)

    def replace(self, members: Iterable[ScoredPrompt]) -> "Population":
        return Population(tuple(members), self.capacity)


def best_index(scores: Sequence[float]) -> int:
    """Index of the maximal score; ties go to the lowest index."""
    if len(scores) == 0:
        raise ValueError("empty population")
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return best


def best_of(population: Population | Sequence[ScoredPrompt]) -> ScoredPrompt:
    members = list(population)
    if not members:
        raise ValueError("best_of on an empty population")
    return members[best_index([m.score for m in members])]


class FitnessFunction(Protocol):
    def evaluate(self, text: str) -> float: ...


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class CachedFitness:
    """Wraps a fitness function with a thread-safe score cache keyed by (text digest, task id).

    ``evaluations`` counts calls that reached the wrapped function.
    """

    def __init__(self, fitness: FitnessFunction, task_id: str = "task", enabled: bool = True,
                 max_workers: int = 1):
        self.fitness = fitness
        self.task_id = task_id
        self.enabled = enabled
        self.max_workers = max_workers
        self.evaluations = 0
        self._cache: dict[tuple[str, str], float] = {}
        self._lock = threading.Lock()

    def evaluate(self, text: str) -> float:
        key = (text_digest(text), self.task_id)
        if self.enabled:
            with self._lock:
                if key in self._cache:
                    return self._cache[key]
        score = float(self.fitness.evaluate(text))
        if not math.isfinite(score):
            raise ValueError(f"fitness returned non-finite score {score!r}")
        with self._lock:
            self.evaluations += 1
            if self.enabled:
                self._cache[key] = score
        return score

    def evaluate_many(self, texts: Sequence[str]) -> list[float]:
        if self.max_workers <= 1 or len(texts) <= 1:
            return [self.evaluate(t) for t in texts]
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            return list(pool.map(self.evaluate, texts))


def evaluate_many(fitness: FitnessFunction, texts: Sequence[str]) -> list[float]:
    many = getattr(fitness, "evaluate_many", None)
    if many is not None:
        return list(many(texts))
    return [float(fitness.evaluate(t)) for t in texts]


class EvolutionOperator:
    """Produces child prompt text from parents. Subclasses count every call in ``calls``."""

    def __init__(self):
        self.calls = 0
        self._lock = threading.Lock()

    def _count(self) -> None:
        with self._lock:
            self.calls += 1

    def crossover_mutate(self, parent1: Prompt, parent2: Prompt, rng) -> str:
        raise NotImplementedError

    def de_evolve(self, basic: Prompt, donor1: Prompt, donor2: Prompt,
                  prompt3: Prompt | None, variant, rng) -> str:
        raise NotImplementedError

    def resample(self, seed: Prompt, rng) -> str:
        raise NotImplementedError
