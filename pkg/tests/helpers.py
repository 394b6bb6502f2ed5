"""Small fakes shared by the engine tests."""

from __future__ import annotations

import hashlib

from evoforge.types import EvolutionOperator, Population, Prompt, ScoredPrompt


def pop(scores, prefix="p"):
    return Population(tuple(ScoredPrompt(Prompt(f"{prefix}{i}", f"{prefix}{i}"), float(s))
                            for i, s in enumerate(scores)))


class TableFitness:
    """Scores looked up by text; unknown texts get ``default``."""

    def __init__(self, table=None, default=0.0):
        self.table = dict(table or {})
        self.default = default
        self.calls = []

    def evaluate(self, text):
        self.calls.append(text)
        return self.table.get(text, self.default)


class RandomFitness:
    """Deterministic pseudo-random score per text."""

    def __init__(self, seed=0):
        self.seed = seed

    def evaluate(self, text):
        digest = hashlib.sha256(f"{self.seed}:{text}".encode()).digest()
        return int.from_bytes(digest[:8], "big") / 2 ** 64


class RecordingOperator(EvolutionOperator):
    """Emits fresh child texts and records every call's arguments."""

    def __init__(self, prefix="c"):
        super().__init__()
        self.prefix = prefix
        self.log = []

    def crossover_mutate(self, parent1, parent2, rng):
        self._count()
        self.log.append((parent1.id, parent2.id))
        return f"{self.prefix}{self.calls}-{int(rng.integers(10**9))}"

    def de_evolve(self, basic, donor1, donor2, prompt3, variant, rng):
        self._count()
        self.log.append((basic.id, donor1.id, donor2.id, None if prompt3 is None else prompt3.id))
        return f"{self.prefix}{self.calls}-{int(rng.integers(10**9))}"

    def resample(self, seed, rng):
        self._count()
        return f"{seed.text} variant {self.calls}"
