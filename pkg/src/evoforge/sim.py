"""LLM-free word-level evolution operators and synthetic fitness tasks.

These stand in for the LLM operator and the dev-set score so the engines can be run,
tested and reproduced offline. Genomes are whitespace-separated word sequences.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .types import EvolutionOperator, Prompt

_PUNCT = re.compile(r"[^\w\s]")


def words(text: str) -> list[str]:
    return text.split()


def normalized_words(text: str) -> list[str]:
    return _PUNCT.sub(" ", text.lower()).split()


def crossover_tokens(tokens1: Sequence[str], tokens2: Sequence[str],
                     rng: np.random.Generator) -> list[str]:
    cut = int(rng.integers(len(tokens1) + 1))
    return list(tokens1[:cut]) + list(tokens2[cut:])


def mutate_tokens(tokens: Sequence[str], vocabulary: Sequence[str], rate: float,
                  rng: np.random.Generator) -> list[str]:
    if not vocabulary:
        raise ValueError("mutation vocabulary is empty")
    out = []
    for tok in tokens:
        if rng.random() < rate:
            tok = vocabulary[int(rng.integers(len(vocabulary)))]
        out.append(tok)
    return out


def sim_crossover(parent1: Prompt | str, parent2: Prompt | str, rng: np.random.Generator) -> str:
    """One-point crossover: parent1's first ``cut`` words, then parent2 from ``cut`` on."""
    t1, t2 = words(_text(parent1)), words(_text(parent2))
    if not t1 or not t2:
        raise ValueError("crossover parents must be non-empty")
    return " ".join(crossover_tokens(t1, t2, rng))


def sim_mutate(prompt: Prompt | str, vocabulary: Sequence[str], rate: float,
               rng: np.random.Generator) -> str:
    if not 0.0 <= rate <= 1.0:
        raise ValueError("mutation rate must lie in [0, 1]")
    return " ".join(mutate_tokens(words(_text(prompt)), vocabulary, rate, rng))


def donor_difference(donor1: Sequence[str], donor2: Sequence[str]) -> tuple[list[str], list[str]]:
    """Split two token lists into (symmetric multiset difference, shared tokens).

    Both lists keep the order in which tokens occur in donor1, then donor2.
    """
    c1, c2 = Counter(donor1), Counter(donor2)
    only1, only2, shared = c1 - c2, c2 - c1, c1 & c2
    diff, common = [], []
    for tok in donor1:
        if only1[tok] > 0:
            only1[tok] -= 1
            diff.append(tok)
        elif shared[tok] > 0:
            shared[tok] -= 1
            common.append(tok)
    for tok in donor2:
        if only2[tok] > 0:
            only2[tok] -= 1
            diff.append(tok)
    return diff, common


def splice(base: Sequence[str], inserts: Sequence[str], rng: np.random.Generator) -> list[str]:
    """Place each insert into ``base``, either overwriting a random word or at a random gap."""
    out = list(base)
    for tok in inserts:
        if out and rng.random() < 0.5:
            out[int(rng.integers(len(out)))] = tok
        else:
            out.insert(int(rng.integers(len(out) + 1)), tok)
    return out


def sim_de_evolve(basic, donor1, donor2, prompt3, variant, vocabulary: Sequence[str],
                  rng: np.random.Generator, rate: float = 0.5) -> str:
    """Word-level analogue of the four DE steps.

    1. different parts of the donors (or all donor words when ``mutate_scope == "all"``)
    2. mutate those words
    3. splice them into Prompt 3; without Prompt 3, into the donors' shared words
    4. one-point crossover of the basic prompt with the result
    """
    b = words(_text(basic))
    d1, d2 = words(_text(donor1)), words(_text(donor2))
    if variant.mutate_scope == "diff":
        diff, common = donor_difference(d1, d2)
    else:
        diff, common = d1 + d2, []
    mutated = mutate_tokens(diff, vocabulary, rate, rng) if diff else []
    base = words(_text(prompt3)) if prompt3 is not None else common
    generated = splice(base, mutated, rng)
    if not generated:
        return " ".join(b)
    return " ".join(crossover_tokens(b, generated, rng))


def _text(p: Prompt | str) -> str:
    return p.text if isinstance(p, Prompt) else p


class SimulatedOperator(EvolutionOperator):
    """Deterministic operator set backed by :func:`sim_crossover`, :func:`sim_mutate` and
    :func:`sim_de_evolve`."""

    def __init__(self, vocabulary: Sequence[str], mutation_rate: float = 0.1,
                 de_mutation_rate: float = 0.5, resample_rate: float = 0.3):
        super().__init__()
        if not vocabulary:
            raise ValueError("simulated operator needs a non-empty vocabulary")
        self.vocabulary = list(vocabulary)
        self.mutation_rate = mutation_rate
        self.de_mutation_rate = de_mutation_rate
        self.resample_rate = resample_rate

    def crossover_mutate(self, parent1, parent2, rng):
        self._count()
        child = sim_crossover(parent1, parent2, rng)
        return sim_mutate(child, self.vocabulary, self.mutation_rate, rng)

    def de_evolve(self, basic, donor1, donor2, prompt3, variant, rng):
        self._count()
        return sim_de_evolve(basic, donor1, donor2, prompt3, variant, self.vocabulary, rng,
                             self.de_mutation_rate)

    def resample(self, seed, rng):
        self._count()
        return sim_mutate(seed, self.vocabulary, self.resample_rate, rng)


# -- synthetic fitness -------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticTask:
    kind: str = "keyword_coverage"
    target_keywords: frozenset[str] = field(default_factory=frozenset)
    target_text: str = ""

    def __post_init__(self):
        object.__setattr__(self, "target_keywords",
                           frozenset(k.lower() for k in self.target_keywords))
        if self.kind == "keyword_coverage":
            if not self.target_keywords:
                raise ValueError("keyword_coverage needs at least one keyword")
        elif self.kind == "target_distance":
            if not self.target_text:
                raise ValueError("target_distance needs a target text")
        else:
            raise ValueError(f"unknown synthetic task kind {self.kind!r}")

    @property
    def task_id(self) -> str:
        if self.kind == "keyword_coverage":
            return "keywords:" + ",".join(sorted(self.target_keywords))
        return "target:" + self.target_text


def levenshtein(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def keyword_fitness(prompt: Prompt | str, task: SyntheticTask) -> float:
    text = _text(prompt)
    if task.kind == "keyword_coverage":
        present = set(normalized_words(text)) & task.target_keywords
        return len(present) / len(task.target_keywords)
    longest = max(len(text), len(task.target_text))
    return 1.0 - levenshtein(text, task.target_text) / longest


class SyntheticFitness:
    def __init__(self, task: SyntheticTask):
        self.task = task

    def evaluate(self, text: str) -> float:
        return keyword_fitness(text, self.task)


# -- default offline problem -------------------------------------------------------------

DEFAULT_KEYWORDS = ("classify", "sentiment", "positive", "negative")

FILLER_WORDS = (
    "please", "the", "a", "given", "text", "sentence", "input", "output", "return", "only",
    "task", "answer", "read", "carefully", "then", "decide", "whether", "it", "is", "and",
    "or", "assign", "each", "one", "of", "two", "classes", "word", "movie", "opinion",
    "review", "label",
)


def default_vocabulary() -> list[str]:
    return list(FILLER_WORDS) + list(DEFAULT_KEYWORDS)


def default_manual_prompts(count: int = 20, seed: int = 0, length: tuple[int, int] = (6, 10),
                           keywords: Sequence[str] = DEFAULT_KEYWORDS) -> list[str]:
    """Seeded filler sentences. Prompt ``i`` carries keyword ``i mod len(keywords)`` plus up to
    one more at random, so every keyword occurs somewhere in the set."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(length[0], length[1] + 1))
        toks = [FILLER_WORDS[int(rng.integers(len(FILLER_WORDS)))] for _ in range(n)]
        toks[int(rng.integers(n))] = keywords[i % len(keywords)]
        if rng.random() < 0.5:
            toks[int(rng.integers(n))] = keywords[int(rng.integers(len(keywords)))]
        out.append(" ".join(toks))
    return out
