"""Optimizer configuration and its validation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .de import MUTATE_SCOPES, PROMPT3_SOURCES, DeVariant
from .selection import KINDS as SELECTION_KINDS
from .selection import SelectionStrategy
from .types import ConfigError

ENGINES = ("ga", "de")
INIT_PICKS = ("top", "random", "bottom")


@dataclass(frozen=True)
class InitStrategy:
    """How the initial population is drawn from the manual prompts.

    ``keep`` manual prompts are chosen by dev score (``pick``), and ``variations`` resampled
    variants of them fill the rest. ``keep=None`` means "fill the population".
    """

    pick: str = "top"
    keep: int | None = None
    variations: int = 0

    @property
    def kind(self) -> str:
        return "manual+resampled" if self.variations else "manual-only"

    def label(self, n: int) -> str:
        keep = n - self.variations if self.keep is None else self.keep
        s = f"{self.pick}-{keep}"
        return s + (f" + var-{self.variations}" if self.variations else "")


@dataclass(frozen=True)
class OptimizerConfig:
    population_size: int = 10
    iterations: int = 10
    engine: str = "ga"
    selection: SelectionStrategy = field(default_factory=SelectionStrategy)
    de_variant: DeVariant = field(default_factory=DeVariant)
    rng_seed: int = 0
    init: InitStrategy = field(default_factory=InitStrategy)

    @property
    def keep_count(self) -> int:
        if self.init.keep is None:
            return self.population_size - self.init.variations
        return self.init.keep

    def diagnostics(self, prefix: str = "optimizer") -> list[str]:
        out = []

        def bad(name, msg):
            out.append(f"{prefix}.{name}: {msg}")

        if self.engine not in ENGINES:
            bad("engine", f"must be one of {list(ENGINES)}, got {self.engine!r}")
        if self.iterations < 1:
            bad("iterations", "must be >= 1")
        need = 3 if self.engine == "de" else 2
        if self.population_size < need:
            bad("population_size", f"{self.engine} engine needs at least {need} prompts")
        if self.selection.kind not in SELECTION_KINDS:
            bad("selection.kind", f"must be one of {list(SELECTION_KINDS)}")
        if self.selection.kind == "tournament" and self.selection.tournament_size > self.population_size:
            bad("selection.tournament_size", "must not exceed population_size")
        if self.de_variant.mutate_scope not in MUTATE_SCOPES:
            bad("de_variant.mutate_scope", f"must be one of {list(MUTATE_SCOPES)}")
        if self.de_variant.prompt3_source not in PROMPT3_SOURCES:
            bad("de_variant.prompt3_source", f"must be one of {list(PROMPT3_SOURCES)}")
        if self.init.pick not in INIT_PICKS:
            bad("init.pick", f"must be one of {list(INIT_PICKS)}")
        if self.init.variations < 0:
            bad("init.variations", "must be >= 0")
        if self.keep_count < 1:
            bad("init.keep", "must keep at least one manual prompt")
        elif self.keep_count + self.init.variations != self.population_size:
            bad("init", f"keep ({self.keep_count}) + variations ({self.init.variations}) "
                        f"must equal population_size ({self.population_size})")
        return out

    def validate(self) -> "OptimizerConfig":
        diags = self.diagnostics()
        if diags:
            raise ConfigError(diags)
        return self

    def to_dict(self) -> dict:
        return asdict(self)
