"""The single JSON document describing a run: optimizer, task, operator and provider settings."""

from __future__ import annotations

import hashlib
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import InitStrategy, OptimizerConfig
from .de import DeVariant
from .reporting import dumps
from .selection import SelectionStrategy
from .sim import DEFAULT_KEYWORDS
from .types import ConfigError

SYNTHETIC_SOURCES = ("synthetic-keywords", "synthetic-target")
DEFAULT_TARGET_TEXT = "classify the sentiment of the review as positive or negative"


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SelectionSection(_Model):
    kind: Literal["roulette", "tournament", "random"] = "roulette"
    tournament_size: int = Field(2, ge=1)


class DeSection(_Model):
    mutate_scope: Literal["diff", "all"] = "diff"
    prompt3_source: Literal["best", "random", "eliminate"] = "best"


class InitSection(_Model):
    pick: Literal["top", "random", "bottom"] = "top"
    keep: Optional[int] = Field(None, ge=1)
    variations: int = Field(0, ge=0)


class OptimizerSection(_Model):
    population_size: int = Field(10, ge=1)
    iterations: int = Field(10, ge=1)
    engine: Literal["ga", "de"] = "ga"
    selection: SelectionSection = Field(default_factory=SelectionSection)
    de_variant: DeSection = Field(default_factory=DeSection)
    rng_seed: int = Field(0, ge=0)
    init: InitSection = Field(default_factory=InitSection)


class TaskSection(_Model):
    # "synthetic-keywords", "synthetic-target", or a dataset directory
    source: str = "synthetic-keywords"
    keywords: list[str] = Field(default_factory=lambda: list(DEFAULT_KEYWORDS), min_length=1)
    target_text: str = Field(DEFAULT_TARGET_TEXT, min_length=1)
    manual_prompts: Optional[list[str]] = None
    manual_count: int = Field(20, ge=1)
    manual_seed: int = 0
    dev_size: Optional[int] = Field(None, ge=1)

    @property
    def synthetic(self) -> bool:
        return self.source in SYNTHETIC_SOURCES


class OperatorSection(_Model):
    kind: Literal["simulated", "llm"] = "simulated"
    mutation_rate: float = Field(0.1, ge=0, le=1)
    de_mutation_rate: float = Field(0.5, ge=0, le=1)
    resample_rate: float = Field(0.3, ge=0, le=1)
    templates_dir: Optional[str] = None
    max_retries: int = Field(3, ge=1)
    max_tokens: int = Field(512, ge=1)


class ProviderSection(_Model):
    base_url: str = "https://api.openai.com"
    model: str = "gpt-3.5-turbo"
    eval_model: Optional[str] = None
    api_key_env: str = "EVOFORGE_API_KEY"
    max_attempts: int = Field(5, ge=1)
    backoff_base: float = Field(1.0, ge=0)
    requests_per_minute: Optional[float] = Field(None, gt=0)
    timeout: float = Field(60.0, gt=0)
    max_workers: int = Field(1, ge=1)
    eval_max_tokens: int = Field(256, ge=1)
    use_cache: bool = True


class RunConfig(_Model):
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    task: TaskSection = Field(default_factory=TaskSection)
    operator: OperatorSection = Field(default_factory=OperatorSection)
    provider: ProviderSection = Field(default_factory=ProviderSection)
    out_dir: str = "runs"

    def optimizer_config(self) -> OptimizerConfig:
        o = self.optimizer
        return OptimizerConfig(
            population_size=o.population_size,
            iterations=o.iterations,
            engine=o.engine,
            selection=SelectionStrategy(o.selection.kind, o.selection.tournament_size),
            de_variant=DeVariant(o.de_variant.mutate_scope, o.de_variant.prompt3_source),
            rng_seed=o.rng_seed,
            init=InitStrategy(o.init.pick, o.init.keep, o.init.variations),
        )

    def document(self) -> dict:
        return self.model_dump(mode="json")

    def run_id(self) -> str:
        """``<engine>-s<seed>-<hash>``; the hash covers everything except the output dir."""
        doc = self.document()
        doc.pop("out_dir")
        digest = hashlib.sha256(dumps(doc).encode("utf-8")).hexdigest()[:10]
        return f"{self.optimizer.engine}-s{self.optimizer.rng_seed}-{digest}"


def _loc(loc) -> str:
    return ".".join(str(p) for p in loc) or "<root>"


def parse_run_config(raw: dict) -> RunConfig:
    """Validate a raw document; every problem becomes one ``field.path: message`` diagnostic."""
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError([f"{_loc(e['loc'])}: {e['msg']}" for e in exc.errors()]) from None
    diags = cfg.optimizer_config().diagnostics("optimizer")
    if cfg.operator.kind == "simulated" and not cfg.task.synthetic:
        diags.append("operator.kind: the simulated operator only runs synthetic tasks")
    if diags:
        raise ConfigError(diags)
    return cfg


def set_path(doc: dict, path: str, value) -> None:
    node = doc
    *parents, leaf = path.split(".")
    for key in parents:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError([f"{path}: parent {key!r} is not an object"])
    node[leaf] = value
