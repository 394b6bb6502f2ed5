"""Wires a :class:`RunConfig` into task, operator, engine and provider objects and runs it."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .de import DEEngine
from .ga import GAEngine
from .harness import TaskFitness, TaskSpec, load_task
from .operators import LLMOperator, load_templates
from .optimizer import initialize_population, rng_streams, run_optimization
from .provider import BudgetLedger, ChatClient, budget_report
from .reporting import RunLedger, write_run_artifacts
from .runconfig import RunConfig
from .sim import (SimulatedOperator, SyntheticFitness, SyntheticTask, default_manual_prompts,
                  default_vocabulary)
from .types import CachedFitness, ConfigError, Population, ScoredPrompt

log = logging.getLogger(__name__)


@dataclass
class TaskBundle:
    fitness: object
    task_id: str
    score_scale: float
    manual_prompts: list[str]
    dev_size: int | None = None
    spec: TaskSpec | None = None


def make_client(cfg: RunConfig, cache_path: Path | None, transport=None) -> ChatClient:
    p = cfg.provider
    return ChatClient(base_url=p.base_url, api_key_env=p.api_key_env, cache_path=cache_path,
                      use_cache=p.use_cache, max_attempts=p.max_attempts,
                      backoff_base=p.backoff_base, requests_per_minute=p.requests_per_minute,
                      timeout=p.timeout, transport=transport)


def _read_manual(path: Path) -> list[str]:
    return [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def build_task(cfg: RunConfig, client: ChatClient | None, need_manual: bool = True) -> TaskBundle:
    t = cfg.task
    seed = cfg.optimizer.rng_seed
    if t.synthetic:
        if t.source == "synthetic-keywords":
            task = SyntheticTask("keyword_coverage", frozenset(t.keywords))
        else:
            task = SyntheticTask("target_distance", target_text=t.target_text)
        keywords = tuple(t.keywords)
        manual = t.manual_prompts or default_manual_prompts(t.manual_count, t.manual_seed,
                                                            keywords=keywords)
        return TaskBundle(SyntheticFitness(task), task.task_id, 1.0, list(manual))

    root = Path(t.source)
    if not root.is_dir():
        raise ConfigError([f"task.source: {t.source!r} is neither a synthetic task nor a directory"])
    try:
        spec = load_task(root, seed=seed, dev_size=t.dev_size)
    except (ValueError, KeyError) as exc:
        raise ConfigError([f"task.source: {exc}"]) from exc
    manual = t.manual_prompts
    if manual is None and (root / "manual_prompts.txt").exists():
        manual = _read_manual(root / "manual_prompts.txt")
    if not manual and need_manual:
        raise ConfigError(["task.manual_prompts: dataset tasks need manual prompts "
                           "(config list or manual_prompts.txt)"])
    if client is None:
        raise ConfigError(["operator.kind: dataset tasks are scored through the provider"])
    fitness = TaskFitness(spec, client, cfg.provider.eval_model or cfg.provider.model,
                          max_workers=cfg.provider.max_workers,
                          max_tokens=cfg.provider.eval_max_tokens, cache=cfg.provider.use_cache)
    return TaskBundle(fitness, spec.task_id, spec.score_scale, list(manual or []), len(spec.dev), spec)


def build_operator(cfg: RunConfig, client: ChatClient | None, vocabulary=None):
    o = cfg.operator
    if o.kind == "simulated":
        return SimulatedOperator(vocabulary or default_vocabulary(), o.mutation_rate,
                                 o.de_mutation_rate, o.resample_rate)
    templates = load_templates(o.templates_dir)
    return LLMOperator(client, cfg.provider.model, templates, max_tokens=o.max_tokens,
                       max_retries=o.max_retries)


def build_engine(cfg: RunConfig, operator):
    oc = cfg.optimizer_config()
    if oc.engine == "ga":
        return GAEngine(operator, oc.selection)
    return DEEngine(operator, oc.de_variant)


def needs_client(cfg: RunConfig) -> bool:
    return cfg.operator.kind == "llm" or not cfg.task.synthetic


def synthetic_vocabulary(cfg: RunConfig) -> list[str]:
    vocab = default_vocabulary()
    return vocab + [k for k in cfg.task.keywords if k not in vocab]


@dataclass
class RunResult:
    best: ScoredPrompt
    ledger: RunLedger
    summary: dict
    run_dir: Path
    network_calls: int


def initial_population(cfg: RunConfig, bundle: TaskBundle, operator, fitness) -> Population:
    init_rng, _ = rng_streams(cfg.optimizer.rng_seed)
    return initialize_population(bundle.manual_prompts, cfg.optimizer_config(), operator,
                                 fitness, init_rng)


def run(cfg: RunConfig, transport=None) -> RunResult:
    """Run the optimizer described by ``cfg`` into ``<out_dir>/<run_id>/``."""
    oc = cfg.optimizer_config().validate()
    run_id = cfg.run_id()
    run_dir = Path(cfg.out_dir) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    client = make_client(cfg, run_dir / "cache.jsonl", transport) if needs_client(cfg) else None
    try:
        bundle = build_task(cfg, client)
        vocab = synthetic_vocabulary(cfg) if cfg.task.synthetic else None
        operator = build_operator(cfg, client, vocab)
        engine = build_engine(cfg, operator)
        fitness = CachedFitness(bundle.fitness, bundle.task_id, enabled=cfg.provider.use_cache)
        budget = client.ledger if client is not None else BudgetLedger()

        config_doc = {"run_id": run_id, "score_scale": bundle.score_scale, **cfg.document()}
        ledger = RunLedger(run_id, config_doc, run_dir=run_dir)
        init_rng, loop_rng = rng_streams(oc.rng_seed)
        init = initialize_population(bundle.manual_prompts, oc, operator, fitness, init_rng)
        best, ledger = run_optimization(oc, init, engine, fitness, ledger, budget, loop_rng)
        extra = {
            "score": best.score,
            "task_id": bundle.task_id,
            "dev_size": bundle.dev_size,
            "cost": budget_report(budget, oc.population_size, oc.iterations, bundle.dev_size)
            if bundle.dev_size is not None else budget_report(budget),
        }
        summary = write_run_artifacts(ledger, best, extra)
        calls = client.network_calls if client is not None else 0
        return RunResult(best, ledger, summary, run_dir, calls)
    finally:
        if client is not None:
            client.close()
