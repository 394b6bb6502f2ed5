"""``evoforge`` command line: optimize, evaluate, report, resample-init, ablate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import runner
from .ablation import ROW_COLUMNS, run_ablation
from .harness import SPLITS, score_prompt
from .provider import BudgetLedger, ProviderError, budget_report
from .reporting import RunLedger, dumps, merge_ledgers, write_csv
from .runconfig import SYNTHETIC_SOURCES, parse_run_config, set_path
from .types import ConfigError, EvoforgeError, text_digest

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_PROVIDER, EXIT_IO = 0, 1, 2, 3, 4

# flag dest -> config document path
OVERRIDES = {
    "engine": "optimizer.engine",
    "selection": "optimizer.selection.kind",
    "tournament_size": "optimizer.selection.tournament_size",
    "de_mutate": "optimizer.de_variant.mutate_scope",
    "de_prompt3": "optimizer.de_variant.prompt3_source",
    "population_size": "optimizer.population_size",
    "iterations": "optimizer.iterations",
    "seed": "optimizer.rng_seed",
    "init_pick": "optimizer.init.pick",
    "init_variations": "optimizer.init.variations",
    "operator": "operator.kind",
    "task": "task.source",
    "out_dir": "out_dir",
    "base_url": "provider.base_url",
    "model": "provider.model",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--engine", choices=["ga", "de"])
    p.add_argument("--selection", choices=["roulette", "tournament", "random"])
    p.add_argument("--tournament-size", type=int)
    p.add_argument("--de-mutate", choices=["diff", "all"])
    p.add_argument("--de-prompt3", choices=["best", "random", "eliminate"])
    p.add_argument("--population-size", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--init-pick", choices=["top", "random", "bottom"])
    p.add_argument("--init-variations", type=int)
    p.add_argument("--operator", choices=["llm", "simulated"])
    p.add_argument("--task", help="synthetic-keywords, synthetic-target, or a dataset directory")
    p.add_argument("--out-dir")
    p.add_argument("--base-url")
    p.add_argument("--model")
    p.add_argument("--no-cache", action="store_true", help="disable response and score caches")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evoforge",
                                     description="Evolutionary discrete prompt optimization.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run the evolutionary loop")
    _add_config_flags(p)

    p = sub.add_parser("evaluate", help="score one prompt on a task split")
    _add_config_flags(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--prompt", help="prompt text")
    src.add_argument("--prompt-file", help="file holding the prompt (e.g. best_prompt.txt)")
    p.add_argument("--split", default="test")
    p.add_argument("--cache", help="JSONL response cache for the evaluation requests")

    p = sub.add_parser("report", help="merge run directories into curves and cost tables")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--output", default="report", help="directory for merged CSVs")

    p = sub.add_parser("resample-init", help="build and print the initial population")
    _add_config_flags(p)
    p.add_argument("--output", help="write JSONL here instead of stdout")

    p = sub.add_parser("ablate", help="init-strategy and DE-variant grid on the synthetic task")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--population-size", type=int, default=10)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--output", help="CSV path for the summary rows")
    return parser


def load_config(args):
    raw: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{args.config}: invalid JSON ({exc})"]) from exc
        if not isinstance(raw, dict):
            raise ConfigError([f"{args.config}: top level must be an object"])
    for dest, path in OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            set_path(raw, path, value)
    if args.no_cache:
        set_path(raw, "provider.use_cache", False)
    # dataset tasks cannot use the simulated operator, so default them to the LLM one
    task, operator = raw.get("task"), raw.get("operator", {})
    source = task.get("source") if isinstance(task, dict) else None
    if isinstance(source, str) and source not in SYNTHETIC_SOURCES \
            and isinstance(operator, dict) and "kind" not in operator:
        set_path(raw, "operator.kind", "llm")
    return parse_run_config(raw)


def cmd_optimize(args) -> int:
    cfg = load_config(args)
    result = runner.run(cfg)
    print(f"run directory: {result.run_dir}")
    print(f"best score: {result.best.score:.6g}")
    print(f"best prompt: {result.best.text}")
    return EXIT_OK


def _read_prompt(args) -> str:
    if args.prompt is not None:
        text = args.prompt
    else:
        text = Path(args.prompt_file).read_text(encoding="utf-8")
    text = text.strip()
    if not text:
        raise ConfigError(["prompt: empty prompt"])
    return text


def cmd_evaluate(args) -> int:
    cfg = load_config(args)
    if args.split not in SPLITS:
        raise ConfigError([f"split: must be one of {list(SPLITS)}, got {args.split!r}"])
    text = _read_prompt(args)
    client = None
    if not cfg.task.synthetic:
        client = runner.make_client(cfg, Path(args.cache) if args.cache else None)
    try:
        bundle = runner.build_task(cfg, client, need_manual=False)
        if bundle.spec is not None:
            if not bundle.spec.split(args.split):
                raise ConfigError([f"split: {args.split!r} is empty for task {bundle.spec.name}"])
            score = score_prompt(text, bundle.spec, client,
                                 cfg.provider.eval_model or cfg.provider.model, args.split,
                                 max_workers=cfg.provider.max_workers,
                                 max_tokens=cfg.provider.eval_max_tokens)
        else:
            score = bundle.fitness.evaluate(text)
        budget = client.ledger if client is not None else BudgetLedger()
    finally:
        if client is not None:
            client.close()
    record = {"task_id": bundle.task_id, "split": args.split, "prompt": text,
              "prompt_sha256": text_digest(text), "score": score,
              "cost": budget_report(budget)}
    print(f"{args.split} score: {score:.6g}")
    print(dumps(record))
    return EXIT_OK


def _fmt(v) -> str:
    return f"{v:.4f}" if isinstance(v, float) else str(v)


def print_table(rows: list[dict], columns) -> None:
    cells = [[_fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    print("  ".join(c.ljust(w) for c, w in zip(columns, widths)))
    for row in cells:
        print("  ".join(v.ljust(w) for v, w in zip(row, widths)))


def cmd_report(args) -> int:
    ledgers = [RunLedger.load(d) for d in args.run_dirs]
    try:
        merged = merge_ledgers(ledgers)
    except ValueError as exc:
        raise ConfigError([f"report: {exc}"]) from exc
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    curve_cols = ["iteration", "best", "mean"] + (["best_std", "mean_std"] if merged["multi"] else [])
    div_cols = ["iteration", "avg_length", "length_variance", "new_words"]
    if merged["multi"]:
        div_cols += ["avg_length_std", "length_variance_std", "new_words_std"]
    write_csv(out / "curves.csv", merged["curves"], curve_cols)
    write_csv(out / "diversity.csv", merged["diversity"], div_cols)

    cost_rows = []
    for lg in ledgers:
        opt = lg.config.get("optimizer", {})
        last = lg.records[-1].get("budget") or {}
        budget = BudgetLedger.from_dict(last)
        summary_path = lg.run_dir / "summary.json"
        dev = None
        if summary_path.exists():
            dev = json.loads(summary_path.read_text(encoding="utf-8")).get("dev_size")
        rep = budget_report(budget, opt.get("population_size"), opt.get("iterations"), dev)
        cost_rows.append({"run_id": lg.run_id, "requests": rep["total_requests"],
                          "operator_requests": rep["requests_by_purpose"].get("operator", 0),
                          "eval_requests": rep["requests_by_purpose"].get("task_eval", 0),
                          "tokens": rep["total_tokens"], "cache_hits": rep["cache_hits"],
                          "expected_requests": rep.get("expected_requests", "")})
    cost_cols = ["run_id", "requests", "operator_requests", "eval_requests", "tokens",
                 "cache_hits", "expected_requests"]
    write_csv(out / "cost.csv", cost_rows, cost_cols)

    print(f"merged {len(ledgers)} run(s) into {out}")
    print_table(merged["curves"], curve_cols)
    print()
    print_table(cost_rows, cost_cols)
    return EXIT_OK


def cmd_resample_init(args) -> int:
    cfg = load_config(args)
    oc = cfg.optimizer_config().validate()
    cache = None
    if runner.needs_client(cfg):
        cache = Path(cfg.out_dir) / cfg.run_id() / "cache.jsonl"
    client = runner.make_client(cfg, cache) if runner.needs_client(cfg) else None
    try:
        bundle = runner.build_task(cfg, client)
        vocab = runner.synthetic_vocabulary(cfg) if cfg.task.synthetic else None
        operator = runner.build_operator(cfg, client, vocab)
        pop = runner.initial_population(cfg, bundle, operator, bundle.fitness)
    finally:
        if client is not None:
            client.close()
    lines = [dumps(m.to_dict()) for m in pop]
    if args.output:
        Path(args.output).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {len(lines)} prompts ({oc.init.label(oc.population_size)}) to {args.output}")
    else:
        print("\n".join(lines))
    return EXIT_OK


def cmd_ablate(args) -> int:
    rows = run_ablation(args.seeds, args.population_size, args.iterations)
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        write_csv(Path(args.output), rows, ROW_COLUMNS)
    print_table(rows, ROW_COLUMNS)
    return EXIT_OK


COMMANDS = {
    "optimize": cmd_optimize,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "resample-init": cmd_resample_init,
    "ablate": cmd_ablate,
}


def _provider_cause(exc: BaseException) -> ProviderError | None:
    while exc is not None:
        if isinstance(exc, ProviderError):
            return exc
        exc = getattr(exc, "cause", None) or exc.__cause__
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        for diag in exc.diagnostics:
            print(f"config error: {diag}", file=sys.stderr)
        return EXIT_CONFIG
    except EvoforgeError as exc:
        provider = _provider_cause(exc)
        if provider is not None:
            print(f"provider error: {provider}", file=sys.stderr)
            return EXIT_PROVIDER
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
