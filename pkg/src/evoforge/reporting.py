"""Run ledger persistence plus the convergence-curve and diversity analyses."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .types import Population, ScoredPrompt, best_of

# "improvement of the average score below 0.3%" on the [0, 1] scale
CONVERGENCE_THRESHOLD = 0.003


def dumps(obj) -> str:
    """Canonical JSON used for every persisted record (stable key order, no spacing)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass
class RunLedger:
    run_id: str
    config: dict = field(default_factory=dict)
    records: list[dict] = field(default_factory=list)
    final_best: dict | None = None
    run_dir: Path | None = None

    def __post_init__(self):
        if self.run_dir is not None:
            self.run_dir = Path(self.run_dir)
            self.run_dir.mkdir(parents=True, exist_ok=True)
            # a fresh ledger owns its file; reruns into the same directory start over
            (self.run_dir / "ledger.jsonl").write_text("", encoding="utf-8")

    @property
    def ledger_path(self) -> Path | None:
        return None if self.run_dir is None else self.run_dir / "ledger.jsonl"

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def load(cls, run_dir: str | os.PathLike) -> "RunLedger":
        run_dir = Path(run_dir)
        config = json.loads((run_dir / "config.json").read_text(encoding="utf-8"))
        records = [json.loads(line) for line in
                   (run_dir / "ledger.jsonl").read_text(encoding="utf-8").splitlines() if line]
        summary_path = run_dir / "summary.json"
        final_best = None
        run_id = config.get("run_id", run_dir.name)
        if summary_path.exists():
            summary = json.loads(summary_path.read_text(encoding="utf-8"))
            final_best = summary.get("best")
            run_id = summary.get("run_id", run_id)
        ledger = cls(run_id, config, records, final_best)
        ledger.run_dir = run_dir
        return ledger


def iteration_record(iteration: int, population: Population, budget: dict | None = None,
                     operator_calls: int = 0, fitness_evaluations: int = 0) -> dict:
    best = best_of(population)
    return {
        "iteration": iteration,
        "population": [m.to_dict() for m in population],
        "best": {"id": best.prompt.id, "text": best.text, "score": best.score},
        "mean": population.mean_score(),
        "operator_calls": operator_calls,
        "fitness_evaluations": fitness_evaluations,
        "budget": budget or {},
    }


def log_iteration(ledger: RunLedger, population: Population, budget: dict | None = None,
                  operator_calls: int = 0, fitness_evaluations: int = 0,
                  iteration: int | None = None) -> RunLedger:
    """Append the next record and flush it to ``ledger.jsonl`` when the ledger has a run dir."""
    expected = len(ledger.records)
    if iteration is not None and iteration != expected:
        raise ValueError(f"expected iteration {expected}, got {iteration}")
    record = iteration_record(expected, population, budget, operator_calls, fitness_evaluations)
    if ledger.ledger_path is not None:
        with open(ledger.ledger_path, "a", encoding="utf-8") as fh:
            fh.write(dumps(record) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
    ledger.records.append(record)
    return ledger


def record_population(record: dict) -> list[ScoredPrompt]:
    return [ScoredPrompt.from_dict(m) for m in record["population"]]


# -- analyses ----------------------------------------------------------------------------

def _vocab(texts: Sequence[str]) -> set[str]:
    return {w for t in texts for w in t.split()}


def diversity_stats(ledger: RunLedger) -> list[dict]:
    """Per iteration: mean word count, population variance of word counts, and the number of
    words never seen in any earlier population."""
    if not ledger.records:
        raise ValueError("ledger has no records")
    out = []
    seen: set[str] = set()
    for rec in ledger.records:
        texts = [m["text"] for m in rec["population"]]
        lengths = np.array([len(t.split()) for t in texts], dtype=float)
        vocab = _vocab(texts)
        new = 0 if rec["iteration"] == 0 else len(vocab - seen)
        seen |= vocab
        out.append({
            "iteration": rec["iteration"],
            "avg_length": float(lengths.mean()),
            "length_variance": float(lengths.var()),
            "new_words": new,
        })
    return out


def convergence_iteration(means: Sequence[float], threshold: float = CONVERGENCE_THRESHOLD):
    """First iteration t closing two consecutive mean improvements below ``threshold``."""
    for t in range(2, len(means)):
        if means[t] - means[t - 1] < threshold and means[t - 1] - means[t - 2] < threshold:
            return t
    return None


def convergence_summary(ledger: RunLedger, threshold: float | None = None) -> dict:
    if threshold is None:
        threshold = CONVERGENCE_THRESHOLD * float(ledger.config.get("score_scale", 1.0))
    best_curve = [r["best"]["score"] for r in ledger.records]
    mean_curve = [r["mean"] for r in ledger.records]
    t = convergence_iteration(mean_curve, threshold)
    return {
        "best_curve": best_curve,
        "mean_curve": mean_curve,
        "iterations_to_convergence": t if t is not None else "not converged",
    }


# -- artifacts ---------------------------------------------------------------------------

def write_csv(path: Path, rows: list[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({c: row.get(c, "") for c in columns})


def write_run_artifacts(ledger: RunLedger, best: ScoredPrompt, extra_summary: dict | None = None):
    """Write config.json, summary.json, curves.csv, diversity.csv and best_prompt.txt."""
    run_dir = ledger.run_dir
    if run_dir is None:
        raise ValueError("ledger has no run directory")
    ledger.final_best = best.to_dict()
    (run_dir / "config.json").write_text(dumps(ledger.config) + "\n", encoding="utf-8")
    (run_dir / "best_prompt.txt").write_text(best.text + "\n", encoding="utf-8")
    conv = convergence_summary(ledger)
    curves = [{"iteration": i, "best": b, "mean": m}
              for i, (b, m) in enumerate(zip(conv["best_curve"], conv["mean_curve"]))]
    write_csv(run_dir / "curves.csv", curves, ["iteration", "best", "mean"])
    write_csv(run_dir / "diversity.csv", diversity_stats(ledger),
              ["iteration", "avg_length", "length_variance", "new_words"])
    summary = {
        "run_id": ledger.run_id,
        "best": ledger.final_best,
        "iterations": len(ledger.records) - 1,
        "iterations_to_convergence": conv["iterations_to_convergence"],
    }
    summary.update(extra_summary or {})
    (run_dir / "summary.json").write_text(dumps(summary) + "\n", encoding="utf-8")
    return summary


# -- multi-run merge ---------------------------------------------------------------------

# config keys allowed to differ between runs that are merged as seeds of one setup
_SEED_KEYS = {"rng_seed", "run_id", "out_dir", "seed"}


def _strip_seed(config: dict) -> dict:
    if isinstance(config, dict):
        return {k: _strip_seed(v) for k, v in config.items() if k not in _SEED_KEYS}
    return config


def _differing_paths(a: dict, b: dict, prefix: str = "") -> list[str]:
    out = []
    for k in sorted(set(a) | set(b)):
        x, y = a.get(k), b.get(k)
        if isinstance(x, dict) and isinstance(y, dict):
            out += _differing_paths(x, y, f"{prefix}{k}.")
        elif x != y:
            out.append(prefix + k)
    return out


def merge_ledgers(ledgers: Sequence[RunLedger]) -> dict:
    """Per-iteration mean/std of best and mean curves plus diversity across seed runs."""
    if not ledgers:
        raise ValueError("no runs to merge")
    ref = _strip_seed(ledgers[0].config)
    for lg in ledgers[1:]:
        other = _strip_seed(lg.config)
        if other != ref:
            keys = _differing_paths(ref, other)
            raise ValueError(f"run {lg.run_id} differs from {ledgers[0].run_id} in {keys}")
    lengths = {len(lg.records) for lg in ledgers}
    if len(lengths) != 1:
        raise ValueError("runs have different iteration counts")
    multi = len(ledgers) > 1
    ddof = 1 if multi else 0

    def stack(key_fn):
        return np.array([[key_fn(r) for r in lg.records] for lg in ledgers], dtype=float)

    best = stack(lambda r: r["best"]["score"])
    mean = stack(lambda r: r["mean"])
    curves = []
    for t in range(best.shape[1]):
        row = {"iteration": t, "best": best[:, t].mean(), "mean": mean[:, t].mean()}
        if multi:
            row["best_std"] = best[:, t].std(ddof=ddof)
            row["mean_std"] = mean[:, t].std(ddof=ddof)
        curves.append(row)

    div = [diversity_stats(lg) for lg in ledgers]
    diversity = []
    for t in range(len(div[0])):
        row = {"iteration": t}
        for key in ("avg_length", "length_variance", "new_words"):
            vals = np.array([d[t][key] for d in div], dtype=float)
            row[key] = vals.mean()
            if multi:
                row[key + "_std"] = vals.std(ddof=ddof)
        diversity.append(row)
    return {"curves": curves, "diversity": diversity, "multi": multi}
