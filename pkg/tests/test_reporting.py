import json

import pytest

from evoforge.reporting import (RunLedger, convergence_iteration, convergence_summary,
                                diversity_stats, dumps, log_iteration, merge_ledgers,
                                write_run_artifacts)
from evoforge.types import Population, Prompt, ScoredPrompt, best_of
from helpers import pop


def texts_pop(texts, scores=None):
    scores = scores or [0.5] * len(texts)
    return Population(tuple(ScoredPrompt(Prompt(t, f"m{i}"), s)
                            for i, (t, s) in enumerate(zip(texts, scores))))


def ledger_of(*populations, run_dir=None, config=None):
    lg = RunLedger("r", config or {"optimizer": {"population_size": 2, "rng_seed": 0}},
                   run_dir=run_dir)
    for p in populations:
        log_iteration(lg, p)
    return lg


def test_record_zero_and_count():
    lg = ledger_of(pop([0.1, 0.2]))
    assert lg.records[0]["iteration"] == 0
    lg = ledger_of(*[pop([0.1, 0.2])] * 4)
    assert len(lg) == 4


def test_record_best_and_mean_consistent():
    rec = ledger_of(pop([0.1, 0.7, 0.4])).records[0]
    scores = [m["score"] for m in rec["population"]]
    assert rec["best"]["score"] == max(scores)
    assert rec["mean"] == pytest.approx(sum(scores) / len(scores))


def test_iteration_must_be_next():
    lg = ledger_of(pop([0.1]))
    with pytest.raises(ValueError):
        log_iteration(lg, pop([0.1]), iteration=5)


def test_diversity_examples():
    lg = ledger_of(texts_pop(["a b", "a b c d"]), texts_pop(["a b", "a b"]),
                   texts_pop(["x y", "a"]))
    stats = diversity_stats(lg)
    assert stats[0]["avg_length"] == 3.0
    assert stats[0]["new_words"] == 0
    assert stats[1]["length_variance"] == 0.0
    assert stats[1]["new_words"] == 0
    assert stats[2]["new_words"] == 2


def test_new_words_against_cumulative_vocab():
    lg = ledger_of(texts_pop(["x"]), texts_pop(["x y"]))
    assert diversity_stats(lg)[1]["new_words"] == 1


def test_convergence_examples():
    assert convergence_iteration([0.5, 0.5, 0.5, 0.5]) == 2
    assert convergence_iteration([0.0, 0.01, 0.02, 0.03, 0.04]) is None
    assert convergence_iteration([0.50, 0.70, 0.701, 0.7015, 0.7016]) == 3


def test_convergence_summary_scaled():
    lg = ledger_of(pop([50.0]), pop([50.2]), pop([50.4]), config={"score_scale": 100.0})
    assert convergence_summary(lg)["iterations_to_convergence"] == 2
    lg.config = {"score_scale": 1.0}
    assert convergence_summary(lg)["iterations_to_convergence"] == "not converged"


def test_reload_reproduces_analyses(tmp_path):
    p0 = texts_pop(["a b", "c d e"], [0.2, 0.4])
    p1 = texts_pop(["a b f", "c d e"], [0.5, 0.4])
    lg = ledger_of(p0, p1, run_dir=tmp_path)
    write_run_artifacts(lg, best_of(p1))
    back = RunLedger.load(tmp_path)
    assert back.records == lg.records
    assert diversity_stats(back) == diversity_stats(lg)
    assert convergence_summary(back) == convergence_summary(lg)
    for name in ("config.json", "summary.json", "curves.csv", "diversity.csv", "best_prompt.txt"):
        assert (tmp_path / name).exists()
    assert (tmp_path / "best_prompt.txt").read_text() == "a b f\n"
    assert json.loads((tmp_path / "summary.json").read_text())["best"]["text"] == "a b f"


def test_dumps_canonical():
    assert dumps({"b": 1, "a": [1.5, "é"]}) == '{"a":[1.5,"é"],"b":1}'


def test_best_curve_non_decreasing_from_run():
    lg = ledger_of(pop([0.1, 0.3]), pop([0.3, 0.3]), pop([0.6, 0.3]))
    curve = convergence_summary(lg)["best_curve"]
    assert curve == sorted(curve)


def test_merge_multi_seed():
    a = ledger_of(pop([0.1, 0.3]), pop([0.3, 0.5]),
                  config={"optimizer": {"population_size": 2, "rng_seed": 0}})
    b = ledger_of(pop([0.2, 0.4]), pop([0.5, 0.5]),
                  config={"optimizer": {"population_size": 2, "rng_seed": 1}})
    merged = merge_ledgers([a, b])
    assert merged["multi"]
    assert merged["curves"][1]["best"] == pytest.approx(0.5)
    assert merged["curves"][0]["best_std"] == pytest.approx(0.0707106781, rel=1e-6)
    single = merge_ledgers([a])
    assert "best_std" not in single["curves"][0]


def test_merge_refuses_different_configs():
    a = ledger_of(pop([0.1, 0.3]), config={"optimizer": {"population_size": 2}})
    b = ledger_of(pop([0.1, 0.3, 0.2]), config={"optimizer": {"population_size": 3}})
    with pytest.raises(ValueError, match="population_size|optimizer"):
        merge_ledgers([a, b])
