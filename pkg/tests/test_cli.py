import csv
import json
import socket

import pytest

from evoforge.cli import main
from mockllm import serve


def opt(tmp_path, *extra):
    return main(["optimize", "--out-dir", str(tmp_path / "runs"), *extra])


def run_dirs(tmp_path):
    return sorted((tmp_path / "runs").iterdir())


def records(run_dir):
    return [json.loads(line) for line in (run_dir / "ledger.jsonl").read_text().splitlines()]


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def write_config(tmp_path, doc):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_optimize_de_synthetic(tmp_path, capsys):
    assert opt(tmp_path, "--engine", "de", "--seed", "7", "--population-size", "6",
               "--iterations", "5") == 0
    (run,) = run_dirs(tmp_path)
    assert run.name.startswith("de-s7-")
    recs = records(run)
    assert [r["iteration"] for r in recs] == list(range(6))
    for name in ("config.json", "summary.json", "best_prompt.txt", "curves.csv",
                 "diversity.csv"):
        assert (run / name).exists()
    assert "best score:" in capsys.readouterr().out


def test_optimize_ga_tournament(tmp_path):
    assert opt(tmp_path, "--selection", "tournament", "--tournament-size", "3",
               "--iterations", "3") == 0
    (run,) = run_dirs(tmp_path)
    cfg = json.loads((run / "config.json").read_text())
    assert cfg["optimizer"]["selection"] == {"kind": "tournament", "tournament_size": 3}


def test_simulated_run_makes_no_network_calls(tmp_path):
    with serve() as (url, received):
        assert opt(tmp_path, "--base-url", url, "--iterations", "2") == 0
    assert received == []


def test_config_error_exit_2(tmp_path, capsys):
    assert opt(tmp_path, "--population-size", "1") == 2
    assert "optimizer" in capsys.readouterr().err


def test_config_unknown_key_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, {"optimizer": {"populaton_size": 4}})
    assert main(["optimize", "--config", cfg, "--out-dir", str(tmp_path)]) == 2
    assert "optimizer.populaton_size" in capsys.readouterr().err


def test_missing_task_dir_exit_2(tmp_path):
    assert opt(tmp_path, "--task", str(tmp_path / "nope"), "--operator", "llm") == 2


def test_provider_failure_exit_3(tmp_path, data_dir, capsys):
    cfg = write_config(tmp_path, {"provider": {"max_attempts": 1,
                                               "base_url": f"http://127.0.0.1:{free_port()}"}})
    code = main(["optimize", "--config", cfg, "--task", str(data_dir / "sst2_tiny"),
                 "--operator", "llm", "--population-size", "2", "--iterations", "1",
                 "--out-dir", str(tmp_path / "runs")])
    assert code == 3
    assert "provider error" in capsys.readouterr().err


def test_io_error_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["optimize", "--out-dir", str(blocker), "--iterations", "1"]) == 4
    assert main(["report", str(tmp_path / "missing")]) == 4


def test_llm_optimize_and_evaluate(tmp_path, data_dir, capsys):
    task = str(data_dir / "sst2_tiny")
    with serve() as (url, received):
        assert opt(tmp_path, "--task", task, "--operator", "llm", "--base-url", url,
                   "--population-size", "4", "--iterations", "2") == 0
        (run,) = run_dirs(tmp_path)
        assert len(records(run)) == 3
        capsys.readouterr()
        lines = []
        for split in ("dev", "test"):
            assert main(["evaluate", "--task", task, "--base-url", url, "--split", split,
                         "--prompt-file", str(run / "best_prompt.txt"),
                         "--cache", str(tmp_path / "eval.jsonl")]) == 0
            lines.append(capsys.readouterr().out.splitlines())
    for split, out in zip(("dev", "test"), lines):
        assert out[0].startswith(f"{split} score: ")
        rec = json.loads(out[1])
        assert rec["split"] == split and 0.0 <= rec["score"] <= 1.0
        assert rec["prompt"] == (run / "best_prompt.txt").read_text().strip()
    assert json.loads(lines[1][1])["cost"]["requests_by_purpose"]["task_eval"] == 8


def test_evaluate_empty_prompt_exit_2(tmp_path):
    empty = tmp_path / "p.txt"
    empty.write_text("  \n")
    assert main(["evaluate", "--prompt-file", str(empty)]) == 2


def test_evaluate_synthetic(capsys):
    assert main(["evaluate", "--prompt", "classify sentiment positive negative"]) == 0
    assert json.loads(capsys.readouterr().out.splitlines()[1])["score"] == 1.0


def test_report_single_and_multi_seed(tmp_path, capsys):
    for seed in (0, 1, 2):
        assert opt(tmp_path, "--seed", str(seed), "--iterations", "3") == 0
    runs = [str(d) for d in run_dirs(tmp_path)]
    assert main(["report", runs[0], "--output", str(tmp_path / "one")]) == 0
    with open(tmp_path / "one" / "curves.csv") as fh:
        assert "best_std" not in next(csv.reader(fh))
    assert main(["report", *runs, "--output", str(tmp_path / "all")]) == 0
    with open(tmp_path / "all" / "curves.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4 and "best_std" in rows[0]
    assert (tmp_path / "all" / "cost.csv").exists()
    assert "iteration" in capsys.readouterr().out


def test_report_refuses_mismatch(tmp_path, capsys):
    assert opt(tmp_path, "--iterations", "2") == 0
    assert opt(tmp_path, "--iterations", "2", "--population-size", "6") == 0
    runs = [str(d) for d in run_dirs(tmp_path)]
    assert main(["report", *runs, "--output", str(tmp_path / "r")]) == 2
    assert "population_size" in capsys.readouterr().err


def test_resample_init(tmp_path):
    out = tmp_path / "init.jsonl"
    assert main(["resample-init", "--init-pick", "top", "--init-variations", "5",
                 "--population-size", "10", "--output", str(out)]) == 0
    members = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(members) == 10
    assert sum(m["origin"] == "llm-resampled" for m in members) == 5


def test_ablate(tmp_path, capsys):
    out = tmp_path / "ablation.csv"
    assert main(["ablate", "--seeds", "0", "--population-size", "10", "--iterations", "2",
                 "--output", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 14


@pytest.mark.parametrize("argv", [["--help"], ["optimize", "--help"]])
def test_help(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 0
