"""
Tests for the command-line front end
"""

import json

import pandas as pd
import pytest

from src.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from src.models import CSV_SCHEMA_VERSION


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0] == f"# schema={CSV_SCHEMA_VERSION}"
    assert lines[1].startswith("# flags=")
    return pd.read_csv(path, comment="#"), lines[1]


@pytest.mark.parametrize("tiles,expected", [(8, "|V|=121 W=536 CP=158"), (1, "|V|=2 W=11 CP=11")])
def test_gen_prints_statistics(capsys, tiles, expected):
    assert main(["gen", "--tiles", str(tiles)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == expected


def test_gen_writes_dot_and_json(tmp_path):
    dot = tmp_path / "dag.dot"
    assert main(["gen", "--tiles", "3", "--format", "dot", "--out", str(dot)]) == EXIT_OK
    assert dot.read_text().startswith("digraph cholesky_T3 {")

    raw = tmp_path / "nested" / "dag.json"
    assert main(["gen", "--tiles", "3", "--out", str(raw)]) == EXIT_OK
    assert json.loads(raw.read_text())["critical_path"] == 53


def test_gen_rejects_zero_tiles():
    assert main(["gen", "--tiles", "0"]) == EXIT_USAGE


def test_gen_bad_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["gen", "--tiles", "2", "--out", str(blocker / "dag.json")]) == EXIT_RUNTIME


def test_usage_errors():
    assert main([]) == EXIT_USAGE
    assert main(["bench", "--tiles", "4"]) == EXIT_USAGE
    assert main(["bench", "--tiles", "4", "--procs", "4", "--algo", "heft"]) == EXIT_USAGE
    assert main(["table", "--which", "7", "--out", "x.csv"]) == EXIT_USAGE


def test_bench_asap(tmp_path, capsys):
    out = tmp_path / "asap.csv"
    assert main(["bench", "--tiles", "16", "--procs", "4", "--algo", "asap", "--out", str(out)]) == EXIT_OK
    frame, flags = read_csv(out)
    assert list(frame.columns) == ["algo", "T", "p", "seed", "makespan"]
    assert len(frame) == 1
    assert frame.makespan[0] == pytest.approx(787, rel=0.02)
    assert "algo=asap" in flags and "procs=4" in flags
    assert "makespan=" in capsys.readouterr().out


def test_bench_random_reports_mean(tmp_path, capsys):
    out = tmp_path / "random.csv"
    assert main(["bench", "--tiles", "4", "--procs", "4", "--algo", "random", "--seeds", "10", "--out", str(out)]) == EXIT_OK
    frame, _ = read_csv(out)
    assert frame.seed.tolist() == list(range(10))
    printed = capsys.readouterr().out
    assert "mean=" in printed and "std=" in printed


def test_train_then_eval(tmp_path, capsys):
    run_dir = tmp_path / "run"
    argv = ["train", "--tiles", "2", "--procs", "2", "--window", "0", "--steps", "0", "--seeds", "2", "--out", str(run_dir)]
    assert main(argv) == EXIT_OK
    summary, flags = read_csv(run_dir / "summary.csv")
    assert summary.seed.tolist() == [0, 1]
    assert summary.best_makespan.tolist() == [32, 32]
    assert "steps=0" in flags
    assert "best=32" in capsys.readouterr().out

    log, log_flags = read_csv(run_dir / "seed_1" / "train_log.csv")
    assert len(log) == 1
    for flag in ("procs=2", "steps=0", "seeds=2", f"out={run_dir}", "seed=1"):
        assert flag in log_flags.split("# flags=")[1].split(" "), flag

    checkpoint = run_dir / "seed_0" / "best.npz"
    trace = tmp_path / "trace.json"
    argv = ["eval", "--checkpoint", str(checkpoint), "--tiles", "3", "--procs", "2", "--episodes", "2", "--trace", str(trace)]
    assert main(argv) == EXIT_OK
    printed = capsys.readouterr().out
    assert "mean_decision_ms=" in printed
    assert "trained_on=T2_p2" in printed
    assert json.loads(trace.read_text())["makespan"] is not None


def test_eval_window_mismatch(tmp_path):
    run_dir = tmp_path / "run"
    main(["train", "--tiles", "2", "--procs", "2", "--window", "1", "--steps", "0", "--seeds", "1", "--out", str(run_dir)])
    argv = ["eval", "--checkpoint", str(run_dir / "seed_0" / "best.npz"), "--tiles", "2", "--procs", "2", "--window", "2"]
    assert main(argv) == EXIT_RUNTIME


def test_eval_missing_checkpoint(tmp_path):
    argv = ["eval", "--checkpoint", str(tmp_path / "none.npz"), "--tiles", "2", "--procs", "2"]
    assert main(argv) == EXIT_RUNTIME


def test_table_dag_stats(tmp_path):
    out = tmp_path / "table2.csv"
    assert main(["table", "--which", "2", "--out", str(out)]) == EXIT_OK
    frame, _ = read_csv(out)
    assert frame["T"].tolist() == [4, 8, 16]
    assert frame["within"].all()


def test_table_makespans_without_agent(tmp_path):
    out = tmp_path / "table3.csv"
    assert main(["table", "--which", "3", "--out", str(out), "--skip-agent"]) == EXIT_OK
    frame, _ = read_csv(out)
    asap = frame[frame.algo == "asap"]
    assert len(asap) == 5
    assert asap.within.all()
    assert set(frame.algo) == {"asap", "greedy", "random"}
    greedy = frame[frame.algo == "greedy"].set_index(["T", "p"])
    assert greedy.within.all()
    assert greedy.loc[(8, 6), "tolerance"] == "+-9%"
