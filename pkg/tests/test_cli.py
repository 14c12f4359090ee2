import json

import pytest

from algoconcepts import io
from algoconcepts.cli import run_command


def err_json(capsys):
    lines = [ln for ln in capsys.readouterr().err.splitlines() if ln.startswith("{")]
    return json.loads(lines[-1])


@pytest.mark.parametrize("argv", [
    [],
    ["gen", "--algorithm", "bfs"],
    ["gen", "--algorithm", "bfs", "--seed", "1", "--counts", "1:2"],
    ["gen", "--algorithm", "dijkstra", "--seed", "1"],
    ["extract", "--algorithm", "bfs", "--seed", "1", "--dont-care", "maybe"],
])
def test_usage_errors(argv, capsys):
    assert run_command(argv) == 2
    assert err_json(capsys)["exit_code"] == 2


def test_missing_input_file_is_usage_error(tmp_path, capsys):
    rc = run_command(["exec-rules", "--algorithm", "bfs", "--seed", "1", "--rules", str(tmp_path / "nope.json"),
                      "--out", str(tmp_path)])
    assert rc == 2


def test_stepwise_commands(tmp_path, capsys):
    out = str(tmp_path)
    common = ["--algorithm", "bfs", "--seed", "3", "--counts", "2:1:1", "--out", out]
    assert run_command(["gen", *common]) == 0
    assert len(io.load_graphs(tmp_path / "graphs_train.jsonl")) == 14
    assert run_command(["trace", *common, "--graphs", str(tmp_path / "graphs_train.jsonl")]) == 0
    traces = str(tmp_path / "traces_train.jsonl")
    assert run_command(["train", *common, "--traces", traces, "--epochs", "5"]) == 0
    assert (tmp_path / "training_history.csv").read_text().startswith("epoch,loss,accuracy")
    assert run_command(["extract", *common, "--traces", traces, "--model", str(tmp_path / "model.json")]) == 0
    assert run_command(["term-rule", *common, "--traces", traces]) == 0
    term = io.load_json(tmp_path / "term_rule.json")
    assert term["text"] == "continue ⟺ ∃n. ¬hasBeenVisited(n) ∧ hasVisitedNeighbours(n)"
    rc = run_command(["exec-rules", "--algorithm", "bfs", "--seed", "3", "--out", out, "--count", "4",
                      "--rules", str(tmp_path / "rules.json"), "--term-rule", str(tmp_path / "term_rule.json")])
    assert rc == 0
    manifest = io.load_json(tmp_path / "exec-rules.manifest.json")
    assert manifest["status"] == "ok" and manifest["seed"] == 3
    assert manifest["version"] and manifest["wall_time_s"] >= 0
    assert manifest["result"] == {"graphs": 12, "equal": 12}


def test_tampered_rules_fail_verification(tmp_path, capsys):
    assert run_command(["repro", "--algorithm", "bfs", "--seed", "2", "--counts", "2:1:1", "--count", "2",
                        "--out", str(tmp_path)]) == 0
    rules = io.load_json(tmp_path / "rules.json")
    rules["labels"]["1"]["terms"] = [[{"c": 0, "pos": True}]]  # visited <=> hasBeenVisited
    io.dump_json(rules, tmp_path / "bad.json")
    rc = run_command(["exec-rules", "--algorithm", "bfs", "--seed", "2", "--count", "2",
                      "--rules", str(tmp_path / "bad.json"), "--out", str(tmp_path)])
    assert rc == 1
    err = err_json(capsys)
    assert err["error"] == "verification"
    div = err["details"]["first_divergence"]
    assert div["step"] == 1 and div["field"] == "outputs"
    assert io.load_json(tmp_path / "exec-rules.manifest.json")["status"] == "verification_failed"


def test_rules_for_wrong_algorithm(tmp_path, capsys):
    assert run_command(["repro", "--algorithm", "bfs", "--seed", "2", "--counts", "2:1:1", "--count", "1",
                        "--out", str(tmp_path)]) == 0
    assert run_command(["exec-rules", "--algorithm", "coloring", "--seed", "2", "--rules",
                        str(tmp_path / "rules.json"), "--out", str(tmp_path)]) == 2


def test_repro_bfs_example(tmp_path):
    assert run_command(["repro", "--algorithm", "bfs", "--seed", "7", "--out", str(tmp_path)]) == 0
    rules = io.load_json(tmp_path / "rules.json")
    assert rules["labels"]["1"]["text"] == "hasVisitedNeighbours(n)"
    assert rules["termination"]["indices"] == [0, 1]
    assert rules["termination"]["assignment"] == {"0": 0, "1": 1}
    report = io.load_json(tmp_path / "report.json")
    for metric in ("formula_mean_step_acc", "formula_last_step_acc", "formula_term_acc"):
        assert all(v["mean"] == 1.0 and v["n"] == 30 for v in report["metrics"][metric].values())


def test_repro_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert run_command(["repro", "--algorithm", "kruskal", "--seed", "5", "--counts", "20:2:2",
                            "--count", "3", "--out", str(tmp_path / d)]) == 0
    for name in ("rules.json", "report.json", "rules.txt", "model.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_eval_formula_no_noise(tmp_path):
    rc = run_command(["eval", "--algorithm", "bfs", "--seed", "1", "--mode", "formula", "--noise", "0.0",
                      "--counts", "5:1:1", "--count", "5", "--out", str(tmp_path)])
    assert rc == 0
    rep = io.load_json(tmp_path / "report.json")
    assert rep["metrics"]
    assert all(v["mean"] == 1.0 for by in rep["metrics"].values() for v in by.values())


def test_eval_decoder_mode(tmp_path):
    rc = run_command(["eval", "--algorithm", "kruskal", "--seed", "1", "--mode", "both", "--counts", "10:1:1",
                      "--count", "3", "--size", "20", "--epochs", "3", "--out", str(tmp_path)])
    assert rc == 0
    rep = io.load_json(tmp_path / "report.json")
    assert "mean_step_acc" in rep["metrics"] and "formula_mean_step_acc" in rep["metrics"]


def test_tree_command(tmp_path, capsys):
    assert run_command(["tree", "--algorithm", "bfs", "--seed", "0", "--counts", "3:1:1",
                        "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("hasVisitedNeighbours?")
    assert (tmp_path / "tree.dot").read_text().startswith("digraph")
    assert io.load_json(tmp_path / "tree.manifest.json")["result"]["split_concepts"] == ["hasVisitedNeighbours"]


def test_term_rule_kruskal_is_usage_error(tmp_path):
    assert run_command(["term-rule", "--algorithm", "kruskal", "--seed", "0", "--counts", "1:1:1",
                        "--out", str(tmp_path)]) == 2
