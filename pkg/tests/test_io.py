import json

import numpy as np
import pytest

from algoconcepts import io
from algoconcepts.algoexec import labeled_rows, run_trace, schema_for
from algoconcepts.decoder import LabeledConceptSet, TrainConfig, train_decoder
from algoconcepts.evalmetrics import MetricsReport, build_report, compute_metrics
from algoconcepts.graphgen import make_test_graphs, prepare_graph
from algoconcepts.logic import DnfFormula, parse_formula
from algoconcepts.termination import TerminationRule


@pytest.mark.parametrize("alg", ["bfs", "coloring", "kruskal"])
def test_graph_and_trace_roundtrip(alg, tmp_path):
    graphs = make_test_graphs(alg, 20, 4, seed=0)
    io.save_graphs(graphs, tmp_path / "g.jsonl")
    assert io.load_graphs(tmp_path / "g.jsonl") == graphs
    traces = [run_trace(alg, g) for g in graphs]
    io.save_traces(traces, tmp_path / "t.jsonl")
    back = io.load_traces(tmp_path / "t.jsonl")
    assert back == traces


def test_graph_json_fields():
    g = prepare_graph("coloring", "fixed_degree5", 20, 0)
    d = io.graph_to_json(g)
    assert set(d) == {"category", "nodes", "edges", "priorities", "weights", "self_loops", "seed"}
    assert d["weights"] is None and d["self_loops"] is True


def test_formula_and_rule_roundtrip():
    s = schema_for("kruskal")
    f = parse_formula("(lighterEdgesVisited(e) ∧ nodesInSameSet(e) ∧ edgeInMst(e)) ∨ "
                      "(lighterEdgesVisited(e) ∧ ¬nodesInSameSet(e) ∧ ¬edgeInMst(e))", s)
    d = io.formula_to_json(f, s)
    assert d["terms"][0][0] == {"c": 0, "pos": True}
    assert io.formula_from_json(json.loads(json.dumps(d))) == f
    assert io.formula_from_json(io.formula_to_json(DnfFormula.false(3))) == DnfFormula.false(3)
    r = TerminationRule((0, 1), {0: 0, 1: 1}, "bfs")
    rd = io.rule_to_json(r, schema_for("bfs"))
    assert rd["assignment"] == {"0": 0, "1": 1}
    assert io.rule_from_json(json.loads(json.dumps(rd))) == r


def test_rules_file_roundtrip():
    s = schema_for("bfs")
    labels = {0: parse_formula("¬hasVisitedNeighbours(n)", s), 1: parse_formula("hasVisitedNeighbours(n)", s)}
    term = TerminationRule((0, 1), {0: 0, 1: 1}, "bfs")
    alg, l2, t2 = io.rules_from_json(json.loads(json.dumps(io.rules_to_json("bfs", labels, term))))
    assert (alg, l2, t2) == ("bfs", labels, term)


@pytest.mark.parametrize("hidden", [0, 8])
def test_model_roundtrip(hidden, bfs_traces, tmp_path):
    X, y = labeled_rows(bfs_traces[:10])
    m = train_decoder(LabeledConceptSet(X, y, "bfs", 2), TrainConfig(epochs=2, hidden=hidden, prune_epoch=1))
    io.dump_json(io.model_to_json(m), tmp_path / "m.json")
    back = io.model_from_json(io.load_json(tmp_path / "m.json"))
    for k, v in m.params().items():
        assert np.array_equal(back.params()[k], v)
    assert np.array_equal(back.pruned, m.pruned) and back.config == m.config and back.hidden == m.hidden


def test_report_roundtrip(tmp_path):
    tr = run_trace("bfs", make_test_graphs("bfs", 20, 1, seed=0)[0])
    rep = build_report("bfs", [(20, compute_metrics(tr, tr))])
    io.dump_json(rep.to_json(), tmp_path / "r.json")
    assert MetricsReport.from_json(io.load_json(tmp_path / "r.json")) == rep


def test_atomic_write_leaves_no_temp(tmp_path):
    io.atomic_write_text(tmp_path / "a" / "x.txt", "hello")
    assert (tmp_path / "a" / "x.txt").read_text() == "hello"
    assert [p.name for p in (tmp_path / "a").iterdir()] == ["x.txt"]
