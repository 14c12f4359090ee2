import numpy as np
import pytest

from algoconcepts.algoexec import StepRecord, Trace, labeled_rows, run_trace
from algoconcepts.evalmetrics import (MetricsReport, build_report, compute_metrics, fit_decision_tree,
                                      tree_from_json, tree_predict, tree_to_dot, tree_to_json,
                                      tree_to_text)
from algoconcepts.graphgen import Graph, add_self_loops, make_test_graphs
from algoconcepts.pipeline import evaluate


def _trace(graph, outputs, flags):
    steps = []
    for t, (out, flag) in enumerate(zip(outputs, flags), start=1):
        c = np.zeros((len(out), 2), bool)
        steps.append(StepRecord(t, c, c, np.array(out), flag))
    return Trace(graph, "bfs", tuple(steps), 0)


G3 = add_self_loops(Graph(3, ((0, 1), (1, 2)), "tree"))


def test_identity_gives_ones():
    tr = run_trace("bfs", make_test_graphs("bfs", 20, 1, seed=0)[0])
    m = compute_metrics(tr, tr)
    assert (m.mean_step, m.last_step, m.term, m.concepts_mean_step, m.concepts_last_step) == (1, 1, 1, 1, 1)
    assert not m.truncated


def test_one_wrong_unit_in_last_step():
    truth = _trace(G3, [[1, 1, 0], [1, 1, 1]], [True, False])
    pred = _trace(G3, [[1, 1, 0], [1, 1, 0]], [True, False])
    m = compute_metrics(pred, truth)
    assert m.last_step == pytest.approx(2 / 3)
    assert m.mean_step == pytest.approx(5 / 6)
    assert m.term == 1.0


def test_truncation_scores_common_prefix():
    truth = _trace(G3, [[1, 1, 0], [1, 1, 1]], [True, False])
    pred = _trace(G3, [[1, 1, 0]], [False])
    m = compute_metrics(pred, truth, "decoder")
    assert m.truncated and m.steps_scored == 1
    assert m.term == 0.0
    assert m.mode == "decoder"


def test_mismatched_inputs():
    a = run_trace("bfs", make_test_graphs("bfs", 20, 1, seed=0)[0])
    b = run_trace("bfs", make_test_graphs("bfs", 20, 2, seed=1)[1])
    with pytest.raises(ValueError):
        compute_metrics(a, b)
    with pytest.raises(ValueError):
        compute_metrics(a, a, "neural")


def test_kruskal_has_no_term_accuracy():
    g = Graph(3, ((0, 1), (1, 2)), "tree", weights=(2, 1))
    tr = run_trace("kruskal", g)
    assert compute_metrics(tr, tr).term is None


def test_report_roundtrip_and_buckets():
    tr = run_trace("bfs", make_test_graphs("bfs", 20, 1, seed=0)[0])
    m = compute_metrics(tr, tr)
    rep = build_report("bfs", [(20, m), (50, m), (50, m)])
    assert rep.metrics["formula_mean_step_acc"][50]["n"] == 2
    assert "mean_step_acc" not in rep.metrics
    again = MetricsReport.from_json(rep.to_json())
    assert again == rep


def test_oracle_pipeline_bfs_all_ones():
    from algoconcepts.logic import parse_formula
    from algoconcepts.algoexec import schema_for
    from algoconcepts.termination import TerminationRule

    s = schema_for("bfs")
    rules = {0: parse_formula("¬hasBeenVisited(n) ∧ ¬hasVisitedNeighbours(n)", s),
             1: parse_formula("hasVisitedNeighbours(n)", s)}
    graphs = {n: make_test_graphs("bfs", n, 7, seed=2) for n in (20, 50, 100)}
    rep = evaluate("bfs", graphs, rules, TerminationRule((0, 1), {0: 0, 1: 1}))
    for metric, by in rep.metrics.items():
        for size, v in by.items():
            assert v["mean"] == 1.0, (metric, size)


def test_tree_bfs(bfs_traces):
    X, y = labeled_rows(bfs_traces)
    tree = fit_decision_tree(X, y)
    assert tree.depth() == 1 and tree.split_concepts() == {1}
    assert all(leaf.purity == 1.0 for leaf in tree.leaves())
    assert tree_predict(tree, np.array([0, 1])) == 1
    assert tree_predict(tree, np.array([0, 0])) == 0
    with pytest.raises(ValueError):
        tree_predict(tree, np.array([0, 1, 1]))


def test_tree_constant_label():
    tree = fit_decision_tree(np.array([[0, 1], [1, 0]]), np.array([2, 2]))
    assert tree.root.is_leaf and tree.root.label == 2
    assert tree_predict(tree, np.array([1, 1])) == 2


def test_tree_tie_break_smaller_index():
    X = np.array([[0, 0], [1, 1]])
    tree = fit_decision_tree(X, np.array([0, 1]))
    assert tree.root.concept == 0


def test_tree_paths_test_each_concept_once(coloring_traces):
    X, y = labeled_rows(coloring_traces)
    tree = fit_decision_tree(X, y)

    def walk(node, seen):
        if node.is_leaf:
            return
        assert node.concept not in seen
        walk(node.true_child, seen | {node.concept})
        walk(node.false_child, seen | {node.concept})

    walk(tree.root, frozenset())
    assert all(leaf.purity == 1.0 for leaf in tree.leaves())
    assert 6 not in tree.split_concepts()
    assert all(tree_predict(tree, x) == t for x, t in zip(X[:500], y[:500]))


def test_tree_exports(kruskal_traces):
    X, y = labeled_rows(kruskal_traces)
    tree = fit_decision_tree(X, y)
    assert tree_from_json(tree_to_json(tree)) == tree
    names = ["lEV", "nISS", "eIM"]
    assert tree_to_text(tree, names).startswith(names[tree.root.concept])
    dot = tree_to_dot(tree, names)
    assert dot.startswith("digraph") and dot.count("->") == 2 * (len(tree.leaves()) - 1)


def test_tree_rejects_empty():
    with pytest.raises(ValueError):
        fit_decision_tree(np.zeros((0, 2)), np.zeros(0))
