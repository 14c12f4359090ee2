import itertools
import logging

import numpy as np
import pytest

from algoconcepts.algoexec import run_trace, schema_for
from algoconcepts.graphgen import Graph, add_self_loops, make_test_graphs
from algoconcepts.termination import (DegenerateSamplesError, NoRuleFound, TerminationRule,
                                      TerminationSample, collect_termination_samples, enumerate_rule,
                                      eval_rule, fits)

BFS_RULE = TerminationRule((0, 1), {0: 0, 1: 1}, "bfs")


def sample(vectors, tau):
    return TerminationSample(frozenset(tuple(v) for v in vectors), tau)


def test_samples_from_bfs_path():
    g = add_self_loops(Graph(3, ((0, 1), (1, 2)), "tree"))
    got = collect_termination_samples([run_trace("bfs", g, source=0)])
    assert got == [sample([[1, 1], [0, 1]], True), sample([[1, 1]], False)]


def test_samples_single_step_and_coloring_triangle():
    g = add_self_loops(Graph(2, ((0, 1),), "tree"))
    got = collect_termination_samples([run_trace("bfs", g, source=0)])
    assert len(got) == 1 and got[0].tau is False
    tri = add_self_loops(Graph(3, ((0, 1), (0, 2), (1, 2)), "tree", priorities=(3, 2, 1)))
    taus = [s.tau for s in collect_termination_samples([run_trace("coloring", tri)])]
    assert taus == [True, True, False]


def test_kruskal_rejected():
    g = Graph(3, ((0, 1), (1, 2)), "tree", weights=(1, 2))
    with pytest.raises(ValueError):
        collect_termination_samples([run_trace("kruskal", g)])


def test_bfs_rule(bfs_traces):
    samples = collect_termination_samples(bfs_traces)
    rule = enumerate_rule(samples, schema="bfs")
    assert rule.indices == (0, 1) and rule.assignment == {0: 0, 1: 1}
    assert rule.render(schema_for("bfs")) == "continue ⟺ ∃n. ¬hasBeenVisited(n) ∧ hasVisitedNeighbours(n)"


def test_coloring_rule_and_rival_logged(coloring_traces, caplog):
    with caplog.at_level(logging.INFO, logger="algoconcepts.termination"):
        rule = enumerate_rule(collect_termination_samples(coloring_traces))
    assert rule.indices == (0,) and rule.assignment == {0: 0}
    assert "also fit" in caplog.text


def test_prefers_smaller_rule():
    samples = [sample([[0, 1]], True), sample([[1, 1]], False), sample([[1, 0]], False)]
    assert fits(TerminationRule((0, 1), {0: 0, 1: 1}), samples)
    rule = enumerate_rule(samples)
    assert rule.indices == (0,) and rule.assignment == {0: 0}


def test_degenerate_and_missing():
    with pytest.raises(DegenerateSamplesError):
        enumerate_rule([sample([[0, 1]], True)])
    with pytest.raises(DegenerateSamplesError):
        enumerate_rule([])
    # identical concept sets with opposite flags: nothing can fit
    with pytest.raises(NoRuleFound):
        enumerate_rule([sample([[0, 1]], True), sample([[0, 1]], False)])


def test_eval_rule_examples():
    assert not eval_rule(BFS_RULE, {(1, 1)})
    assert eval_rule(BFS_RULE, {(1, 1), (0, 1)})
    assert eval_rule(TerminationRule((), {}), {(0, 0)})
    assert eval_rule(TerminationRule((), {}), set())
    with pytest.raises(ValueError):
        eval_rule(TerminationRule((3,), {3: 1}), np.zeros((2, 2), bool))


def _brute_force_smaller_exists(samples, width, size):
    for k in range(1, size):
        for idx in itertools.combinations(range(width), k):
            for bits in itertools.product((0, 1), repeat=k):
                if fits(TerminationRule(idx, dict(zip(idx, bits))), samples):
                    return True
    return False


def test_minimality_exhaustive(coloring_traces):
    samples = collect_termination_samples(coloring_traces)
    rule = enumerate_rule(samples)
    assert not _brute_force_smaller_exists(samples, 7, len(rule.indices))


@pytest.mark.parametrize("alg", ["bfs", "coloring"])
def test_rule_generalises_to_larger_graphs(alg, bfs_traces, coloring_traces):
    train = bfs_traces if alg == "bfs" else coloring_traces
    rule = enumerate_rule(collect_termination_samples(train))
    for n in (50, 100):
        big = [run_trace(alg, g) for g in make_test_graphs(alg, n, 7, seed=4)]
        assert fits(rule, collect_termination_samples(big))


def test_restrict_to_relevant(bfs_traces):
    samples = collect_termination_samples(bfs_traces)
    with pytest.raises(NoRuleFound):
        enumerate_rule(samples, restrict=[0])


def test_rule_assignment_must_match_indices():
    with pytest.raises(ValueError):
        TerminationRule((0, 1), {0: 1})
