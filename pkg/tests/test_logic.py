import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algoconcepts.algoexec import labeled_rows, schema_for
from algoconcepts.logic import (ContradictoryDataError, DnfFormula, LogicConfig, LogicError, Term,
                                class_formula, equivalent, eval_dnf, eval_dnf_rows, extract_formula,
                                format_formula, parse_formula, prime_implicants, simplify,
                                term_from_sample, truth_table)


def F(width, *terms):
    """Build a formula from terms written as {index: bool}."""
    return DnfFormula(width, tuple(Term.from_literals(t.items()) for t in terms))


def test_term_from_sample():
    assert term_from_sample([0.8, 0.3]) == Term.from_literals([(0, True), (1, False)])
    assert term_from_sample([1, 1, 1]) == Term(0b111, 0b111)
    assert term_from_sample([0.5]) == Term(1, 1)  # >= is inclusive
    assert len(term_from_sample([0.2, 0.9, 0.4, 0.6])) == 4


def test_logic_config_validation():
    with pytest.raises(ValueError):
        LogicConfig(threshold=1.0)
    assert LogicConfig().dont_care


def test_term_duplicate_concept_rejected():
    with pytest.raises(LogicError):
        Term.from_literals([(0, True), (0, False)])


def test_person_nose():
    person, nose = 0, 1
    f = F(2, {person: True, nose: True}, {person: False, nose: True})
    assert simplify(f) == F(2, {nose: True})


def test_xor_unchanged():
    f = F(2, {0: True, 1: False}, {0: False, 1: True})
    assert simplify(f) == f


def test_absorption():
    assert simplify(F(2, {0: True}, {0: True, 1: True})) == F(2, {0: True})


def test_constants():
    assert simplify(DnfFormula.false(3)) == DnfFormula.false(3)
    assert simplify(F(1, {0: True}, {0: False})) == DnfFormula.true(1)


def test_width_guard():
    f = F(30, {i: True for i in range(25)})
    with pytest.raises(LogicError):
        simplify(f)


def test_eval_constants_and_width():
    f = F(2, {1: True})
    assert eval_dnf(f, [0, 1]) and not eval_dnf(f, [1, 0])
    assert not eval_dnf(DnfFormula.false(2), [1, 1])
    assert eval_dnf(DnfFormula.true(2), [0, 0])
    with pytest.raises(Exception):
        eval_dnf(f, [0, 1, 1])


def test_equivalent_basics():
    a = F(1, {0: True})
    assert not equivalent(a, F(1, {0: False}))
    contradiction = DnfFormula(1, ())  # a ∧ ¬a has no term representation; it is FALSE
    assert equivalent(contradiction, DnfFormula.false(1))
    with pytest.raises(Exception):
        equivalent(F(21, {20: True}), F(21, {20: True}))


def test_prime_implicants_small():
    # f(a, b) = a ∨ b has primes a and b
    primes = prime_implicants({1, 2, 3}, set(), 2)
    assert sorted(primes) == [(1, 1), (2, 2)]


def test_class_formula_bfs(bfs_traces):
    X, y = labeled_rows(bfs_traces)
    raw = class_formula(X, y, 1, relevant=(0, 1))
    assert raw == F(2, {0: True, 1: True}, {0: False, 1: True})
    assert simplify(raw) == F(2, {1: True})


def test_class_formula_single_sample():
    f = class_formula(np.array([[1, 0]]), np.array([1]), 1)
    assert f == F(2, {0: True, 1: False})


def test_class_formula_contradictions():
    X = np.array([[1, 0], [1, 0], [0, 1], [0, 0]] * 5)
    y = np.array([1, 0, 1, 0] * 5)
    with pytest.raises(ContradictoryDataError):
        class_formula(X, y, 1)
    # a single conflicting row among many is dropped and the rest survives
    X = np.array([[0, 1]] * 40 + [[0, 0]] * 40 + [[1, 1], [1, 1]])
    y = np.array([1] * 40 + [0] * 40 + [1, 0])
    assert class_formula(X, y, 1) == F(2, {0: False, 1: True})


def test_class_formula_kruskal(kruskal_traces):
    X, y = labeled_rows(kruskal_traces)
    f = simplify(class_formula(X, y, 1))
    expect = F(3, {0: True, 1: True, 2: True}, {0: True, 1: False, 2: False})
    assert f.term_set() == expect.term_set()


def test_label_formulas_disjoint_on_data(coloring_traces):
    X, y = labeled_rows(coloring_traces)
    forms = [extract_formula(X, y, k, dont_care=False) for k in range(6)]
    hits = np.stack([eval_dnf_rows(f, X) for f in forms], axis=1)
    assert np.all(hits.sum(axis=1) == 1)
    assert np.array_equal(hits.argmax(axis=1), y)


def test_dont_care_drops_redundant_literal(bfs_traces):
    X, y = labeled_rows(bfs_traces)
    off = extract_formula(X, y, 0, dont_care=False)
    on = extract_formula(X, y, 0, dont_care=True)
    assert off == F(2, {0: False, 1: False})
    # the combination hBV ∧ ¬hVN never occurs (self-loops), so hBV is free
    assert on == F(2, {1: False})
    assert on.literal_count() < off.literal_count()


def test_extract_determinism(kruskal_traces):
    X, y = labeled_rows(kruskal_traces)
    s = schema_for("kruskal")
    a = format_formula(extract_formula(X, y, 0), s)
    b = format_formula(extract_formula(X.copy(), y.copy(), 0), s)
    assert a == b


def test_format_and_parse():
    s = schema_for("bfs")
    assert format_formula(F(2, {1: True}), s) == "hasVisitedNeighbours(n)"
    assert format_formula(DnfFormula.false(2), s) == "false"
    k = schema_for("kruskal")
    f = F(3, {1: True, 2: False}, {0: False, 2: False})
    text = format_formula(f, k)
    assert text == "(¬lighterEdgesVisited(e) ∧ ¬edgeInMst(e)) ∨ (nodesInSameSet(e) ∧ ¬edgeInMst(e))"
    assert parse_formula(text, k) == f
    assert format_formula(f, k, abbreviate=True) == "(¬lEV(e) ∧ ¬eIM(e)) ∨ (nISS(e) ∧ ¬eIM(e))"
    assert parse_formula("hasVisitedNeighbours(n)", s) == F(2, {1: True})
    with pytest.raises(LogicError):
        parse_formula("nonsense(n)", s)


@st.composite
def formulas(draw, max_k=10):
    k = draw(st.integers(1, max_k))
    n_terms = draw(st.integers(0, 6))
    terms = []
    for _ in range(n_terms):
        idx = draw(st.lists(st.integers(0, k - 1), min_size=0, max_size=k, unique=True))
        terms.append(Term.from_literals((i, draw(st.booleans())) for i in idx))
    return DnfFormula(k, tuple(terms))


@settings(max_examples=500, deadline=None)
@given(formulas())
def test_simplify_equivalent_and_not_longer(f):
    g = simplify(f)
    assert equivalent(f, g, f.width)
    assert g.size() <= f.size()
    # no term subsumed by another
    for a in g.terms:
        for b in g.terms:
            if a != b:
                assert not (a.mask & b.mask == a.mask and b.bits & a.mask == a.bits)


@settings(max_examples=100, deadline=None)
@given(formulas(max_k=8), st.data())
def test_dont_care_respects_care_set(f, data):
    dc_terms = data.draw(st.lists(st.integers(0, (1 << f.width) - 1), max_size=8))
    full = (1 << f.width) - 1
    dc = DnfFormula(f.width, tuple(Term(full, x) for x in dc_terms))
    g = simplify(f, dc)
    care = ~truth_table(dc, f.width)
    assert np.array_equal(truth_table(f, f.width)[care], truth_table(g, f.width)[care])
