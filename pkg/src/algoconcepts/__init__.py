"""Concept-level rule extraction for classical graph algorithms.

Graphs are generated per algorithm, executed step by step with boolean
concepts recorded for every node or edge, and the concept-to-output map is
recovered as minimised DNF rules plus an existential termination rule.
"""
from ._kernels import BACKEND
from .algoexec import (SCHEMAS, ConceptSchema, Trace, execute_with_decoder, execute_with_rules,
                       first_divergence, run_trace, schema_for, traces_equal)
from .decoder import DecoderModel, LabeledConceptSet, TrainConfig, prune_firstlayer, train_decoder
from .evalmetrics import MetricsReport, compute_metrics, fit_decision_tree, tree_predict
from .graphgen import Graph, GraphCategory, make_dataset, make_test_graphs, prepare_graph
from .logic import DnfFormula, Term, extract_formula, format_formula, parse_formula, simplify
from .pipeline import PipelineConfig, extract_rules, learn_termination, run_repro
from .termination import TerminationRule, enumerate_rule, eval_rule

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "SCHEMAS", "ConceptSchema", "DecoderModel", "DnfFormula", "Graph", "GraphCategory",
    "LabeledConceptSet", "MetricsReport", "PipelineConfig", "Term", "TerminationRule", "Trace",
    "TrainConfig", "compute_metrics", "enumerate_rule", "eval_rule", "execute_with_decoder",
    "execute_with_rules", "extract_formula", "extract_rules", "first_divergence", "fit_decision_tree",
    "format_formula", "learn_termination", "make_dataset", "make_test_graphs", "parse_formula",
    "prepare_graph", "prune_firstlayer", "run_repro", "run_trace", "schema_for", "simplify",
    "traces_equal", "train_decoder", "tree_predict",
]
