"""JSON / JSONL persistence for every artifact, with atomic writes."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .algoexec import StepRecord, Trace, schema_for
from .decoder import DecoderModel
from .graphgen import Graph, GraphCategory
from .logic import DnfFormula, Term, format_formula
from .termination import TerminationRule


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj, path) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def dump_jsonl(records: Iterable[dict], path) -> None:
    atomic_write_text(path, "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in records))


def load_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# graphs -------------------------------------------------------------------

def graph_to_json(g: Graph) -> dict:
    return {
        "category": g.category.value,
        "nodes": g.node_count,
        "edges": [list(e) for e in g.edges],
        "priorities": None if g.priorities is None else list(g.priorities),
        "weights": None if g.weights is None else list(g.weights),
        "self_loops": g.has_self_loops,
        "seed": g.seed,
    }


def graph_from_json(d: Mapping) -> Graph:
    return Graph(
        node_count=int(d["nodes"]),
        edges=tuple(tuple(e) for e in d["edges"]),
        category=GraphCategory(d["category"]),
        seed=int(d.get("seed", 0)),
        priorities=None if d.get("priorities") is None else tuple(d["priorities"]),
        weights=None if d.get("weights") is None else tuple(d["weights"]),
        has_self_loops=bool(d.get("self_loops", False)),
    )


def save_graphs(graphs: Iterable[Graph], path) -> None:
    dump_jsonl((graph_to_json(g) for g in graphs), path)


def load_graphs(path) -> list[Graph]:
    return [graph_from_json(d) for d in load_jsonl(path)]


# traces -------------------------------------------------------------------

def _bits(a: np.ndarray) -> list:
    return np.asarray(a, dtype=np.int64).tolist()


def trace_to_json(tr: Trace) -> dict:
    return {
        "algorithm": tr.algorithm,
        "graph": graph_to_json(tr.graph),
        "source": tr.source,
        "steps": [{"t": s.t, "concepts": _bits(s.concepts), "post_concepts": _bits(s.post_concepts),
                   "outputs": _bits(s.outputs), "continue": int(s.continue_flag)} for s in tr.steps],
    }


def trace_from_json(d: Mapping) -> Trace:
    width = schema_for(d["algorithm"]).width

    def mat(x):
        return np.asarray(x, dtype=bool).reshape(-1, width)

    steps = tuple(StepRecord(int(s["t"]), mat(s["concepts"]), mat(s["post_concepts"]),
                             np.asarray(s["outputs"], dtype=np.int64), bool(s["continue"]))
                  for s in d["steps"])
    return Trace(graph_from_json(d["graph"]), d["algorithm"], steps, d.get("source"))


def save_traces(traces: Iterable[Trace], path) -> None:
    dump_jsonl((trace_to_json(t) for t in traces), path)


def load_traces(path) -> list[Trace]:
    return [trace_from_json(d) for d in load_jsonl(path)]


# formulas and rules -------------------------------------------------------

def formula_to_json(f: DnfFormula, schema=None) -> dict:
    d = {"width": f.width,
         "terms": [[{"c": lit.concept_index, "pos": lit.positive} for lit in t.literals] for t in f.terms]}
    if schema is not None:
        d["text"] = format_formula(f, schema)
    return d


def formula_from_json(d: Mapping) -> DnfFormula:
    return DnfFormula(int(d["width"]), tuple(
        Term.from_literals((lit["c"], bool(lit["pos"])) for lit in term) for term in d["terms"]))


def rule_to_json(rule: TerminationRule, schema=None) -> dict:
    d = {"indices": list(rule.indices),
         "assignment": {str(i): int(v) for i, v in sorted(rule.assignment.items())},
         "schema": rule.schema}
    if schema is not None:
        d["text"] = rule.render(schema)
    return d


def rule_from_json(d: Mapping) -> TerminationRule:
    return TerminationRule(tuple(d["indices"]), {int(k): int(v) for k, v in d["assignment"].items()},
                           d.get("schema", ""))


def rules_to_json(algorithm: str, label_rules: Mapping[int, DnfFormula],
                  term_rule: TerminationRule | None = None, extra: Mapping | None = None) -> dict:
    schema = schema_for(algorithm)
    d = {"schema": algorithm,
         "labels": {str(k): {"name": schema.label_names[k], **formula_to_json(f, schema)}
                    for k, f in sorted(label_rules.items())},
         "termination": None if term_rule is None else rule_to_json(term_rule, schema)}
    if extra:
        d.update(extra)
    return d


def rules_from_json(d: Mapping) -> tuple[str, dict[int, DnfFormula], TerminationRule | None]:
    labels = {int(k): formula_from_json(v) for k, v in d["labels"].items()}
    term = d.get("termination")
    return d["schema"], labels, None if term is None else rule_from_json(term)


# decoder ------------------------------------------------------------------

def model_to_json(m: DecoderModel) -> dict:
    return {
        "schema": m.schema,
        "hidden": m.hidden,
        "W1": m.W1.tolist(), "b1": m.b1.tolist(),
        "W2": None if m.W2 is None else m.W2.tolist(),
        "b2": None if m.b2 is None else m.b2.tolist(),
        "prune_mask": [int(x) for x in m.pruned],
        "config": m.config,
    }


def model_from_json(d: Mapping) -> DecoderModel:
    return DecoderModel(
        W1=np.asarray(d["W1"], dtype=float), b1=np.asarray(d["b1"], dtype=float),
        W2=None if d.get("W2") is None else np.asarray(d["W2"], dtype=float),
        b2=None if d.get("b2") is None else np.asarray(d["b2"], dtype=float),
        pruned=np.asarray(d["prune_mask"], dtype=bool),
        schema=d.get("schema", ""), config=dict(d.get("config", {})),
    )
