"""Trace-level accuracy metrics and a small Gini decision tree over concepts.

Mean-step accuracy is the per-step unit accuracy averaged over steps, then
over graphs.  When traces differ in length only the common prefix is scored.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .algoexec import TERMINATING, Trace

METRIC_NAMES = (
    "mean_step_acc", "last_step_acc", "term_acc",
    "formula_mean_step_acc", "formula_last_step_acc", "formula_term_acc",
    "concepts_mean_step_acc", "concepts_last_step_acc",
)


@dataclass(frozen=True)
class TraceMetrics:
    mean_step: float
    last_step: float
    term: float | None
    concepts_mean_step: float
    concepts_last_step: float
    steps_scored: int
    truncated: bool
    mode: str = "formula"


MODES = ("decoder", "formula")


def compute_metrics(pred: Trace, truth: Trace, mode: str = "formula") -> TraceMetrics:
    """Compare a predicted trace against the ground-truth trace of the same graph.

    ``mode`` records whether ``pred`` was labelled by the decoder or by the
    extracted formulas; it decides which report fields the numbers feed.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if pred.algorithm != truth.algorithm:
        raise ValueError("traces come from different algorithms")
    if pred.graph.node_count != truth.graph.node_count or pred.graph.edges != truth.graph.edges:
        raise ValueError("traces come from different graphs")
    k = min(len(pred.steps), len(truth.steps))
    if k == 0:
        raise ValueError("empty trace")
    steps = list(zip(pred.steps[:k], truth.steps[:k]))
    out_acc = [float((p.outputs == t.outputs).mean()) for p, t in steps]
    con_acc = [float((p.concepts == t.concepts).mean()) for p, t in steps]
    term = None
    if truth.algorithm in TERMINATING:
        term = float(np.mean([p.continue_flag == t.continue_flag for p, t in steps]))
    pl, tl = pred.steps[-1], truth.steps[-1]
    return TraceMetrics(
        mean_step=float(np.mean(out_acc)),
        last_step=float((pl.outputs == tl.outputs).mean()),
        term=term,
        concepts_mean_step=float(np.mean(con_acc)),
        concepts_last_step=float((pl.concepts == tl.concepts).mean()),
        steps_scored=k,
        truncated=len(pred.steps) != len(truth.steps),
        mode=mode,
    )


@dataclass
class MetricsReport:
    """metric -> graph size -> {"mean", "std", "n"}."""

    algorithm: str
    metrics: dict[str, dict[int, dict[str, float]]] = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def add(self, metric: str, size: int, values: Sequence[float]) -> None:
        vals = np.asarray([v for v in values if v is not None], dtype=float)
        if vals.size == 0:
            return
        self.metrics.setdefault(metric, {})[int(size)] = {
            "mean": float(vals.mean()), "std": float(vals.std()), "n": int(vals.size)}

    def value(self, metric: str, size: int) -> float:
        return self.metrics[metric][int(size)]["mean"]

    def to_json(self) -> dict:
        return {"algorithm": self.algorithm,
                "metrics": {m: {str(s): v for s, v in sorted(by.items())} for m, by in self.metrics.items()},
                "notes": self.notes}

    @classmethod
    def from_json(cls, d: dict) -> "MetricsReport":
        return cls(d["algorithm"],
                   {m: {int(s): v for s, v in by.items()} for m, by in d["metrics"].items()},
                   d.get("notes", {}))


def build_report(algorithm: str, results: Iterable[tuple[int, TraceMetrics]]) -> MetricsReport:
    """Aggregate (graph size, per-trace metrics) pairs into per-size buckets."""
    buckets: dict[tuple[int, str], list[TraceMetrics]] = {}
    for size, m in results:
        buckets.setdefault((int(size), m.mode), []).append(m)
    report = MetricsReport(algorithm)
    for (size, mode), ms in sorted(buckets.items()):
        prefix = "" if mode == "decoder" else "formula_"
        report.add(prefix + "mean_step_acc", size, [m.mean_step for m in ms])
        report.add(prefix + "last_step_acc", size, [m.last_step for m in ms])
        report.add(prefix + "term_acc", size, [m.term for m in ms])
        report.add("concepts_mean_step_acc", size, [m.concepts_mean_step for m in ms])
        report.add("concepts_last_step_acc", size, [m.concepts_last_step for m in ms])
        report.notes.setdefault("truncated", {})[f"{mode}@{size}"] = sum(m.truncated for m in ms)
    return report


# --------------------------------------------------------------------------
# decision tree


@dataclass
class TreeNode:
    label: int
    count: int
    purity: float
    concept: int | None = None  # split concept; None for leaves
    false_child: "TreeNode | None" = None
    true_child: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.concept is None


@dataclass
class DecisionTree:
    root: TreeNode
    n_concepts: int

    def leaves(self) -> list[TreeNode]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack += [node.true_child, node.false_child]
        return out

    def split_concepts(self) -> set[int]:
        out, stack = set(), [self.root]
        while stack:
            node = stack.pop()
            if not node.is_leaf:
                out.add(node.concept)
                stack += [node.true_child, node.false_child]
        return out

    def depth(self) -> int:
        def d(node):
            return 0 if node.is_leaf else 1 + max(d(node.false_child), d(node.true_child))
        return d(self.root)


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - (p * p).sum())


def fit_decision_tree(concepts, labels, max_depth: int | None = None) -> DecisionTree:
    """Greedy CART on boolean concepts; ties between splits go to the smaller index."""
    X = np.asarray(concepts, dtype=bool)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0 or y.shape != (X.shape[0],):
        raise ValueError("need a non-empty concept matrix with one label per row")
    n_labels = int(y.max()) + 1
    # collapse duplicate rows into (pattern, per-label counts)
    patterns, inverse = np.unique(X, axis=0, return_inverse=True)
    counts = np.zeros((patterns.shape[0], n_labels), dtype=np.int64)
    np.add.at(counts, (inverse.ravel(), y), 1)

    def build(rows: np.ndarray, used: frozenset, depth: int) -> TreeNode:
        totals = counts[rows].sum(axis=0)
        label = int(totals.argmax())
        n = int(totals.sum())
        node = TreeNode(label, n, float(totals[label] / n))
        if node.purity == 1.0 or (max_depth is not None and depth >= max_depth):
            return node
        best, best_score = None, None
        for j in range(X.shape[1]):
            if j in used:
                continue
            on = patterns[rows, j]
            if on.all() or not on.any():
                continue
            c_t, c_f = counts[rows[on]].sum(axis=0), counts[rows[~on]].sum(axis=0)
            score = (c_t.sum() * _gini(c_t) + c_f.sum() * _gini(c_f)) / n
            if best_score is None or score < best_score - 1e-12:
                best, best_score = j, score
        if best is None:
            return node
        on = patterns[rows, best]
        node.concept = best
        node.true_child = build(rows[on], used | {best}, depth + 1)
        node.false_child = build(rows[~on], used | {best}, depth + 1)
        return node

    return DecisionTree(build(np.arange(patterns.shape[0]), frozenset(), 0), X.shape[1])


def tree_predict(tree: DecisionTree, concepts) -> int:
    c = np.asarray(concepts, dtype=bool)
    if c.shape != (tree.n_concepts,):
        raise ValueError(f"expected {tree.n_concepts} concepts, got shape {c.shape}")
    node = tree.root
    while not node.is_leaf:
        node = node.true_child if c[node.concept] else node.false_child
    return node.label


def tree_to_text(tree: DecisionTree, names: Sequence[str] | None = None,
                 label_names: Sequence[str] | None = None) -> str:
    names = names or [f"c{j}" for j in range(tree.n_concepts)]
    lines = []

    def walk(node: TreeNode, indent: str):
        if node.is_leaf:
            lab = label_names[node.label] if label_names else str(node.label)
            lines.append(f"{indent}-> {lab} (n={node.count}, purity={node.purity:.3f})")
            return
        lines.append(f"{indent}{names[node.concept]}?")
        lines.append(f"{indent}  true:")
        walk(node.true_child, indent + "    ")
        lines.append(f"{indent}  false:")
        walk(node.false_child, indent + "    ")

    walk(tree.root, "")
    return "\n".join(lines) + "\n"


def tree_to_dot(tree: DecisionTree, names: Sequence[str] | None = None,
                label_names: Sequence[str] | None = None) -> str:
    names = names or [f"c{j}" for j in range(tree.n_concepts)]
    lines = ["digraph tree {", "  node [shape=box];"]
    counter = [0]

    def walk(node: TreeNode) -> int:
        me = counter[0]
        counter[0] += 1
        if node.is_leaf:
            lab = label_names[node.label] if label_names else str(node.label)
            lines.append(f'  n{me} [label="{lab}\\nn={node.count}" style=rounded];')
        else:
            lines.append(f'  n{me} [label="{names[node.concept]}"];')
            t = walk(node.true_child)
            lines.append(f'  n{me} -> n{t} [label="true"];')
            f = walk(node.false_child)
            lines.append(f'  n{me} -> n{f} [label="false"];')
        return me

    walk(tree.root)
    lines.append("}")
    return "\n".join(lines) + "\n"


def tree_to_json(tree: DecisionTree) -> dict:
    def enc(node: TreeNode) -> dict:
        d = {"label": node.label, "count": node.count, "purity": node.purity}
        if not node.is_leaf:
            d.update(concept=node.concept, true=enc(node.true_child), false=enc(node.false_child))
        return d
    return {"n_concepts": tree.n_concepts, "root": enc(tree.root)}


def tree_from_json(d: dict) -> DecisionTree:
    def dec(x: dict) -> TreeNode:
        node = TreeNode(x["label"], x["count"], x["purity"])
        if "concept" in x:
            node.concept = x["concept"]
            node.true_child = dec(x["true"])
            node.false_child = dec(x["false"])
        return node
    return DecisionTree(dec(d["root"]), d["n_concepts"])
