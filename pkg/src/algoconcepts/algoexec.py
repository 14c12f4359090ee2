"""Stepwise executors emitting ground-truth concepts, outputs and stop flags.

Units are nodes for BFS and coloring, edges for Kruskal's.  A step reads the
concepts of the current state, applies the algorithm's update, and records
the concepts of the updated state (``post_concepts``) used for termination.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Mapping, Sequence

import numpy as np

from . import _kernels
from .graphgen import Graph, derive_seed, make_rng

if TYPE_CHECKING:
    from .logic import DnfFormula
    from .termination import TerminationRule

NUM_COLORS = 5
DEFAULT_STEP_CAP = 10_000


@dataclass(frozen=True)
class ConceptSchema:
    algorithm: str
    names: tuple[str, ...]
    abbreviations: tuple[str, ...]
    label_names: tuple[str, ...]
    unit: str  # variable name used when rendering rules

    @property
    def width(self) -> int:
        return len(self.names)

    @property
    def n_labels(self) -> int:
        return len(self.label_names)

    def index(self, name: str) -> int:
        if name in self.names:
            return self.names.index(name)
        return self.abbreviations.index(name)


BFS_SCHEMA = ConceptSchema(
    "bfs",
    ("hasBeenVisited", "hasVisitedNeighbours"),
    ("hBV", "hVN"),
    ("not visited", "visited"),
    "n",
)
COLORING_SCHEMA = ConceptSchema(
    "coloring",
    ("isColored", "hasPriority") + tuple(f"color{x}Seen" for x in range(1, NUM_COLORS + 1)),
    ("iC", "hP") + tuple(f"c{x}S" for x in range(1, NUM_COLORS + 1)),
    ("not colored",) + tuple(f"color {x}" for x in range(1, NUM_COLORS + 1)),
    "n",
)
KRUSKAL_SCHEMA = ConceptSchema(
    "kruskal",
    ("lighterEdgesVisited", "nodesInSameSet", "edgeInMst"),
    ("lEV", "nISS", "eIM"),
    ("not in MST", "in MST"),
    "e",
)
SCHEMAS = {s.algorithm: s for s in (BFS_SCHEMA, COLORING_SCHEMA, KRUSKAL_SCHEMA)}
TERMINATING = ("bfs", "coloring")


def schema_for(algorithm: str) -> ConceptSchema:
    try:
        return SCHEMAS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}") from None


class ExecutionError(RuntimeError):
    pass


class ConceptShapeError(ExecutionError, ValueError):
    pass


class UnsatisfiableColoringError(ExecutionError):
    def __init__(self, node: int, step: int):
        super().__init__(f"node {node} has priority at step {step} but sees all {NUM_COLORS} colors")
        self.node = node
        self.step = step


class StepCapExceeded(ExecutionError):
    def __init__(self, cap: int, partial: "Trace"):
        super().__init__(f"no termination within {cap} steps")
        self.partial = partial


class AmbiguousRuleError(ExecutionError):
    def __init__(self, step: int, unit: int, concepts, matched: int):
        vec = [int(c) for c in concepts]
        what = "no label formula" if matched == 0 else f"{matched} label formulas"
        super().__init__(f"step {step}, unit {unit}: {what} satisfied by concepts {vec}")
        self.step = step
        self.unit = unit
        self.concepts = vec
        self.matched = matched


# --------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class BfsState:
    visited: np.ndarray


@dataclass(frozen=True)
class ColoringState:
    colors: np.ndarray  # 0 = uncolored


@dataclass(frozen=True)
class KruskalState:
    in_mst: np.ndarray
    parent: np.ndarray
    size: np.ndarray
    processed_rank: int = 0  # edges of rank <= processed_rank have been handled

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return int(root)

    def roots(self) -> np.ndarray:
        return np.array([self.find(i) for i in range(self.parent.shape[0])], dtype=np.int64)

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        # larger component absorbs; equal sizes -> smaller root index wins
        if self.size[ra] < self.size[rb] or (self.size[ra] == self.size[rb] and rb < ra):
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]

    def copy(self) -> "KruskalState":
        return KruskalState(self.in_mst.copy(), self.parent.copy(), self.size.copy(), self.processed_rank)


def initial_state(algorithm: str, g: Graph, source: int | None = None):
    if algorithm == "bfs":
        if source is None or not 0 <= source < g.node_count:
            raise ValueError("BFS needs a source node inside the graph")
        visited = np.zeros(g.node_count, dtype=bool)
        visited[source] = True
        return BfsState(visited)
    if algorithm == "coloring":
        return ColoringState(np.zeros(g.node_count, dtype=np.int64))
    if algorithm == "kruskal":
        return KruskalState(
            np.zeros(g.edge_count, dtype=bool),
            np.arange(g.node_count, dtype=np.int64),
            np.ones(g.node_count, dtype=np.int64),
            0,
        )
    raise ValueError(f"unknown algorithm {algorithm!r}")


def edge_ranks(g: Graph) -> np.ndarray:
    """1-based rank of each edge in ascending weight order."""
    if g.weights is None:
        raise ValueError("Kruskal's needs edge weights")
    order = np.argsort(np.asarray(g.weights), kind="stable")
    ranks = np.empty(g.edge_count, dtype=np.int64)
    ranks[order] = np.arange(1, g.edge_count + 1)
    return ranks


# --------------------------------------------------------------------------
# concepts


def _bfs_concepts(g: Graph, state: BfsState) -> np.ndarray:
    visited = np.asarray(state.visited, dtype=bool)
    if visited.shape != (g.node_count,):
        raise ConceptShapeError("visited vector does not match node count")
    hvn = (g.adjacency(closed=True) & visited[None, :]).any(axis=1)
    return np.stack([visited, hvn], axis=1)


def _coloring_concepts(g: Graph, state: ColoringState) -> np.ndarray:
    colors = np.asarray(state.colors)
    if colors.shape != (g.node_count,):
        raise ConceptShapeError("color vector does not match node count")
    if g.priorities is None:
        raise ConceptShapeError("coloring needs node priorities")
    adj = g.adjacency()  # self-loops never count as rivals or seen colors
    pr = np.asarray(g.priorities)
    uncolored = colors == 0
    rival = adj & uncolored[None, :] & (pr[None, :] > pr[:, None])
    has_priority = uncolored & ~rival.any(axis=1)
    seen = [(adj & (colors[None, :] == x)).any(axis=1) for x in range(1, NUM_COLORS + 1)]
    return np.stack([~uncolored, has_priority] + seen, axis=1)


def _kruskal_concepts(g: Graph, state: KruskalState, ranks: np.ndarray | None = None) -> np.ndarray:
    if state.in_mst.shape != (g.edge_count,) or state.parent.shape != (g.node_count,):
        raise ConceptShapeError("Kruskal state does not match graph")
    ranks = edge_ranks(g) if ranks is None else ranks
    ends = np.asarray(g.edges, dtype=np.int64).reshape(-1, 2)
    roots = state.roots()
    lev = ranks <= state.processed_rank + 1
    niss = roots[ends[:, 0]] == roots[ends[:, 1]]
    return np.stack([lev, niss, state.in_mst.astype(bool)], axis=1)


def annotate_concepts(algorithm: str, g: Graph, state, *, ranks: np.ndarray | None = None) -> np.ndarray:
    """Unit x concept boolean matrix for ``state``."""
    if algorithm == "bfs":
        return _bfs_concepts(g, state)
    if algorithm == "coloring":
        return _coloring_concepts(g, state)
    if algorithm == "kruskal":
        return _kruskal_concepts(g, state, ranks)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def continue_from_concepts(algorithm: str, post: np.ndarray) -> bool:
    """Ground-truth "work remains" predicate on post-update concepts."""
    if algorithm == "bfs":
        return bool((~post[:, 0] & post[:, 1]).any())
    if algorithm == "coloring":
        return bool((~post[:, 0]).any())
    raise ValueError(f"{algorithm} has no termination predicate")


# --------------------------------------------------------------------------
# steps and traces


@dataclass(frozen=True)
class StepRecord:
    t: int
    concepts: np.ndarray
    post_concepts: np.ndarray
    outputs: np.ndarray
    continue_flag: bool

    def __eq__(self, other):
        if not isinstance(other, StepRecord):
            return NotImplemented
        return (self.t == other.t and self.continue_flag == other.continue_flag
                and np.array_equal(self.concepts, other.concepts)
                and np.array_equal(self.post_concepts, other.post_concepts)
                and np.array_equal(self.outputs, other.outputs))


@dataclass(frozen=True)
class Trace:
    graph: Graph
    algorithm: str
    steps: tuple[StepRecord, ...]
    source: int | None = None

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def final_outputs(self) -> np.ndarray:
        return self.steps[-1].outputs


def bfs_step(g: Graph, state: BfsState, t: int = 1) -> tuple[StepRecord, BfsState]:
    if not g.has_self_loops:
        raise ExecutionError("BFS expects self-loops on every node")
    concepts = _bfs_concepts(g, state)
    new = BfsState(concepts[:, 1].copy())
    post = _bfs_concepts(g, new)
    rec = StepRecord(t, concepts, post, new.visited.astype(np.int64), continue_from_concepts("bfs", post))
    return rec, new


def coloring_step(g: Graph, state: ColoringState, t: int = 1) -> tuple[StepRecord, ColoringState]:
    concepts = _coloring_concepts(g, state)
    colors = np.array(state.colors, dtype=np.int64)
    for i in np.flatnonzero(concepts[:, 1]):
        seen = concepts[i, 2:]
        free = np.flatnonzero(~seen)
        if free.size == 0:
            raise UnsatisfiableColoringError(int(i), t)
        colors[i] = free[0] + 1
    new = ColoringState(colors)
    post = _coloring_concepts(g, new)
    return StepRecord(t, concepts, post, colors.copy(), continue_from_concepts("coloring", post)), new


def kruskal_step(g: Graph, state: KruskalState, t: int | None = None,
                 *, ranks: np.ndarray | None = None) -> tuple[StepRecord, KruskalState]:
    ranks = edge_ranks(g) if ranks is None else ranks
    step = state.processed_rank + 1
    if step > g.edge_count:
        raise ExecutionError(f"Kruskal's has only {g.edge_count} steps")
    concepts = _kruskal_concepts(g, state, ranks)
    new = state.copy()
    e = int(np.flatnonzero(ranks == step)[0])
    if not concepts[e, 1]:
        u, v = g.edges[e]
        new.in_mst[e] = True
        new.union(u, v)
    new = KruskalState(new.in_mst, new.parent, new.size, step)
    post = _kruskal_concepts(g, new, ranks)
    rec = StepRecord(step, concepts, post, new.in_mst.astype(np.int64), step < g.edge_count)
    return rec, new


def pick_source(g: Graph, seed: int) -> int:
    return int(make_rng(seed, 7).integers(g.node_count))


def run_trace(algorithm: str, g: Graph, source: int | None = None,
              step_cap: int = DEFAULT_STEP_CAP) -> Trace:
    """Run the classical algorithm to completion, recording every step."""
    if algorithm == "bfs" and source is None:
        source = pick_source(g, g.seed)
    state = initial_state(algorithm, g, source)
    steps: list[StepRecord] = []
    if algorithm == "kruskal":
        ranks = edge_ranks(g)
        for _ in range(g.edge_count):
            rec, state = kruskal_step(g, state, ranks=ranks)
            steps.append(rec)
        return Trace(g, algorithm, tuple(steps), None)
    stepper = bfs_step if algorithm == "bfs" else coloring_step
    for t in range(1, step_cap + 1):
        rec, state = stepper(g, state, t)
        steps.append(rec)
        if not rec.continue_flag:
            return Trace(g, algorithm, tuple(steps), source)
    raise StepCapExceeded(step_cap, Trace(g, algorithm, tuple(steps), source))


# --------------------------------------------------------------------------
# rule-driven execution


def _apply_labels(algorithm: str, g: Graph, state, labels: np.ndarray):
    if algorithm == "bfs":
        return BfsState(labels.astype(bool))
    if algorithm == "coloring":
        return ColoringState(labels.astype(np.int64))
    new = state.copy()
    fresh = np.flatnonzero(labels.astype(bool) & ~state.in_mst)
    for e in fresh:
        u, v = g.edges[e]
        new.union(u, v)
    return KruskalState(labels.astype(bool), new.parent, new.size, state.processed_rank + 1)


@dataclass
class ReplayStats:
    ambiguous: int = 0  # units where more than one label formula held
    unmatched: int = 0  # units where none held


def replay(algorithm: str, g: Graph,
           label_fn: Callable[[np.ndarray, int], np.ndarray],
           continue_fn: Callable[[np.ndarray], bool] | None,
           *, source: int | None = None, step_cap: int = DEFAULT_STEP_CAP,
           flip_prob: float = 0.0, seed: int = 0) -> Trace:
    """Execute ``algorithm`` where a labeller maps concepts to outputs.

    Concepts are computed from the replayed state and optionally corrupted
    before the labeller and the termination predicate see them; the
    recorded ``concepts``/``post_concepts`` are the (possibly corrupted)
    values that were acted on.
    """
    from .decoder import corrupt_concepts

    if algorithm == "bfs" and source is None:
        source = pick_source(g, g.seed)
    state = initial_state(algorithm, g, source)
    ranks = edge_ranks(g) if algorithm == "kruskal" else None
    n_steps = g.edge_count if algorithm == "kruskal" else step_cap
    steps: list[StepRecord] = []

    def noisy(c, t, which):
        if flip_prob <= 0.0:
            return c
        return corrupt_concepts(c, flip_prob, derive_seed(seed, t, which))

    for t in range(1, n_steps + 1):
        concepts = noisy(annotate_concepts(algorithm, g, state, ranks=ranks), t, 0)
        labels = np.asarray(label_fn(concepts, t), dtype=np.int64)
        state = _apply_labels(algorithm, g, state, labels)
        post = noisy(annotate_concepts(algorithm, g, state, ranks=ranks), t, 1)
        if algorithm == "kruskal":
            cont = t < g.edge_count
        else:
            cont = bool(continue_fn(post))
        steps.append(StepRecord(t, concepts, post, labels, cont))
        if not cont:
            return Trace(g, algorithm, tuple(steps), source)
    if algorithm == "kruskal":
        return Trace(g, algorithm, tuple(steps), source)
    raise StepCapExceeded(step_cap, Trace(g, algorithm, tuple(steps), source))


def formula_labeller(label_rules: Mapping[int, DnfFormula], n_labels: int,
                     *, strict: bool = True, stats: ReplayStats | None = None):
    """Labeller choosing, per unit, the label whose formula holds.

    ``strict`` raises :class:`AmbiguousRuleError` unless exactly one formula
    holds; otherwise the first satisfied label is used (label 0 if none) and
    the incidents are counted in ``stats``.
    """
    extra = set(label_rules) - set(range(n_labels))
    if extra:
        raise ValueError(f"rules for unknown labels {sorted(extra)}")
    # a label without a rule never matches, so strict replay reports the gap
    # at the first unit that needed it
    masks, values, owners = [], [], []
    for label in range(n_labels):
        for term in (label_rules[label].terms if label in label_rules else ()):
            masks.append(term.mask)
            values.append(term.bits)
            owners.append(label)
    masks = np.array(masks, dtype=np.uint64)
    values = np.array(values, dtype=np.uint64)
    owners = np.array(owners, dtype=np.int64)

    def label_fn(concepts: np.ndarray, t: int) -> np.ndarray:
        first, count = _kernels.match_labels(_kernels.pack_rows(concepts), masks, values, owners, n_labels)
        bad = np.flatnonzero(count != 1)
        if bad.size:
            if strict:
                u = int(bad[0])
                raise AmbiguousRuleError(t, u, concepts[u], int(count[u]))
            if stats is not None:
                stats.ambiguous += int((count > 1).sum())
                stats.unmatched += int((count == 0).sum())
        return np.where(first < 0, 0, first)

    return label_fn


def execute_with_rules(g: Graph, algorithm: str, label_rules: Mapping[int, DnfFormula],
                       term_rule: TerminationRule | None = None, step_cap: int = DEFAULT_STEP_CAP,
                       *, source: int | None = None, flip_prob: float = 0.0, seed: int = 0,
                       strict: bool = True, stats: ReplayStats | None = None) -> Trace:
    """Re-execute ``algorithm`` using only extracted label formulas and the
    existential termination rule."""
    from .termination import eval_rule

    schema = schema_for(algorithm)
    if algorithm in TERMINATING and term_rule is None:
        raise ValueError(f"{algorithm} needs a termination rule")
    label_fn = formula_labeller(label_rules, schema.n_labels, strict=strict, stats=stats)
    continue_fn = None
    if term_rule is not None:
        def continue_fn(post):
            return eval_rule(term_rule, post)
    return replay(algorithm, g, label_fn, continue_fn, source=source, step_cap=step_cap,
                  flip_prob=flip_prob, seed=seed)


def execute_with_decoder(g: Graph, algorithm: str, model, term_rule=None,
                         step_cap: int = DEFAULT_STEP_CAP, *, source: int | None = None,
                         flip_prob: float = 0.0, seed: int = 0) -> Trace:
    """Same loop as :func:`execute_with_rules` with the trained decoder as labeller."""
    from .decoder import predict_labels
    from .termination import eval_rule

    continue_fn = None
    if algorithm in TERMINATING:
        if term_rule is None:
            raise ValueError(f"{algorithm} needs a termination rule")

        def continue_fn(post):
            return eval_rule(term_rule, post)

    return replay(algorithm, g, lambda c, t: predict_labels(model, c), continue_fn,
                  source=source, step_cap=step_cap, flip_prob=flip_prob, seed=seed)


def first_divergence(a: Trace, b: Trace) -> dict | None:
    """Location of the first difference between two traces, or None if equal."""
    for ra, rb in zip(a.steps, b.steps):
        if not np.array_equal(ra.outputs, rb.outputs):
            u = int(np.flatnonzero(ra.outputs != rb.outputs)[0])
            return {"step": ra.t, "field": "outputs", "unit": u,
                    "got": int(ra.outputs[u]), "expected": int(rb.outputs[u])}
        if ra.continue_flag != rb.continue_flag:
            return {"step": ra.t, "field": "continue", "got": ra.continue_flag, "expected": rb.continue_flag}
    if len(a.steps) != len(b.steps):
        return {"step": min(len(a.steps), len(b.steps)) + 1, "field": "length",
                "got": len(a.steps), "expected": len(b.steps)}
    return None


def traces_equal(a: Trace, b: Trace) -> bool:
    return first_divergence(a, b) is None and all(
        np.array_equal(x.concepts, y.concepts) and np.array_equal(x.post_concepts, y.post_concepts)
        for x, y in zip(a.steps, b.steps))


def labeled_rows(traces: Sequence[Trace]) -> tuple[np.ndarray, np.ndarray]:
    """Stack (concepts, output label) over every unit of every step."""
    xs = [s.concepts for tr in traces for s in tr.steps]
    ys = [s.outputs for tr in traces for s in tr.steps]
    if not xs:
        raise ValueError("no trace steps")
    return np.concatenate(xs).astype(bool), np.concatenate(ys).astype(np.int64)
