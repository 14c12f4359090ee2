"""Seeded graph corpora for the BFS, parallel coloring and Kruskal tasks.

Every random choice flows from a numpy ``SeedSequence`` keyed by
``(seed, *path)`` so a graph is reproducible from its integer seed alone,
independent of how many other graphs were generated before it.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

MAX_PRIORITY = 255
WEIGHT_UPPER = 2**16  # exclusive
PRIORITY_REPAIR_ROUNDS = 1000
CONNECT_ATTEMPTS = 100


class GraphCategory(str, enum.Enum):
    LADDER = "ladder"
    GRID2D = "grid2d"
    TREE = "tree"
    ERDOS_RENYI = "erdos_renyi"
    BARABASI_ALBERT = "barabasi_albert"
    COMMUNITY4 = "community4"
    CAVEMAN4 = "caveman4"
    FIXED_DEGREE5 = "fixed_degree5"


BFS_CATEGORIES = (
    GraphCategory.LADDER,
    GraphCategory.GRID2D,
    GraphCategory.TREE,
    GraphCategory.ERDOS_RENYI,
    GraphCategory.BARABASI_ALBERT,
    GraphCategory.COMMUNITY4,
    GraphCategory.CAVEMAN4,
)
COLORING_CATEGORIES = (GraphCategory.FIXED_DEGREE5,)
KRUSKAL_CATEGORIES = (
    GraphCategory.LADDER,
    GraphCategory.GRID2D,
    GraphCategory.ERDOS_RENYI,
    GraphCategory.BARABASI_ALBERT,
)

CATEGORIES_FOR = {
    "bfs": BFS_CATEGORIES,
    "coloring": COLORING_CATEGORIES,
    "kruskal": KRUSKAL_CATEGORIES,
}

# (train, val, test) per category, and training graph size
DEFAULT_COUNTS = {
    "bfs": (100, 10, 10),
    "coloring": (800, 80, 80),
    "kruskal": (500, 50, 50),
}
DEFAULT_TRAIN_SIZE = {"bfs": 20, "coloring": 20, "kruskal": 8}
GENERALISATION_SIZES = (20, 50, 100)


class GraphGenerationError(ValueError):
    """Raised when a category cannot produce a graph of the requested size."""

    def __init__(self, category, message: str):
        super().__init__(f"{GraphCategory(category).value}: {message}")
        self.category = GraphCategory(category)


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic 64-bit child seed for the stream addressed by ``path``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(p) for p in path))))


@dataclass(frozen=True)
class Graph:
    node_count: int
    edges: tuple[tuple[int, int], ...]
    category: GraphCategory
    seed: int = 0
    priorities: tuple[int, ...] | None = None
    weights: tuple[int, ...] | None = None  # aligned with edges
    has_self_loops: bool = False
    _adj: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "category", GraphCategory(self.category))
        object.__setattr__(self, "edges", tuple((int(u), int(v)) for u, v in self.edges))
        if self.priorities is not None:
            object.__setattr__(self, "priorities", tuple(int(p) for p in self.priorities))
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def proper_edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, v in self.edges if u != v]

    def adjacency(self, closed: bool = False) -> np.ndarray:
        """Boolean adjacency matrix; ``closed`` adds the diagonal for self-looped nodes."""
        key = "closed" if closed else "open"
        cache = self._adj
        if cache is None:
            cache = {}
            object.__setattr__(self, "_adj", cache)
        if key not in cache:
            a = np.zeros((self.node_count, self.node_count), dtype=bool)
            for u, v in self.edges:
                if u == v:
                    if closed:
                        a[u, u] = True
                else:
                    a[u, v] = a[v, u] = True
            a.setflags(write=False)
            cache[key] = a
        return cache[key]

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.node_count))
        for i, (u, v) in enumerate(self.edges):
            if self.weights is not None:
                g.add_edge(u, v, weight=self.weights[i])
            else:
                g.add_edge(u, v)
        return g

    def is_connected(self) -> bool:
        return nx.is_connected(self.to_networkx())

    def validate(self) -> None:
        """Check every structural invariant; raises ValueError on the first violation."""
        seen = set()
        for u, v in self.edges:
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise ValueError(f"edge ({u},{v}) out of range")
            if u == v and not self.has_self_loops:
                raise ValueError(f"self-loop on {u} without has_self_loops")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
        if self.priorities is not None:
            if len(self.priorities) != self.node_count:
                raise ValueError("priority count mismatch")
            if any(not 0 <= p <= MAX_PRIORITY for p in self.priorities):
                raise ValueError("priority out of range")
            for u, v in self.proper_edges:
                if self.priorities[u] == self.priorities[v]:
                    raise ValueError(f"adjacent nodes {u},{v} share priority")
        if self.weights is not None:
            if len(self.weights) != len(self.edges):
                raise ValueError("weight count mismatch")
            if len(set(self.weights)) != len(self.weights) or min(self.weights, default=1) < 1:
                raise ValueError("weights must be distinct and >= 1")
        if self.category is GraphCategory.FIXED_DEGREE5:
            if not np.all(self.degrees() == 5):
                raise ValueError("fixed-degree graph has a node of degree != 5")


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[Graph, ...]
    validation: tuple[Graph, ...]
    test: tuple[Graph, ...]
    algorithm: str = ""

    split_ratio = (10, 1, 1)

    def by_category(self, split: str) -> dict[GraphCategory, list[Graph]]:
        out: dict[GraphCategory, list[Graph]] = {}
        for g in getattr(self, split):
            out.setdefault(g.category, []).append(g)
        return out


# --------------------------------------------------------------------------
# generators


def _normalise(edges: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    return tuple(sorted({(min(u, v), max(u, v)) for u, v in edges if u != v}))


def _ladder(n: int) -> list[tuple[int, int]]:
    if n % 2:
        raise GraphGenerationError(GraphCategory.LADDER, f"needs an even node count, got {n}")
    k = n // 2
    edges = [(i, i + 1) for i in range(k - 1)]
    edges += [(k + i, k + i + 1) for i in range(k - 1)]
    edges += [(i, k + i) for i in range(k)]
    return edges


def _grid(n: int) -> list[tuple[int, int]]:
    rows = math.isqrt(n)
    cols = math.ceil(n / rows)
    edges = []
    for idx in range(n):
        r, c = divmod(idx, cols)
        if c + 1 < cols and idx + 1 < n:
            edges.append((idx, idx + 1))
        if idx + cols < n:
            edges.append((idx, idx + cols))
    return edges


def _tree(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    if n == 2:
        return [(0, 1)]
    prufer = rng.integers(0, n, size=n - 2).tolist()
    return list(nx.from_prufer_sequence(prufer).edges())


def er_probability(n: int) -> float:
    return min(math.log2(n) / n, 0.5)


def _gnp(nodes: Sequence[int], p: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    nodes = list(nodes)
    iu, ju = np.triu_indices(len(nodes), k=1)
    keep = rng.random(iu.shape[0]) < p
    return [(nodes[i], nodes[j]) for i, j in zip(iu[keep], ju[keep])]


def _blocks(n: int, parts: int) -> list[list[int]]:
    base, extra = divmod(n, parts)
    out, start = [], 0
    for b in range(parts):
        size = base + (1 if b < extra else 0)
        out.append(list(range(start, start + size)))
        start += size
    return out


def _community4(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    if n < 4:
        raise GraphGenerationError(GraphCategory.COMMUNITY4, "needs at least 4 nodes")
    blocks = _blocks(n, 4)
    edges = []
    for b in blocks:
        edges += _gnp(b, 0.7, rng)
    owner = np.repeat(np.arange(4), [len(b) for b in blocks])
    iu, ju = np.triu_indices(n, k=1)
    inter = owner[iu] != owner[ju]
    iu, ju = iu[inter], ju[inter]
    keep = rng.random(iu.shape[0]) < 0.01
    edges += list(zip(iu[keep].tolist(), ju[keep].tolist()))
    return edges


def caveman_shortcuts(n: int) -> int:
    return math.ceil(0.025 * n)


def _caveman4(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    if n < 4:
        raise GraphGenerationError(GraphCategory.CAVEMAN4, "needs at least 4 nodes")
    blocks = _blocks(n, 4)
    edges = []
    for b in blocks:
        clique = [(b[i], b[j]) for i in range(len(b)) for j in range(i + 1, len(b))]
        drop = rng.random(len(clique)) < 0.7
        edges += [e for e, d in zip(clique, drop) if not d]
    present = set(edges)
    wanted = caveman_shortcuts(n)
    added = 0
    while added < wanted:
        a, b = rng.choice(4, size=2, replace=False)
        u = int(rng.choice(blocks[a]))
        v = int(rng.choice(blocks[b]))
        key = (min(u, v), max(u, v))
        if key not in present:
            present.add(key)
            edges.append(key)
            added += 1
    return edges


def _barabasi_albert(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    m = int(rng.choice([4, 5]))
    if n <= m:
        raise GraphGenerationError(GraphCategory.BARABASI_ALBERT, f"needs more than {m} nodes, got {n}")
    return list(nx.barabasi_albert_graph(n, m, seed=int(rng.integers(2**31))).edges())


def _fixed_degree5(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    if n < 6 or (5 * n) % 2:
        raise GraphGenerationError(
            GraphCategory.FIXED_DEGREE5, f"a 5-regular graph needs an even n >= 6, got {n}")
    return list(nx.random_regular_graph(5, n, seed=int(rng.integers(2**31))).edges())


def generate_graph(category, n: int, seed: int) -> Graph:
    """Generate one graph of ``category`` on ``n`` nodes, deterministic in ``seed``."""
    category = GraphCategory(category)
    if n < 2:
        raise GraphGenerationError(category, f"needs at least 2 nodes, got {n}")
    rng = make_rng(seed)
    if category is GraphCategory.LADDER:
        edges = _ladder(n)
    elif category is GraphCategory.GRID2D:
        edges = _grid(n)
    elif category is GraphCategory.TREE:
        edges = _tree(n, rng)
    elif category is GraphCategory.ERDOS_RENYI:
        edges = _gnp(range(n), er_probability(n), rng)
    elif category is GraphCategory.BARABASI_ALBERT:
        edges = _barabasi_albert(n, rng)
    elif category is GraphCategory.COMMUNITY4:
        edges = _community4(n, rng)
    elif category is GraphCategory.CAVEMAN4:
        edges = _caveman4(n, rng)
    else:
        edges = _fixed_degree5(n, rng)
    return Graph(node_count=n, edges=_normalise(edges), category=category, seed=int(seed))


def assign_priorities(g: Graph, seed: int) -> Graph:
    """Uniform priorities in [0, 255] with adjacent nodes always distinct."""
    if g.priorities is not None:
        raise ValueError("graph already has priorities")
    rng = make_rng(seed)
    pr = rng.integers(0, MAX_PRIORITY + 1, size=g.node_count)
    edges = np.array(g.proper_edges, dtype=np.int64).reshape(-1, 2)
    for _ in range(PRIORITY_REPAIR_ROUNDS):
        clash = pr[edges[:, 0]] == pr[edges[:, 1]] if len(edges) else np.zeros(0, bool)
        if not clash.any():
            return replace(g, priorities=tuple(int(p) for p in pr))
        redo = np.unique(edges[clash, 1])
        pr[redo] = rng.integers(0, MAX_PRIORITY + 1, size=redo.shape[0])
    raise GraphGenerationError(
        g.category, f"no conflict-free priority assignment after {PRIORITY_REPAIR_ROUNDS} rounds")


def assign_weights(g: Graph, seed: int) -> Graph:
    """Distinct integer weights in [1, 2**16) for every edge."""
    if g.weights is not None:
        raise ValueError("graph already has weights")
    if g.has_self_loops:
        raise ValueError("self-looped graphs do not carry weights")
    rng = make_rng(seed)
    w = rng.choice(WEIGHT_UPPER - 1, size=g.edge_count, replace=False) + 1
    return replace(g, weights=tuple(int(x) for x in w))


def add_self_loops(g: Graph) -> Graph:
    if g.has_self_loops:
        raise ValueError("graph already has self-loops")
    if g.weights is not None:
        raise ValueError("weighted (Kruskal) graphs must not get self-loops")
    edges = tuple(g.edges) + tuple((i, i) for i in range(g.node_count))
    return replace(g, edges=edges, has_self_loops=True)


# --------------------------------------------------------------------------
# datasets

_ALGO_ID = {"bfs": 0, "coloring": 1, "kruskal": 2}
_SPLIT_ID = {"train": 0, "validation": 1, "test": 2}


def _check_algorithm(algorithm: str) -> str:
    if algorithm not in _ALGO_ID:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return algorithm


def prepare_graph(algorithm: str, category, n: int, seed: int) -> Graph:
    """Generate a graph and decorate it for ``algorithm`` (loops, priorities, weights)."""
    _check_algorithm(algorithm)
    if algorithm == "kruskal":
        for attempt in range(CONNECT_ATTEMPTS):
            sub = seed if attempt == 0 else derive_seed(seed, attempt)
            g = generate_graph(category, n, sub)
            if g.is_connected():
                return assign_weights(g, derive_seed(sub, 1))
        raise GraphGenerationError(category, f"no connected graph after {CONNECT_ATTEMPTS} attempts")
    g = generate_graph(category, n, seed)
    if algorithm == "coloring":
        from .algoexec import UnsatisfiableColoringError, run_trace

        for attempt in range(CONNECT_ATTEMPTS):
            colored = add_self_loops(assign_priorities(g, derive_seed(seed, 2, attempt)))
            try:
                run_trace("coloring", colored)
            except UnsatisfiableColoringError:
                continue
            return colored
        raise GraphGenerationError(category, "priorities never admitted a 5-coloring")
    return add_self_loops(g)


def _graphs(algorithm: str, n: int, count: int, seed: int, split_id: int) -> list[Graph]:
    out = []
    for ci, cat in enumerate(CATEGORIES_FOR[algorithm]):
        for i in range(count):
            out.append(prepare_graph(algorithm, cat, n, derive_seed(seed, _ALGO_ID[algorithm], split_id, ci, i)))
    return out


def make_dataset(algorithm: str, train_size: int | None = None,
                 counts: tuple[int, int, int] | None = None, seed: int = 0) -> DatasetSplit:
    """Train/validation/test graphs; ``counts`` are per category."""
    _check_algorithm(algorithm)
    n = DEFAULT_TRAIN_SIZE[algorithm] if train_size is None else train_size
    counts = DEFAULT_COUNTS[algorithm] if counts is None else tuple(counts)
    if len(counts) != 3 or min(counts) < 1:
        raise ValueError(f"counts must be three positive integers, got {counts}")
    return DatasetSplit(
        train=tuple(_graphs(algorithm, n, counts[0], seed, 0)),
        validation=tuple(_graphs(algorithm, n, counts[1], seed, 1)),
        test=tuple(_graphs(algorithm, n, counts[2], seed, 2)),
        algorithm=algorithm,
    )


def make_test_graphs(algorithm: str, n: int, count: int, seed: int) -> list[Graph]:
    """Strong-generalisation test graphs: ``count`` graphs in total at size ``n``,
    spread round-robin over the algorithm's categories."""
    _check_algorithm(algorithm)
    cats = CATEGORIES_FOR[algorithm]
    return [prepare_graph(algorithm, cats[i % len(cats)], n,
                          derive_seed(seed, _ALGO_ID[algorithm], 3, n, i))
            for i in range(count)]
