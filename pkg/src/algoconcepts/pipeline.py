"""End-to-end pipelines: data, decoder relevance, rule extraction, replay, metrics."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

from .algoexec import (TERMINATING, ReplayStats, StepCapExceeded, Trace, execute_with_decoder,
                       execute_with_rules, first_divergence, labeled_rows, run_trace, schema_for,
                       traces_equal)
from .decoder import DecoderModel, LabeledConceptSet, TrainConfig, relevant_concepts, train_decoder
from .evalmetrics import MetricsReport, build_report, compute_metrics
from .graphgen import (DEFAULT_COUNTS, DEFAULT_TRAIN_SIZE, GENERALISATION_SIZES, Graph, derive_seed,
                       make_dataset, make_test_graphs)
from .logic import DnfFormula, LogicConfig, extract_formula
from .termination import TerminationRule, collect_termination_samples, enumerate_rule

log = logging.getLogger(__name__)

ALGORITHMS = ("bfs", "coloring", "kruskal")

# Coloring needs the sparsity penalty and a mid-training prune to drop the
# concept that never matters; BFS and Kruskal keep every concept.
TRAIN_PRESETS = {
    "bfs": dict(epochs=30, lambda_l1=0.0, prune_epoch=None),
    "coloring": dict(epochs=100, lambda_l1=1e-3, prune_epoch=50),
    "kruskal": dict(epochs=5, lambda_l1=0.0, prune_epoch=None),
}


def default_train_config(algorithm: str, seed: int, **overrides) -> TrainConfig:
    kw = dict(TRAIN_PRESETS[algorithm], seed=seed)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**kw)


@dataclass(frozen=True)
class PipelineConfig:
    algorithm: str
    seed: int
    train_size: int | None = None
    counts: tuple[int, int, int] | None = None
    test_sizes: tuple[int, ...] = GENERALISATION_SIZES
    test_count: int = 30
    train: TrainConfig | None = None
    logic: LogicConfig = field(default_factory=LogicConfig)
    noise: float = 0.0
    out: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not 0.0 <= self.noise < 0.5:
            raise ValueError("noise must lie in [0, 0.5)")
        if self.train is None:
            object.__setattr__(self, "train", default_train_config(self.algorithm, self.seed))

    @property
    def resolved_train_size(self) -> int:
        return DEFAULT_TRAIN_SIZE[self.algorithm] if self.train_size is None else self.train_size

    @property
    def resolved_counts(self) -> tuple[int, int, int]:
        return DEFAULT_COUNTS[self.algorithm] if self.counts is None else tuple(self.counts)

    def to_json(self) -> dict:
        d = asdict(self)
        d["train_size"] = self.resolved_train_size
        d["counts"] = list(self.resolved_counts)
        d["test_sizes"] = list(self.test_sizes)
        return d


def traces_for(algorithm: str, graphs: Sequence[Graph]) -> list[Trace]:
    return [run_trace(algorithm, g) for g in graphs]


def fit_relevance(algorithm: str, traces: Sequence[Trace], cfg: TrainConfig) -> DecoderModel:
    X, y = labeled_rows(traces)
    data = LabeledConceptSet(X, y, algorithm, schema_for(algorithm).n_labels)
    return train_decoder(data, cfg)


def extract_rules(algorithm: str, traces: Sequence[Trace], relevant: Sequence[int] | None = None,
                  logic: LogicConfig = LogicConfig()) -> dict[int, DnfFormula]:
    """One simplified DNF per output label; labels never seen get ``false``."""
    X, y = labeled_rows(traces)
    schema = schema_for(algorithm)
    out = {}
    for label in range(schema.n_labels):
        if not (y == label).any():
            log.warning("label %r never occurs in the training traces", schema.label_names[label])
            out[label] = DnfFormula.false(schema.width)
            continue
        out[label] = extract_formula(X, y, label, relevant=relevant, dont_care=logic.dont_care,
                                     threshold=logic.threshold, max_conflict=logic.max_conflict)
    return out


def learn_termination(algorithm: str, traces: Sequence[Trace],
                      relevant: Sequence[int] | None = None) -> TerminationRule | None:
    if algorithm not in TERMINATING:
        return None
    return enumerate_rule(collect_termination_samples(traces), restrict=relevant, schema=algorithm)


@dataclass
class ReplayCheck:
    size: int
    index: int
    equal: bool
    divergence: dict | None = None


def check_replay(algorithm: str, graphs: Sequence[Graph], label_rules: Mapping[int, DnfFormula],
                 term_rule: TerminationRule | None) -> list[ReplayCheck]:
    """Replay each graph with the rules and compare with the true trace."""
    out = []
    for i, g in enumerate(graphs):
        truth = run_trace(algorithm, g)
        stats = ReplayStats()
        try:
            pred = execute_with_rules(g, algorithm, label_rules, term_rule, strict=False, stats=stats)
        except StepCapExceeded as exc:
            pred = exc.partial
        ok = traces_equal(pred, truth) and stats.ambiguous == 0 and stats.unmatched == 0
        div = first_divergence(pred, truth)
        if div is None and not ok:
            div = {"field": "rule_match", "ambiguous": stats.ambiguous, "unmatched": stats.unmatched}
        out.append(ReplayCheck(g.node_count, i, ok, div))
    return out


def evaluate(algorithm: str, graphs_by_size: Mapping[int, Sequence[Graph]],
             label_rules: Mapping[int, DnfFormula] | None, term_rule: TerminationRule | None,
             model: DecoderModel | None = None, noise: float = 0.0, seed: int = 0,
             modes: Sequence[str] = ("formula",)) -> MetricsReport:
    """Score formula and/or decoder replays (optionally on corrupted concepts) against truth."""
    results = []
    ambiguous = unmatched = 0
    for size, graphs in sorted(graphs_by_size.items()):
        for i, g in enumerate(graphs):
            truth = run_trace(algorithm, g)
            noise_seed = derive_seed(seed, 7, size, i)
            for mode in modes:
                try:
                    if mode == "formula":
                        stats = ReplayStats()
                        pred = execute_with_rules(g, algorithm, label_rules, term_rule, strict=False,
                                                  stats=stats, flip_prob=noise, seed=noise_seed)
                        ambiguous += stats.ambiguous
                        unmatched += stats.unmatched
                    elif mode == "decoder":
                        if model is None:
                            raise ValueError("decoder mode needs a trained model")
                        pred = execute_with_decoder(g, algorithm, model, term_rule,
                                                    flip_prob=noise, seed=noise_seed)
                    else:
                        raise ValueError(f"unknown mode {mode!r}")
                except StepCapExceeded as exc:
                    pred = exc.partial
                results.append((size, compute_metrics(pred, truth, mode)))
    report = build_report(algorithm, results)
    report.notes.update(noise=noise, ambiguous_units=ambiguous, unmatched_units=unmatched)
    return report


@dataclass
class ReproResult:
    config: PipelineConfig
    model: DecoderModel
    relevant: tuple[int, ...]
    label_rules: dict[int, DnfFormula]
    term_rule: TerminationRule | None
    report: MetricsReport
    replay: list[ReplayCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.equal for r in self.replay)


def run_repro(cfg: PipelineConfig) -> ReproResult:
    """Generate data, fit the decoder, extract rules, replay on larger graphs and score."""
    alg = cfg.algorithm
    ds = make_dataset(alg, cfg.resolved_train_size, cfg.resolved_counts, cfg.seed)
    train = traces_for(alg, ds.train)
    model = fit_relevance(alg, train, cfg.train)
    relevant = relevant_concepts(model)
    log.info("relevant concepts: %s", [schema_for(alg).names[j] for j in relevant])
    rules = extract_rules(alg, train, relevant, cfg.logic)
    term = learn_termination(alg, train)
    tests = {n: make_test_graphs(alg, n, cfg.test_count, derive_seed(cfg.seed, 99)) for n in cfg.test_sizes}
    checks = [c for n, gs in sorted(tests.items()) for c in check_replay(alg, gs, rules, term)]
    report = evaluate(alg, tests, rules, term, model, cfg.noise, cfg.seed, modes=("decoder", "formula"))
    return ReproResult(replace(cfg), model, relevant, rules, term, report, checks)
