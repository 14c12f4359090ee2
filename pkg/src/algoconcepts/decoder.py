"""Concept decoder: a small MLP from concept vectors to output labels.

Trained with softmax cross-entropy plus an L1 penalty on the first layer,
with an optional one-off concept-wise pruning of first-layer rows.  The
first layer is stored as ``W1[concept, hidden]``, so the weights leaving
concept ``j`` are row ``j``.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .graphgen import make_rng

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 30
    lambda_l1: float = 0.0
    prune_epoch: int | None = None
    hidden: int = 16  # 0 selects the linear variant
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.prune_epoch is not None and not 0 <= self.prune_epoch < self.epochs:
            raise ValueError("prune_epoch must be < epochs")
        if self.lambda_l1 < 0:
            raise ValueError("lambda_l1 must be non-negative")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")


@dataclass(frozen=True)
class LabeledConceptSet:
    concepts: np.ndarray  # rows x |C| booleans
    labels: np.ndarray
    algorithm: str = ""
    n_labels: int | None = None

    def __post_init__(self):
        c = np.asarray(self.concepts, dtype=bool)
        y = np.asarray(self.labels, dtype=np.int64)
        if c.ndim != 2 or y.shape != (c.shape[0],):
            raise ValueError("concepts must be rows x concepts with one label per row")
        object.__setattr__(self, "concepts", c)
        object.__setattr__(self, "labels", y)
        if self.n_labels is None:
            object.__setattr__(self, "n_labels", int(y.max()) + 1 if y.size else 0)
        if y.size and (y.min() < 0 or y.max() >= self.n_labels):
            raise ValueError("label outside the algorithm's label range")

    def __len__(self):
        return self.labels.shape[0]


@dataclass
class DecoderModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray | None = None
    b2: np.ndarray | None = None
    pruned: np.ndarray | None = None  # True where a concept row was zeroed
    schema: str = ""
    config: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.pruned is None:
            self.pruned = np.zeros(self.W1.shape[0], dtype=bool)

    @property
    def n_concepts(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden(self) -> int:
        return 0 if self.W2 is None else self.W1.shape[1]

    @property
    def n_labels(self) -> int:
        return self.W1.shape[1] if self.W2 is None else self.W2.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        p = {"W1": self.W1, "b1": self.b1}
        if self.W2 is not None:
            p.update(W2=self.W2, b2=self.b2)
        return p


def init_model(n_concepts: int, n_labels: int, hidden: int, rng: np.random.Generator) -> DecoderModel:
    if hidden:
        W1 = rng.normal(0.0, np.sqrt(2.0 / n_concepts), size=(n_concepts, hidden))
        W2 = rng.normal(0.0, np.sqrt(1.0 / hidden), size=(hidden, n_labels))
        return DecoderModel(W1, np.zeros(hidden), W2, np.zeros(n_labels))
    W1 = rng.normal(0.0, np.sqrt(1.0 / n_concepts), size=(n_concepts, n_labels))
    return DecoderModel(W1, np.zeros(n_labels))


def scores(model: DecoderModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    z = X @ model.W1 + model.b1
    if model.W2 is None:
        return z
    return np.maximum(z, 0.0) @ model.W2 + model.b2


def loss_and_grads(params: dict[str, np.ndarray], X: np.ndarray, y: np.ndarray,
                   lambda_l1: float = 0.0) -> tuple[float, dict[str, np.ndarray]]:
    """Mean softmax cross-entropy + lambda * ||W1||_1 and its gradients.

    The subgradient of |w| at exactly zero is taken as 0.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    W1, b1 = params["W1"], params["b1"]
    z1 = X @ W1 + b1
    two_layer = "W2" in params
    if two_layer:
        h = np.maximum(z1, 0.0)
        logits = h @ params["W2"] + params["b2"]
    else:
        logits = z1
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), y].mean() + lambda_l1 * np.abs(W1).sum()
    d = np.exp(logp)
    d[np.arange(n), y] -= 1.0
    d /= n
    grads = {}
    if two_layer:
        grads["W2"] = h.T @ d
        grads["b2"] = d.sum(axis=0)
        d = (d @ params["W2"].T) * (z1 > 0)
    grads["W1"] = X.T @ d + lambda_l1 * np.sign(W1)
    grads["b1"] = d.sum(axis=0)
    return float(loss), grads


def prune_firstlayer(W1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Zero every concept row whose L1 norm is below half the largest one.

    Returns the pruned copy and the boolean pruned-row mask.
    """
    W1 = np.asarray(W1, dtype=float)
    if not np.all(np.isfinite(W1)):
        raise ValueError("first-layer weights must be finite")
    norms = np.abs(W1).sum(axis=1)
    pruned = norms < norms.max() / 2.0
    out = W1.copy()
    out[pruned] = 0.0
    return out, pruned


def accuracy(model: DecoderModel, X, y) -> float:
    return float((predict_labels(model, X) == np.asarray(y)).mean())


def train_decoder(data: LabeledConceptSet, cfg: TrainConfig = TrainConfig(),
                  n_labels: int | None = None) -> DecoderModel:
    """Mini-batch Adam on cross-entropy + L1, pruning once at ``cfg.prune_epoch``."""
    if len(data) == 0:
        raise TrainingError("cannot train on an empty concept set")
    L = n_labels or data.n_labels
    missing = sorted(set(range(L)) - set(np.unique(data.labels).tolist()))
    if missing:
        raise TrainingError(f"labels {missing} never occur in the training data")
    rng = make_rng(cfg.seed, 11)
    X = data.concepts.astype(float)
    y = data.labels
    model = init_model(X.shape[1], L, cfg.hidden, rng)
    params = model.params()
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(p) for k, p in params.items()}
    step = 0
    pruned = np.zeros(X.shape[1], dtype=bool)
    history = []
    for epoch in range(cfg.epochs):
        if cfg.prune_epoch is not None and epoch == cfg.prune_epoch:
            params["W1"][...], pruned = prune_firstlayer(params["W1"])
            log.info("epoch %d: pruned concepts %s", epoch, np.flatnonzero(pruned).tolist())
        order = rng.permutation(X.shape[0])
        total = 0.0
        for start in range(0, X.shape[0], cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(params, X[idx], y[idx], cfg.lambda_l1)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, step {step}: {loss}")
            step += 1
            for k, g in grads.items():
                m[k] = cfg.beta1 * m[k] + (1 - cfg.beta1) * g
                v[k] = cfg.beta2 * v[k] + (1 - cfg.beta2) * g * g
                mhat = m[k] / (1 - cfg.beta1 ** step)
                vhat = v[k] / (1 - cfg.beta2 ** step)
                params[k] -= cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.eps)
            params["W1"][pruned] = 0.0
            total += loss * idx.shape[0]
        model.pruned = pruned.copy()
        history.append({"epoch": epoch, "loss": total / X.shape[0], "accuracy": accuracy(model, X, y)})
    model.pruned = pruned
    model.schema = data.algorithm
    model.config = asdict(cfg)
    model.history = history
    return model


def predict_labels(model: DecoderModel, concepts) -> np.ndarray:
    X = np.atleast_2d(np.asarray(concepts, dtype=float))
    if X.shape[1] != model.n_concepts:
        raise ValueError(f"expected {model.n_concepts} concepts, got {X.shape[1]}")
    return scores(model, X).argmax(axis=1)  # first maximum -> smaller label on ties


def predict_label(model: DecoderModel, concepts) -> int:
    c = np.asarray(concepts)
    if c.ndim != 1:
        raise ValueError("predict_label takes a single concept vector")
    return int(predict_labels(model, c)[0])


def concept_relevance(model: DecoderModel) -> np.ndarray:
    """L1 norm of the first-layer weights leaving each concept."""
    return np.abs(model.W1).sum(axis=1)


def relevant_concepts(model: DecoderModel) -> tuple[int, ...]:
    return tuple(int(j) for j in np.flatnonzero(~model.pruned))


def corrupt_concepts(concepts, flip_prob: float, seed: int) -> np.ndarray:
    """Flip each boolean independently with probability ``flip_prob``."""
    if not 0.0 <= flip_prob < 0.5:
        raise ValueError("flip_prob must lie in [0, 0.5)")
    c = np.asarray(concepts, dtype=bool)
    if flip_prob == 0.0:
        return c.copy()
    flips = make_rng(seed, 13).random(c.shape) < flip_prob
    return c ^ flips
