"""Brute-force search for existential termination rules.

A rule (I, T) says: keep iterating iff some unit's post-update concepts
agree with assignment T on every index in I.  Candidates are tried by
increasing |I|, then lexicographic I, then lexicographic T.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .algoexec import TERMINATING, Trace

log = logging.getLogger(__name__)


class NoRuleFound(LookupError):
    pass


class DegenerateSamplesError(ValueError):
    pass


@dataclass(frozen=True)
class TerminationSample:
    unique_concepts: frozenset[tuple[int, ...]]
    tau: bool

    def __post_init__(self):
        if not self.unique_concepts:
            raise ValueError("a termination sample needs at least one concept vector")


@dataclass(frozen=True)
class TerminationRule:
    indices: tuple[int, ...]
    assignment: Mapping[int, int]
    schema: str = ""

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(sorted(int(i) for i in self.indices)))
        object.__setattr__(self, "assignment", {int(k): int(v) for k, v in self.assignment.items()})
        if set(self.assignment) != set(self.indices):
            raise ValueError("assignment domain must equal the index set")

    def __hash__(self):
        return hash((self.indices, tuple(sorted(self.assignment.items())), self.schema))

    @property
    def mask(self) -> int:
        return sum(1 << i for i in self.indices)

    @property
    def value(self) -> int:
        return sum(1 << i for i, v in self.assignment.items() if v)

    def render(self, schema_obj=None, abbreviate: bool = False) -> str:
        unit = schema_obj.unit if schema_obj is not None else "u"
        if schema_obj is None:
            names = [f"c{i}" for i in range(max(self.indices, default=-1) + 1)]
        else:
            names = schema_obj.abbreviations if abbreviate else schema_obj.names
        body = " ∧ ".join(("" if self.assignment[i] else "¬") + f"{names[i]}({unit})" for i in self.indices)
        return f"continue ⟺ ∃{unit}. {body or 'true'}"


def samples_from_trace(trace: Trace) -> list[TerminationSample]:
    out = []
    for step in trace.steps:
        uniq = frozenset(tuple(int(x) for x in row) for row in np.asarray(step.post_concepts, dtype=np.int64))
        out.append(TerminationSample(uniq, bool(step.continue_flag)))
    return out


def collect_termination_samples(traces: Iterable[Trace]) -> list[TerminationSample]:
    """One sample per step: the step's distinct post-update concept vectors and its stop flag."""
    out: list[TerminationSample] = []
    for tr in traces:
        if tr.algorithm not in TERMINATING:
            raise ValueError(f"termination is not learned for {tr.algorithm}: it runs a fixed |E| steps")
        out.extend(samples_from_trace(tr))
    return out


def _pack(samples: Sequence[TerminationSample]):
    rows, offsets, taus = [], [0], []
    for s in samples:
        for vec in sorted(s.unique_concepts):
            rows.append(sum(1 << i for i, b in enumerate(vec) if b))
        offsets.append(len(rows))
        taus.append(s.tau)
    return (np.array(rows, dtype=np.uint64), np.array(offsets, dtype=np.int64),
            np.array(taus, dtype=np.uint8))


def candidate_rules(width: int, allowed: Sequence[int] | None = None):
    """(indices, assignment) pairs in search order."""
    pool = sorted(range(width) if allowed is None else set(allowed))
    for k in range(1, len(pool) + 1):
        for idx in itertools.combinations(pool, k):
            for bits in itertools.product((0, 1), repeat=k):
                yield idx, dict(zip(idx, bits))


def fits(rule: TerminationRule, samples: Sequence[TerminationSample]) -> bool:
    return all(eval_rule(rule, s.unique_concepts) == s.tau for s in samples)


def enumerate_rule(samples: Sequence[TerminationSample], *, restrict: Sequence[int] | None = None,
                   schema: str = "") -> TerminationRule:
    """Smallest (I, T) satisfying the existential biconditional on all samples.

    ``restrict`` limits the candidate indices (e.g. to decoder-relevant concepts).
    """
    if not samples:
        raise DegenerateSamplesError("no termination samples")
    taus = {s.tau for s in samples}
    if taus != {True, False}:
        which = "continue" if True in taus else "stop"
        raise DegenerateSamplesError(f"every sample says {which}; any rule would fit vacuously")
    widths = {len(v) for s in samples for v in s.unique_concepts}
    if len(widths) != 1:
        raise ValueError("concept vectors of mixed width")
    width = widths.pop()
    cands = list(candidate_rules(width, restrict))
    masks = np.array([sum(1 << i for i in idx) for idx, _ in cands], dtype=np.uint64)
    values = np.array([sum(1 << i for i, v in t.items() if v) for _, t in cands], dtype=np.uint64)
    rows, offsets, tau_arr = _pack(samples)
    k = int(_kernels.first_fitting_rule(rows, offsets, tau_arr, masks, values))
    if k < 0:
        raise NoRuleFound(f"no existential rule over {width} concepts fits {len(samples)} samples")
    rule = TerminationRule(cands[k][0], cands[k][1], schema)
    assert fits(rule, samples), "kernel returned a rule violating the biconditional"
    size = len(rule.indices)
    end = k + 1
    while end < len(cands) and len(cands[end][0]) == size:
        end += 1
    rivals, start = [], k + 1
    while start < end:
        hit = int(_kernels.first_fitting_rule(rows, offsets, tau_arr, masks[start:end], values[start:end]))
        if hit < 0:
            break
        rivals.append(cands[start + hit])
        start += hit + 1
    if rivals:
        log.info("%d other rule(s) of size %d also fit; keeping the first in order: %s",
                 len(rivals), size, [dict(t) for _, t in rivals])
    return rule


def eval_rule(rule: TerminationRule, step_concepts) -> bool:
    """True iff some concept vector matches the assignment on every index of the rule."""
    if not rule.indices:
        return True
    vecs = list(step_concepts) if not isinstance(step_concepts, np.ndarray) else step_concepts
    if len(vecs) == 0:
        return False
    arr = np.asarray(vecs, dtype=bool)
    if rule.indices and arr.shape[1] <= max(rule.indices):
        raise ValueError(f"concept width {arr.shape[1]} too small for rule indices {rule.indices}")
    idx = list(rule.indices)
    want = np.array([rule.assignment[i] for i in idx], dtype=bool)
    return bool((arr[:, idx] == want).all(axis=1).any())
