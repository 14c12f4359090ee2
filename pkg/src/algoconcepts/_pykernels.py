"""Pure-Python (numpy) implementations of the hot kernels.

These mirror ``_ckernels.pyx`` exactly and are used when the compiled
extension is unavailable or ``ALGOCONCEPTS_PURE_PYTHON`` is set.
Concept rows are packed into uint64 words, bit ``j`` holding concept ``j``.
"""
from __future__ import annotations

import numpy as np


def pack_rows(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=bool)
    if m.ndim != 2:
        raise ValueError("expected a 2-D concept matrix")
    if m.shape[1] > 64:
        raise ValueError("at most 64 concepts can be packed")
    weights = np.left_shift(np.uint64(1), np.arange(m.shape[1], dtype=np.uint64))
    return (m.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)


def match_labels(rows, masks, values, term_label, n_labels):
    """For each packed row return (first matching label, number of labels matched).

    ``first`` is -1 when no term matches.
    """
    rows = np.asarray(rows, dtype=np.uint64)
    masks = np.asarray(masks, dtype=np.uint64)
    values = np.asarray(values, dtype=np.uint64)
    term_label = np.asarray(term_label, dtype=np.int64)
    hit = np.zeros((rows.shape[0], n_labels), dtype=bool)
    for mask, value, label in zip(masks, values, term_label):
        hit[:, label] |= (rows & mask) == value
    count = hit.sum(axis=1).astype(np.int64)
    first = np.where(count > 0, hit.argmax(axis=1), -1).astype(np.int64)
    return first, count


def first_fitting_rule(rows, offsets, taus, masks, values) -> int:
    """Index of the first candidate (mask, value) satisfying the existential
    biconditional on every sample, or -1.

    Sample ``j`` owns ``rows[offsets[j]:offsets[j+1]]`` (non-empty).
    """
    rows = np.asarray(rows, dtype=np.uint64)
    offsets = np.asarray(offsets, dtype=np.int64)
    taus = np.asarray(taus, dtype=bool)
    starts = offsets[:-1]
    for k, (mask, value) in enumerate(zip(np.asarray(masks, dtype=np.uint64),
                                          np.asarray(values, dtype=np.uint64))):
        match = (rows & mask) == value
        exists = np.logical_or.reduceat(match, starts)
        if np.array_equal(exists, taus):
            return k
    return -1
