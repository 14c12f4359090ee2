# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see _pykernels for the reference semantics."""
import numpy as np
from libc.stdint cimport uint64_t, int64_t, uint8_t


def pack_rows(matrix):
    m = np.ascontiguousarray(matrix, dtype=np.uint8)
    if m.ndim != 2:
        raise ValueError("expected a 2-D concept matrix")
    if m.shape[1] > 64:
        raise ValueError("at most 64 concepts can be packed")
    cdef const uint8_t[:, ::1] mv = m
    cdef Py_ssize_t n = mv.shape[0], k = mv.shape[1], i, j
    out = np.zeros(n, dtype=np.uint64)
    cdef uint64_t[::1] ov = out
    cdef uint64_t acc
    for i in range(n):
        acc = 0
        for j in range(k):
            if mv[i, j]:
                acc |= (<uint64_t>1) << j
        ov[i] = acc
    return out


def match_labels(rows, masks, values, term_label, Py_ssize_t n_labels):
    cdef const uint64_t[::1] r = np.ascontiguousarray(rows, dtype=np.uint64)
    cdef const uint64_t[::1] mk = np.ascontiguousarray(masks, dtype=np.uint64)
    cdef const uint64_t[::1] vl = np.ascontiguousarray(values, dtype=np.uint64)
    cdef const int64_t[::1] lb = np.ascontiguousarray(term_label, dtype=np.int64)
    cdef Py_ssize_t n = r.shape[0], m = mk.shape[0], i, t
    first = np.full(n, -1, dtype=np.int64)
    count = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] fv = first
    cdef int64_t[::1] cv = count
    cdef uint64_t seen, bit
    for i in range(n):
        seen = 0
        for t in range(m):
            if (r[i] & mk[t]) == vl[t]:
                bit = (<uint64_t>1) << lb[t]
                if not (seen & bit):
                    seen |= bit
                    cv[i] += 1
                    if fv[i] < 0 or lb[t] < fv[i]:
                        fv[i] = lb[t]
    return first, count


def first_fitting_rule(rows, offsets, taus, masks, values):
    cdef const uint64_t[::1] r = np.ascontiguousarray(rows, dtype=np.uint64)
    cdef const int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const uint8_t[::1] tau = np.ascontiguousarray(taus, dtype=np.uint8)
    cdef const uint64_t[::1] mk = np.ascontiguousarray(masks, dtype=np.uint64)
    cdef const uint64_t[::1] vl = np.ascontiguousarray(values, dtype=np.uint64)
    cdef Py_ssize_t n_samples = off.shape[0] - 1, n_cand = mk.shape[0]
    cdef Py_ssize_t k, j, i
    cdef uint64_t mask, value
    cdef bint exists, ok
    for k in range(n_cand):
        mask = mk[k]
        value = vl[k]
        ok = True
        for j in range(n_samples):
            exists = False
            for i in range(off[j], off[j + 1]):
                if (r[i] & mask) == value:
                    exists = True
                    break
            if exists != (tau[j] != 0):
                ok = False
                break
        if ok:
            return k
    return -1
