# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the two loop-bound hot paths: per-segment embedding
gather/reduce and the trace-driven LRU cache.  Semantics must match
``pyref`` exactly; the parity tests enforce it."""

import numpy as np

cimport cython

BACKEND = "compiled"


def gather_reduce(const float[:, ::1] table,
                  const long long[::1] indices,
                  const long long[::1] seg_starts):
    """Sum table rows per segment in ascending position order (float64)."""
    cdef Py_ssize_t segments = seg_starts.shape[0] - 1
    cdef Py_ssize_t dim = table.shape[1]
    out_arr = np.zeros((segments, dim), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t s, j, d
    cdef long long row
    with nogil:
        for s in range(segments):
            for j in range(seg_starts[s], seg_starts[s + 1]):
                row = indices[j]
                for d in range(dim):
                    out[s, d] += table[row, d]
    return out_arr


cdef class LruCache:
    """Set-associative LRU over line IDs; see pyref.LruCache for semantics."""

    cdef long long[:, ::1] _tags
    cdef long long[:, ::1] _stamps
    cdef long long _clock
    cdef readonly Py_ssize_t num_sets
    cdef readonly Py_ssize_t ways

    def __init__(self, num_sets, ways):
        self.num_sets = num_sets
        self.ways = ways
        self._tags = np.full((num_sets, ways), -1, dtype=np.int64)
        self._stamps = np.zeros((num_sets, ways), dtype=np.int64)
        self._clock = 0

    def run(self, lines):
        lines_arr = np.ascontiguousarray(lines, dtype=np.int64)
        cdef const long long[::1] view = lines_arr
        cdef Py_ssize_t n = view.shape[0]
        cdef Py_ssize_t num_sets = self.num_sets
        cdef Py_ssize_t ways = self.ways
        cdef long long[:, ::1] tags = self._tags
        cdef long long[:, ::1] stamps = self._stamps
        cdef long long clock = self._clock
        cdef long long hits = 0, misses = 0
        cdef long long line, best_stamp
        cdef Py_ssize_t i, s, w, way
        with nogil:
            for i in range(n):
                line = view[i]
                s = line % num_sets
                clock += 1
                way = -1
                for w in range(ways):
                    if tags[s, w] == line:
                        way = w
                        break
                if way >= 0:
                    hits += 1
                else:
                    misses += 1
                    way = 0
                    best_stamp = stamps[s, 0]
                    for w in range(1, ways):
                        if stamps[s, w] < best_stamp:
                            best_stamp = stamps[s, w]
                            way = w
                    tags[s, way] = line
                stamps[s, way] = clock
        self._clock = clock
        return int(hits), int(misses)
