"""Pure-Python/numpy fallback for the compiled kernel core.

Selected automatically when the Cython extension is unavailable; also kept
as the reference side of the kernel parity tests and the benchmark.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def gather_reduce(table: np.ndarray, indices: np.ndarray, seg_starts: np.ndarray) -> np.ndarray:
    """Sum table rows per segment: segment s covers
    ``indices[seg_starts[s]:seg_starts[s+1]]``.  Accumulates in float64."""
    table = np.asarray(table)
    indices = np.asarray(indices, dtype=np.int64)
    starts = np.asarray(seg_starts, dtype=np.int64)
    segments = len(starts) - 1
    out = np.zeros((segments, table.shape[1]), dtype=np.float64)
    for s in range(segments):
        lo, hi = starts[s], starts[s + 1]
        if hi > lo:
            out[s] = table[indices[lo:hi]].sum(axis=0, dtype=np.float64)
    return out


class LruCache:
    """Set-associative LRU state over line IDs (addresses already divided by
    the line size).  Replacement evicts the smallest timestamp; empty ways
    carry timestamp 0 so they fill first, lowest way index winning ties."""

    def __init__(self, num_sets: int, ways: int):
        self.num_sets = int(num_sets)
        self.ways = int(ways)
        self._tags = [[-1] * self.ways for _ in range(self.num_sets)]
        self._stamps = [[0] * self.ways for _ in range(self.num_sets)]
        self._clock = 0

    def run(self, lines) -> tuple[int, int]:
        """Feed line IDs through the cache; returns (hits, misses)."""
        hits = 0
        misses = 0
        num_sets = self.num_sets
        tags = self._tags
        stamps = self._stamps
        clock = self._clock
        for line in np.asarray(lines, dtype=np.int64).tolist():
            idx = line % num_sets
            tag_row = tags[idx]
            stamp_row = stamps[idx]
            clock += 1
            try:
                way = tag_row.index(line)
                hits += 1
            except ValueError:
                misses += 1
                way = stamp_row.index(min(stamp_row))
                tag_row[way] = line
            stamp_row[way] = clock
        self._clock = clock
        return hits, misses
