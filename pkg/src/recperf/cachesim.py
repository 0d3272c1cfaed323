"""Trace-driven, set-associative LRU cache simulator.

Models a single last-level cache fed by the engine's gather byte-address
trace.  Addresses are flat model addresses (tables packed from zero), lines
are the unit of transfer, and the hot per-access loop runs on the compiled
kernel backend when available.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .engine.sparse import LINE_BYTES, line_count, table_base_addresses
from .textcfg import ConfigError
from .workload import QueryBatch, config_of


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class CacheConfig:
    """Geometry of the simulated cache; everything must be a power of two."""

    capacity_bytes: int
    associativity: int
    line_bytes: int = 64

    def __post_init__(self):
        for key in ("capacity_bytes", "associativity", "line_bytes"):
            if not _is_pow2(getattr(self, key)):
                raise ConfigError(f"{key}: must be a power of two, got {getattr(self, key)}")
        if self.capacity_bytes % (self.associativity * self.line_bytes):
            raise ConfigError(
                f"capacity {self.capacity_bytes} not divisible by associativity x line "
                f"({self.associativity} x {self.line_bytes})")

    @property
    def num_sets(self) -> int:
        return self.capacity_bytes // (self.associativity * self.line_bytes)

    @property
    def num_lines(self) -> int:
        return self.capacity_bytes // self.line_bytes


@dataclass(frozen=True)
class CacheStats:
    accesses: int
    hits: int
    misses: int
    miss_rate: float
    mpka: float  # misses per thousand accesses

    @classmethod
    def from_counts(cls, accesses: int, hits: int, misses: int) -> "CacheStats":
        if hits + misses != accesses:
            raise ValueError(f"{hits} hits + {misses} misses != {accesses} accesses")
        rate = misses / accesses if accesses else 0.0
        return cls(accesses=accesses, hits=hits, misses=misses,
                   miss_rate=rate, mpka=1000.0 * rate)


class CacheSim:
    """Stateful simulator: drive with traces, read stats, reset between
    measurement windows while keeping the cache contents warm."""

    def __init__(self, config: CacheConfig):
        self.config = config
        self._cache = _kernels.LruCache(config.num_sets, config.associativity)
        self._accesses = 0
        self._hits = 0
        self._misses = 0

    def run(self, addresses) -> None:
        addresses = np.asarray(addresses, dtype=np.int64)
        if addresses.size == 0:
            return
        if addresses.min() < 0:
            raise ConfigError("trace contains a negative address")
        hits, misses = self._cache.run(addresses // self.config.line_bytes)
        self._accesses += int(addresses.size)
        self._hits += hits
        self._misses += misses

    def reset_stats(self) -> None:
        """Zero the counters without flushing cache contents."""
        self._accesses = self._hits = self._misses = 0

    @property
    def stats(self) -> CacheStats:
        return CacheStats.from_counts(self._accesses, self._hits, self._misses)


def simulate(trace, config: CacheConfig) -> CacheStats:
    """One cold pass over the trace."""
    sim = CacheSim(config)
    sim.run(np.asarray(trace, dtype=np.int64))
    return sim.stats


def simulate_steady(trace, config: CacheConfig, warm_passes: int = 1) -> CacheStats:
    """Warm the cache with ``warm_passes`` replays of the trace, then measure
    one more pass.  This mirrors measuring a server after warm-up: a working
    set that fits in the cache scores a zero miss rate."""
    if warm_passes < 0:
        raise ConfigError("warm_passes must be >= 0")
    trace = np.asarray(trace, dtype=np.int64)
    sim = CacheSim(config)
    for _ in range(warm_passes):
        sim.run(trace)
    sim.reset_stats()
    sim.run(trace)
    return sim.stats


def trace_from_batch(model_or_config, batch: QueryBatch) -> np.ndarray:
    """Line-aligned byte addresses touched by the batch's gathers, in the
    exact order the engine's gather stream issues them."""
    cfg = config_of(model_or_config)
    bases = table_base_addresses(cfg)
    lines = line_count(cfg)
    indices = np.asarray(batch.indices, dtype=np.int64)
    if indices.size == 0:
        return np.empty(0, dtype=np.int64)
    if indices.min() < 0 or indices.max() >= cfg.rows_per_table:
        raise ConfigError(f"batch index outside [0, {cfg.rows_per_table})")
    starts = bases[np.newaxis, :, np.newaxis] + indices * cfg.row_bytes  # (B, T, L)
    first_line = (starts // LINE_BYTES) * LINE_BYTES
    offsets = np.arange(lines, dtype=np.int64) * LINE_BYTES
    return (first_line.reshape(-1)[:, np.newaxis] + offsets).reshape(-1)


# ---------------------------------------------------------------------------
# Trace files: one hex byte-address per line.
# ---------------------------------------------------------------------------

def save_trace(path: str | Path, addresses) -> None:
    with open(path, "w") as fh:
        for addr in np.asarray(addresses, dtype=np.int64).tolist():
            fh.write(f"{addr:#x}\n")


def load_trace(path: str | Path) -> np.ndarray:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                out.append(int(text, 16))
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad hex address {text!r}") from exc
    return np.asarray(out, dtype=np.int64)
