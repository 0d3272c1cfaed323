"""Sparse-side functional model: base pointer registers, index staging,
gather streaming, and on-the-fly reduction.

Addresses live in a flat model address space: tables are packed from zero,
each base aligned to the 64-byte line size, with the index array, MLP
weights and dense features laid out after them.  The gather byte-address
trace drives the cache simulator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .. import _kernels
from ..workload import INDEX_BYTES, Model, QueryBatch, config_of

LINE_BYTES = 64


class EngineError(ValueError):
    """Inconsistent engine inputs (missing structures, bad indices, ...)."""


def _align_line(n: int) -> int:
    return (n + LINE_BYTES - 1) // LINE_BYTES * LINE_BYTES


def line_count(config) -> int:
    """64-byte lines per embedding row."""
    cfg = config_of(config)
    return -(-cfg.row_bytes // LINE_BYTES)


def table_base_addresses(config) -> np.ndarray:
    """Line-aligned base address of each table in the flat address space."""
    cfg = config_of(config)
    stride = _align_line(cfg.rows_per_table * cfg.row_bytes)
    return np.arange(cfg.num_tables, dtype=np.int64) * stride


@dataclass(frozen=True)
class BasePointerRegs:
    """The four handles copied in during the one-time boot handshake."""

    model: Model
    batch: QueryBatch
    table_bases: np.ndarray
    index_base: int
    weight_base: int
    dense_base: int


@dataclass(frozen=True)
class SparseIndexBuffer:
    """One bounded fill of the staged-index SRAM."""

    values: np.ndarray   # flat row IDs, sample-major then table then position
    capacity: int

    def __post_init__(self):
        if len(self.values) > self.capacity:
            raise EngineError(
                f"index buffer overfilled: {len(self.values)} > capacity {self.capacity}")


@dataclass(frozen=True)
class GatherRequest:
    """One embedding-row read: its table, row, byte address and line span.

    ``segment``/``position`` key the reduction, so any interleaving of
    completions across tables reduces identically.
    """

    table_id: int
    row: int
    address: int
    line_count: int
    segment: int
    position: int


def load_base_pointers(model: Model, batch: QueryBatch) -> BasePointerRegs:
    """Resolve the four base pointers.  Pure, hence idempotent."""
    cfg = model.config
    if len(model.tables) != cfg.num_tables:
        raise EngineError(f"model holds {len(model.tables)} tables, config says {cfg.num_tables}")
    if batch.indices.ndim != 3 or batch.indices.shape[1:] != (cfg.num_tables,
                                                              cfg.gathers_per_table):
        raise EngineError(
            f"batch indices shaped {batch.indices.shape}, expected "
            f"(B, {cfg.num_tables}, {cfg.gathers_per_table})")
    expect = cfg.bottom_mlp_dims[0]
    if batch.dense_features is None:
        raise EngineError(f"bottom MLP expects {expect} dense features but the batch has none")
    if batch.dense_features.shape != (batch.batch_size, expect):
        raise EngineError(
            f"dense features shaped {batch.dense_features.shape}, expected "
            f"({batch.batch_size}, {expect})")
    bases = table_base_addresses(cfg)
    index_base = _align_line(int(bases[-1]) + _align_line(cfg.rows_per_table * cfg.row_bytes))
    index_bytes = batch.indices.size * INDEX_BYTES
    weight_base = _align_line(index_base + index_bytes)
    weight_bytes = sum(w.nbytes + b.nbytes for w, b in (*model.bottom_layers, *model.top_layers))
    dense_base = _align_line(weight_base + weight_bytes)
    return BasePointerRegs(
        model=model,
        batch=batch,
        table_bases=bases,
        index_base=index_base,
        weight_base=weight_base,
        dense_base=dense_base,
    )


def stage_indices(regs: BasePointerRegs, batch: QueryBatch | None = None,
                  capacity: int = 4096) -> list[SparseIndexBuffer]:
    """Split the flat index stream into buffer fills of at most ``capacity``.

    Order is sample-major, then table, then gather position, matching the
    segment layout the reducer expects.
    """
    if capacity < 1:
        raise EngineError(f"capacity must be >= 1, got {capacity}")
    batch = batch if batch is not None else regs.batch
    flat = np.ascontiguousarray(batch.indices, dtype=np.int64).reshape(-1)
    return [
        SparseIndexBuffer(values=flat[lo:lo + capacity], capacity=capacity)
        for lo in range(0, len(flat), capacity)
    ]


def gather_stream(regs: BasePointerRegs, fills: Iterable[SparseIndexBuffer],
                  max_inflight: int = 64) -> Iterator[tuple[GatherRequest, np.ndarray]]:
    """Issue one read per staged index, yielding (request, row vector).

    ``max_inflight`` is the performance-model contract for how many reads may
    be outstanding; functionally the stream is produced in staging order.
    """
    if max_inflight < 1:
        raise EngineError(f"max_inflight must be >= 1, got {max_inflight}")
    cfg = regs.model.config
    gathers = cfg.gathers_per_table
    tables = cfg.num_tables
    rows = cfg.rows_per_table
    row_bytes = cfg.row_bytes
    lines = line_count(cfg)
    flat_pos = 0
    for fill in fills:
        for row in fill.values.tolist():
            segment, position = divmod(flat_pos, gathers)
            table_id = segment % tables
            if not 0 <= row < rows:
                raise EngineError(
                    f"row {row} out of range [0, {rows}) in table {table_id} "
                    f"(segment {segment}, position {position})")
            request = GatherRequest(
                table_id=table_id,
                row=row,
                address=int(regs.table_bases[table_id]) + row * row_bytes,
                line_count=lines,
                segment=segment,
                position=position,
            )
            yield request, regs.model.tables[table_id][row]
            flat_pos += 1


def streaming_reduce(stream: Iterable[tuple[GatherRequest, np.ndarray]],
                     lengths) -> np.ndarray:
    """Accumulate vectors into their segment as they arrive.

    Segment k expects ``lengths[k]`` vectors; accumulation is in place and
    keyed by the request's segment, so completion order across segments does
    not matter.  Returns an array of shape (num_segments, D).
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    segments = len(lengths)
    out = None
    seen = np.zeros(segments, dtype=np.int64)
    for request, vector in stream:
        if out is None:
            out = np.zeros((segments, vector.shape[-1]), dtype=np.float64)
        seg = request.segment
        if not 0 <= seg < segments:
            raise EngineError(f"stream segment {seg} outside [0, {segments})")
        if seen[seg] >= lengths[seg]:
            raise EngineError(
                f"segment {seg} received more than its {lengths[seg]} vectors")
        out[seg] += vector
        seen[seg] += 1
    if out is None:
        out = np.zeros((segments, 0), dtype=np.float64)
    short = np.nonzero(seen != lengths)[0]
    if short.size:
        seg = int(short[0])
        raise EngineError(
            f"segment {seg} received {seen[seg]} vectors, lengths say {lengths[seg]}")
    return out


def reduce_batch(model: Model, batch: QueryBatch) -> np.ndarray:
    """Fast-path gather+reduce over a whole batch via the kernel backend.

    Equivalent to draining :func:`gather_stream` through
    :func:`streaming_reduce`; returns shape (B, T, D) in float64.
    """
    cfg = model.config
    batch_size = batch.batch_size
    length = cfg.gathers_per_table
    out = np.empty((batch_size, cfg.num_tables, cfg.embedding_dim), dtype=np.float64)
    starts = np.arange(batch_size + 1, dtype=np.int64) * length
    for t, table in enumerate(model.tables):
        idx = np.ascontiguousarray(batch.indices[:, t, :], dtype=np.int64).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= cfg.rows_per_table):
            bad = int(np.nonzero((idx < 0) | (idx >= cfg.rows_per_table))[0][0])
            raise EngineError(
                f"row {idx[bad]} out of range [0, {cfg.rows_per_table}) in table {t} "
                f"(segment {bad // length}, position {bad % length})")
        out[:, t, :] = _kernels.gather_reduce(table, idx, starts)
    return out
