"""Functional model of the hybrid sparse-dense accelerator."""

from .dense import (
    INTERACTION_PE_GRID,
    MLP_PE_GRID,
    TILE,
    ScheduleError,
    TileOp,
    TileSchedule,
    plan_tiles,
    tiled_gemm,
)
from .events import TILE_FLOPS, EventLog, EventTotals, totals_from_csv
from .pipeline import DEFAULT_MAX_INFLIGHT, DEFAULT_SPID_CAPACITY, infer_accelerated
from .sparse import (
    LINE_BYTES,
    BasePointerRegs,
    EngineError,
    GatherRequest,
    SparseIndexBuffer,
    gather_stream,
    line_count,
    load_base_pointers,
    reduce_batch,
    stage_indices,
    streaming_reduce,
    table_base_addresses,
)

__all__ = [
    "BasePointerRegs", "EngineError", "EventLog", "EventTotals", "GatherRequest",
    "INTERACTION_PE_GRID", "LINE_BYTES", "MLP_PE_GRID", "ScheduleError",
    "SparseIndexBuffer", "TILE", "TILE_FLOPS", "TileOp", "TileSchedule",
    "DEFAULT_MAX_INFLIGHT", "DEFAULT_SPID_CAPACITY",
    "gather_stream", "infer_accelerated", "line_count", "load_base_pointers",
    "plan_tiles", "reduce_batch", "stage_indices", "streaming_reduce",
    "table_base_addresses", "tiled_gemm", "totals_from_csv",
]
