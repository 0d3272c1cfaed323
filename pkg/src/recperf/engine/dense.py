"""Dense-side functional model: 32x32 tiling with an output-stationary
schedule over a spatial PE grid, plus the tiled GEMM that executes it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import TILE_FLOPS, EventLog

TILE = 32
MLP_PE_GRID = (4, 4)          # 4x4 PE array executes the MLP GEMMs
INTERACTION_PE_GRID = (2, 2)  # four dedicated PEs handle feature interaction


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class TileOp:
    m: int
    n: int
    k: int
    pe: tuple[int, int]


@dataclass(frozen=True)
class TileSchedule:
    """Ordered tile ops for an MxK times KxN GEMM.

    Output-stationary: every k-step of output tile (m, n) runs on the same
    PE, k ascending, so partial sums accumulate in that PE's buffer.
    """

    rows: int
    cols: int
    depth: int
    pe_grid: tuple[int, int]
    entries: tuple[TileOp, ...]

    @property
    def tiles_m(self) -> int:
        return -(-self.rows // TILE)

    @property
    def tiles_n(self) -> int:
        return -(-self.cols // TILE)

    @property
    def tiles_k(self) -> int:
        return -(-self.depth // TILE)


def plan_tiles(rows: int, cols: int, depth: int,
               pe_grid: tuple[int, int] = MLP_PE_GRID) -> TileSchedule:
    """Enumerate ceil(M/32)*ceil(N/32)*ceil(K/32) tile ops.

    PE assignment is round-robin over the grid by (m mod grid rows,
    n mod grid cols); k is the innermost loop so accumulation is ascending.
    """
    if rows < 1 or cols < 1 or depth < 1:
        raise ScheduleError(f"GEMM dims must be >= 1, got ({rows}, {cols}, {depth})")
    grid_r, grid_c = pe_grid
    entries = tuple(
        TileOp(m=m, n=n, k=k, pe=(m % grid_r, n % grid_c))
        for m in range(-(-rows // TILE))
        for n in range(-(-cols // TILE))
        for k in range(-(-depth // TILE))
    )
    return TileSchedule(rows=rows, cols=cols, depth=depth, pe_grid=pe_grid, entries=entries)


def tiled_gemm(a: np.ndarray, b: np.ndarray, schedule: TileSchedule | None = None,
               log: EventLog | None = None, unit: str = "mlp") -> np.ndarray:
    """Execute A @ B through the tile schedule.

    Edge tiles are zero-padded and the result cropped back to M x N.  When a
    log is given, one ``mlp`` event is appended per tile op.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ScheduleError(f"cannot multiply shapes {a.shape} and {b.shape}")
    rows, depth = a.shape
    cols = b.shape[1]
    if schedule is None:
        schedule = plan_tiles(rows, cols, depth)
    if (schedule.rows, schedule.cols, schedule.depth) != (rows, cols, depth):
        raise ScheduleError(
            f"schedule is for ({schedule.rows}, {schedule.cols}, {schedule.depth}), "
            f"inputs are ({rows}, {cols}, {depth})")

    padded_a = np.zeros((schedule.tiles_m * TILE, schedule.tiles_k * TILE), dtype=np.float64)
    padded_a[:rows, :depth] = a
    padded_b = np.zeros((schedule.tiles_k * TILE, schedule.tiles_n * TILE), dtype=np.float64)
    padded_b[:depth, :cols] = b
    acc = np.zeros((schedule.tiles_m * TILE, schedule.tiles_n * TILE), dtype=np.float64)
    for op in schedule.entries:
        ms, ns, ks = op.m * TILE, op.n * TILE, op.k * TILE
        acc[ms:ms + TILE, ns:ns + TILE] += (
            padded_a[ms:ms + TILE, ks:ks + TILE] @ padded_b[ks:ks + TILE, ns:ns + TILE]
        )
        if log is not None:
            log.add("mlp", f"{unit}:pe{op.pe[0]}{op.pe[1]}", flops=TILE_FLOPS)
    return acc[:rows, :cols]
