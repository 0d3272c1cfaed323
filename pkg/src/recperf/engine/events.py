"""Append-only event log emitted by the accelerator engine.

Each event is (seq, stage, bytes, flops, unit).  Stages:

- ``idx``: one event per sparse-index buffer fill (bytes = staged index bytes)
- ``emb``: one event per gathered cache line (bytes = useful row bytes in it)
- ``dnf``: dense-feature upload
- ``mlp``: one event per 32x32x32 tile op (flops = 2*32^3, padded)
- ``gemm``: one event per logical GEMM with its unpadded flop count
- ``mark``: stage transitions, no bytes or flops

Only idx/emb/dnf events carry bytes, so total bytes equals staged-index
bytes + gather bytes + dense-feature bytes exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

STAGES = ("idx", "emb", "dnf", "mlp", "gemm", "mark")
TILE_FLOPS = 2 * 32**3

_META_KEYS = (
    "batch_size", "num_tables", "gathers_per_table", "embedding_dim",
    "element_bytes", "dense_feature_dim", "spid_capacity", "max_inflight",
)


@dataclass(frozen=True)
class EventTotals:
    """Aggregates the performance model consumes."""

    batch_size: int
    num_tables: int
    gathers_per_table: int
    embedding_dim: int
    element_bytes: int
    dense_feature_dim: int
    index_bytes: int
    gather_bytes: int
    dense_bytes: int
    padded_tiles: int
    padded_flops: int
    raw_flops: int
    gemm_calls: int

    @property
    def gather_requests(self) -> int:
        return self.batch_size * self.num_tables * self.gathers_per_table

    @property
    def reduced_bytes(self) -> int:
        """Size of the reduced embeddings (what a CPU-GPU system copies over PCIe)."""
        return self.batch_size * self.num_tables * self.embedding_dim * self.element_bytes

    @property
    def total_bytes(self) -> int:
        return self.index_bytes + self.gather_bytes + self.dense_bytes


class EventLog:
    """Totally ordered event sequence for one inference."""

    def __init__(self, meta: dict[str, int]):
        missing = [k for k in _META_KEYS if k not in meta]
        if missing:
            raise ValueError(f"event log meta missing {missing}")
        self.meta = {k: int(meta[k]) for k in _META_KEYS}
        self._stages: list[str] = []
        self._bytes: list[int] = []
        self._flops: list[int] = []
        self._units: list[str] = []

    def __len__(self) -> int:
        return len(self._stages)

    def add(self, stage: str, unit: str, nbytes: int = 0, flops: int = 0) -> None:
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        self._stages.append(stage)
        self._bytes.append(int(nbytes))
        self._flops.append(int(flops))
        self._units.append(unit)

    def extend(self, stage: str, unit: str, nbytes: np.ndarray) -> None:
        """Bulk append events sharing a stage and unit (e.g. gather lines)."""
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        values = np.asarray(nbytes).tolist()
        self._stages.extend([stage] * len(values))
        self._bytes.extend(values)
        self._flops.extend([0] * len(values))
        self._units.extend([unit] * len(values))

    def mark(self, label: str) -> None:
        self.add("mark", label)

    def rows(self):
        """Iterate (seq, stage, bytes, flops, unit) tuples."""
        for seq, row in enumerate(zip(self._stages, self._bytes, self._flops, self._units)):
            yield (seq, *row)

    def totals(self) -> EventTotals:
        by_stage_bytes = {s: 0 for s in STAGES}
        padded_tiles = padded_flops = raw_flops = gemm_calls = 0
        for stage, nbytes, flops in zip(self._stages, self._bytes, self._flops):
            by_stage_bytes[stage] += nbytes
            if stage == "mlp":
                padded_tiles += 1
                padded_flops += flops
            elif stage == "gemm":
                raw_flops += flops
                gemm_calls += 1
        return EventTotals(
            **{k: self.meta[k] for k in _META_KEYS if k not in ("spid_capacity", "max_inflight")},
            index_bytes=by_stage_bytes["idx"],
            gather_bytes=by_stage_bytes["emb"],
            dense_bytes=by_stage_bytes["dnf"],
            padded_tiles=padded_tiles,
            padded_flops=padded_flops,
            raw_flops=raw_flops,
            gemm_calls=gemm_calls,
        )

    # -- CSV interchange ----------------------------------------------------

    def to_csv(self, path: str | Path) -> None:
        """Write ``# key=value`` meta lines, a header, then one row per event."""
        with open(path, "w", newline="") as fh:
            for key, value in self.meta.items():
                fh.write(f"# {key}={value}\n")
            writer = csv.writer(fh)
            writer.writerow(["seq", "stage", "bytes", "flops", "unit"])
            writer.writerows(self.rows())

    @classmethod
    def from_csv(cls, path: str | Path) -> "EventLog":
        meta: dict[str, int] = {}
        log = None
        with open(path, newline="") as fh:
            pos = fh.tell()
            line = fh.readline()
            while line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = int(value)
                pos = fh.tell()
                line = fh.readline()
            fh.seek(pos)
            log = cls(meta)
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["seq", "stage", "bytes", "flops", "unit"]:
                raise ValueError(f"{path}: not an event CSV (header {header})")
            for row in reader:
                _, stage, nbytes, flops, unit = row
                log.add(stage, unit, int(nbytes), int(flops))
        return log


def totals_from_csv(path: str | Path) -> EventTotals:
    return EventLog.from_csv(path).totals()
