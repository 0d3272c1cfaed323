"""End-to-end accelerated inference: staged gathers feed the streaming
reducer while the dense complex runs the bottom MLP, feature interaction,
top MLP and Sigmoid, all of it logged as events."""

from __future__ import annotations

import numpy as np

from ..reference import activate, sigmoid
from ..workload import INDEX_BYTES, Model, QueryBatch
from .dense import INTERACTION_PE_GRID, plan_tiles, tiled_gemm
from .events import EventLog
from .sparse import LINE_BYTES, line_count, load_base_pointers, reduce_batch, stage_indices

DEFAULT_SPID_CAPACITY = 4096
DEFAULT_MAX_INFLIGHT = 64


def _gather_line_bytes(config) -> np.ndarray:
    """Useful bytes carried by each line of one row gather."""
    lines = line_count(config)
    split = [LINE_BYTES] * (lines - 1)
    split.append(config.row_bytes - LINE_BYTES * (lines - 1))
    return np.asarray(split, dtype=np.int64)


def _mlp_layers(x: np.ndarray, layers, activation: str, log: EventLog, tag: str) -> np.ndarray:
    """Batched MLP through the tiled GEMM unit; final layer affine only."""
    out = x
    for i, (weight, bias) in enumerate(layers):
        rows, depth = out.shape
        cols = weight.shape[0]
        log.add("gemm", f"{tag}{i}", flops=2 * rows * cols * depth)
        out = tiled_gemm(out, np.asarray(weight, dtype=np.float64).T, log=log, unit="mlp")
        out = out + np.asarray(bias, dtype=np.float64)
        if i < len(layers) - 1:
            out = activate(out, activation)
    return out


def infer_accelerated(model: Model, batch: QueryBatch,
                      spid_capacity: int = DEFAULT_SPID_CAPACITY,
                      max_inflight: int = DEFAULT_MAX_INFLIGHT) -> tuple[np.ndarray, EventLog]:
    """Run one inference through the accelerator model.

    Returns (probabilities, event log); results match the naive pipeline
    within floating-point reassociation noise.
    """
    cfg = model.config
    regs = load_base_pointers(model, batch)
    batch_size = batch.batch_size
    log = EventLog({
        "batch_size": batch_size,
        "num_tables": cfg.num_tables,
        "gathers_per_table": cfg.gathers_per_table,
        "embedding_dim": cfg.embedding_dim,
        "element_bytes": cfg.element_bytes,
        "dense_feature_dim": cfg.dense_feature_dim,
        "spid_capacity": spid_capacity,
        "max_inflight": max_inflight,
    })
    log.mark("base_pointers_loaded")

    # Sparse path: stage index fills, then stream the gathers of each fill.
    per_row = _gather_line_bytes(cfg)
    fills = stage_indices(regs, batch, capacity=spid_capacity)
    for fill in fills:
        log.add("idx", "spid", nbytes=len(fill.values) * INDEX_BYTES)
        log.extend("emb", "ebgu", np.tile(per_row, len(fill.values)))
    reduced = reduce_batch(model, batch)
    log.mark("reduce_done")

    # Dense path: dense features arrive, bottom MLP runs on the PE array.
    log.add("dnf", "densefeature",
            nbytes=batch_size * cfg.dense_feature_dim * cfg.element_bytes)
    dense = np.asarray(batch.dense_features, dtype=np.float64)
    bottom_out = _mlp_layers(dense, model.bottom_layers, cfg.hidden_activation, log, "bottom")
    log.mark("bottom_mlp_done")

    # Feature interaction: per-sample V @ V.T on the four interaction PEs,
    # then the strict lower triangle concatenated with the bottom output.
    width = cfg.num_tables + 1
    tri_i, tri_j = np.tril_indices(width, k=-1)
    schedule = plan_tiles(width, width, cfg.embedding_dim, pe_grid=INTERACTION_PE_GRID)
    log.add("gemm", "interaction",
            flops=batch_size * 2 * width * width * cfg.embedding_dim)
    features = np.empty((batch_size, cfg.interaction_dim), dtype=np.float64)
    pair_count = cfg.interaction_dim - cfg.embedding_dim
    for b in range(batch_size):
        stacked = np.vstack([bottom_out[b], reduced[b]])
        gram = tiled_gemm(stacked, stacked.T, schedule=schedule, log=log, unit="fi")
        features[b, :pair_count] = gram[tri_i, tri_j]
    features[:, pair_count:] = bottom_out
    log.mark("interaction_done")

    logits = _mlp_layers(features, model.top_layers, cfg.hidden_activation, log, "top")
    log.mark("top_mlp_done")
    probs = sigmoid(logits[:, 0])
    log.mark("sigmoid_done")
    return probs, log
