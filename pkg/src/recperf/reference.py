"""Naive inference pipeline used as the functional ground truth.

Every operation here is written the obvious way (explicit loops, one segment
at a time) and accumulates in float64.  Performance is a non-goal: this
module exists so the accelerator engine has an independent oracle.
"""

from __future__ import annotations

import numpy as np

from .workload import Model, QueryBatch


class ShapeError(ValueError):
    """Inputs whose shapes or index ranges do not match the model."""


def sparse_lengths_sum(table: np.ndarray, indices, lengths, table_id: int | None = None):
    """Gather rows by index and sum them per segment.

    ``lengths`` partitions ``indices`` into consecutive segments; segment k
    produces the sum of its rows, accumulated in ascending position order.
    Returns a list of one vector per segment.
    """
    table = np.asarray(table)
    indices = list(indices)
    lengths = list(lengths)
    if sum(lengths) != len(indices):
        raise ShapeError(f"lengths sum to {sum(lengths)} but {len(indices)} indices given")
    rows = table.shape[0]
    where = f" in table {table_id}" if table_id is not None else ""
    out = []
    pos = 0
    for seg, length in enumerate(lengths):
        acc = np.zeros(table.shape[1], dtype=np.float64)
        for offset in range(length):
            row = indices[pos + offset]
            if not 0 <= row < rows:
                raise ShapeError(
                    f"index {row} out of range [0, {rows}){where} "
                    f"(segment {seg}, position {offset})")
            acc += table[row]
        out.append(acc)
        pos += length
    return out


def feature_interaction(bottom_out: np.ndarray, reduced) -> np.ndarray:
    """Pairwise dot products among [bottom_out, *reduced], then bottom_out.

    Stacks the T+1 vectors, forms the Gram matrix, and emits its strictly
    lower triangular entries in row-major order followed by ``bottom_out``.
    """
    vectors = [np.asarray(bottom_out, dtype=np.float64)]
    vectors.extend(np.asarray(v, dtype=np.float64) for v in reduced)
    dim = vectors[0].shape[-1]
    for i, vec in enumerate(vectors):
        if vec.shape != (dim,):
            raise ShapeError(f"interaction input {i} has shape {vec.shape}, expected ({dim},)")
    stacked = np.stack(vectors)
    gram = stacked @ stacked.T
    pairs = [gram[i, j] for i in range(1, len(vectors)) for j in range(i)]
    return np.concatenate([np.asarray(pairs, dtype=np.float64), vectors[0]])


def mlp_forward(x: np.ndarray, layers, activation: str = "relu") -> np.ndarray:
    """Affine + activation per layer; the final layer is affine only."""
    out = np.asarray(x, dtype=np.float64)
    for i, (weight, bias) in enumerate(layers):
        if out.shape[-1] != weight.shape[1]:
            raise ShapeError(
                f"layer {i}: input width {out.shape[-1]} does not match weight "
                f"shape {weight.shape}")
        out = out @ np.asarray(weight, dtype=np.float64).T + np.asarray(bias, dtype=np.float64)
        if i < len(layers) - 1:
            out = activate(out, activation)
    return out


def activate(x: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(x, 0.0)
    if activation == "tanh":
        return np.tanh(x)
    raise ShapeError(f"unknown activation {activation!r}")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function; range is the closed [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def reduce_batch(model: Model, batch: QueryBatch) -> np.ndarray:
    """All gathers and reductions for a batch: shape (B, T, D)."""
    cfg = model.config
    batch_size = batch.batch_size
    length = cfg.gathers_per_table
    out = np.zeros((batch_size, cfg.num_tables, cfg.embedding_dim), dtype=np.float64)
    for t, table in enumerate(model.tables):
        for b in range(batch_size):
            (vec,) = sparse_lengths_sum(table, batch.indices[b, t], [length], table_id=t)
            out[b, t] = vec
    return out


def infer(model: Model, batch: QueryBatch) -> np.ndarray:
    """Full pipeline per sample: bottom MLP, feature interaction with the T
    reduced embeddings, top MLP, Sigmoid.  Returns B probabilities."""
    cfg = model.config
    if batch.indices.shape[1:] != (cfg.num_tables, cfg.gathers_per_table):
        raise ShapeError(
            f"batch indices shaped {batch.indices.shape}, expected "
            f"(B, {cfg.num_tables}, {cfg.gathers_per_table})")
    if batch.dense_features.shape[1] != cfg.dense_feature_dim:
        raise ShapeError(
            f"dense features width {batch.dense_features.shape[1]}, expected "
            f"{cfg.dense_feature_dim}")
    reduced = reduce_batch(model, batch)
    probs = np.empty(batch.batch_size, dtype=np.float64)
    for b in range(batch.batch_size):
        bottom = mlp_forward(batch.dense_features[b], model.bottom_layers,
                             cfg.hidden_activation)
        interacted = feature_interaction(bottom, reduced[b])
        logit = mlp_forward(interacted, model.top_layers, cfg.hidden_activation)
        probs[b] = sigmoid(logit)[0]
    return probs
