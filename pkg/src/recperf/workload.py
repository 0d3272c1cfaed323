"""Recommendation-model shapes, materialized models, and query batches.

A model is ``T`` embedding tables of ``R`` rows by ``D`` elements, a bottom
MLP fed by dense features, and a top MLP fed by the feature-interaction
output.  Everything is stored as 32-bit floats; all randomness is driven by
explicit seeds so models and batches are reproducible bit-for-bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .textcfg import (
    ConfigError,
    parse_int,
    parse_int_list,
    parse_kv_file,
    parse_size,
)

ELEMENT_BYTES = 4   # fp32 tables, weights, and dense features
INDEX_BYTES = 4     # sparse row IDs travel as 32-bit integers

_BLOB_MAGIC = b"RECP"
_BLOB_VERSION = 1
_ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class ModelConfig:
    """Shape of one recommendation model.

    ``bottom_mlp_dims`` and ``top_mlp_dims`` are full width chains including
    the input width, e.g. ``[13, 94, 47, 32]`` is a three-layer MLP mapping
    13 inputs to 32 outputs.
    """

    name: str
    num_tables: int
    gathers_per_table: int
    rows_per_table: int
    bottom_mlp_dims: tuple[int, ...]
    top_mlp_dims: tuple[int, ...]
    dense_feature_dim: int
    embedding_dim: int = 32
    element_bytes: int = ELEMENT_BYTES
    hidden_activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "bottom_mlp_dims", tuple(self.bottom_mlp_dims))
        object.__setattr__(self, "top_mlp_dims", tuple(self.top_mlp_dims))
        self.validate()

    @property
    def interaction_dim(self) -> int:
        """Width of the feature-interaction output: all distinct pairs among
        the T reduced embeddings plus the bottom-MLP output, then the
        bottom-MLP output itself concatenated."""
        t = self.num_tables
        return (t + 1) * t // 2 + self.embedding_dim

    @property
    def table_bytes(self) -> int:
        return self.num_tables * self.rows_per_table * self.embedding_dim * self.element_bytes

    @property
    def row_bytes(self) -> int:
        return self.embedding_dim * self.element_bytes

    def validate(self) -> None:
        counts = {
            "num_tables": self.num_tables,
            "gathers_per_table": self.gathers_per_table,
            "rows_per_table": self.rows_per_table,
            "embedding_dim": self.embedding_dim,
            "dense_feature_dim": self.dense_feature_dim,
        }
        for key, value in counts.items():
            if int(value) != value or value < 1:
                raise ConfigError(f"{key}: must be a positive integer, got {value!r}")
        if self.element_bytes != ELEMENT_BYTES:
            raise ConfigError(f"element_bytes: only {ELEMENT_BYTES} (fp32) is supported")
        if self.hidden_activation not in _ACTIVATIONS:
            raise ConfigError(f"hidden_activation: must be one of {_ACTIVATIONS}")
        for key, dims in (("bottom_mlp_dims", self.bottom_mlp_dims),
                          ("top_mlp_dims", self.top_mlp_dims)):
            if len(dims) < 2 or any(d < 1 for d in dims):
                raise ConfigError(f"{key}: need at least [input, output] positive widths, got {dims}")
        if self.bottom_mlp_dims[0] != self.dense_feature_dim:
            raise ConfigError(
                f"bottom_mlp_dims: first width {self.bottom_mlp_dims[0]} must equal "
                f"dense_feature_dim {self.dense_feature_dim}")
        if self.bottom_mlp_dims[-1] != self.embedding_dim:
            raise ConfigError(
                f"bottom_mlp_dims: last width {self.bottom_mlp_dims[-1]} must equal "
                f"embedding_dim {self.embedding_dim} (it joins the feature interaction)")
        if self.top_mlp_dims[0] != self.interaction_dim:
            raise ConfigError(
                f"top_mlp_dims: first width {self.top_mlp_dims[0]} must equal the "
                f"interaction width {self.interaction_dim}")
        if self.top_mlp_dims[-1] != 1:
            raise ConfigError(f"top_mlp_dims: last width must be 1, got {self.top_mlp_dims[-1]}")


@dataclass(frozen=True)
class Model:
    """A materialized model: tables plus MLP weights, all fp32."""

    config: ModelConfig
    tables: tuple[np.ndarray, ...]                      # T arrays of shape (R, D)
    bottom_layers: tuple[tuple[np.ndarray, np.ndarray], ...]  # per layer (W(out,in), b(out,))
    top_layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    seed: int


@dataclass(frozen=True)
class QueryBatch:
    """One inference request batch.

    ``indices[b, t]`` holds the ``L`` row IDs sample ``b`` gathers from table
    ``t``; lookups are fixed-length here, variable-length segments are
    supported by the engine operations directly.
    """

    indices: np.ndarray         # (B, T, L) int64, values in [0, R)
    dense_features: np.ndarray  # (B, dense_feature_dim) fp32

    @property
    def batch_size(self) -> int:
        return int(self.indices.shape[0])


def config_of(model_or_config) -> ModelConfig:
    """Accept either a Model or a ModelConfig where only shapes matter."""
    if isinstance(model_or_config, ModelConfig):
        return model_or_config
    return model_or_config.config


def derive_rows(total_table_bytes: int, num_tables: int, embedding_dim: int,
                element_bytes: int = ELEMENT_BYTES) -> int:
    """Rows per table for a total byte budget split evenly across tables.

    Returns ``floor(total_table_bytes / (T * D * element_bytes))``.
    """
    for key, value in (("total_table_bytes", total_table_bytes), ("num_tables", num_tables),
                       ("embedding_dim", embedding_dim), ("element_bytes", element_bytes)):
        if value < 1:
            raise ConfigError(f"{key}: must be >= 1, got {value}")
    rows = int(total_table_bytes) // (num_tables * embedding_dim * element_bytes)
    if rows < 1:
        raise ConfigError(
            f"table budget too small: {total_table_bytes} bytes cannot hold one "
            f"{embedding_dim}-wide row in each of {num_tables} tables")
    return rows


def mlp_param_bytes(dims, element_bytes: int = ELEMENT_BYTES) -> int:
    """Bytes of weights plus biases for a width chain."""
    total = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        total += (fan_in * fan_out + fan_out) * element_bytes
    return total


def derive_mlp_dims(target_bytes: int, input_dim: int, output_dim: int,
                    element_bytes: int = ELEMENT_BYTES) -> list[int]:
    """Solve a 3-layer template ``[input, h, h/2, output]`` for a byte budget.

    ``h`` is the largest even width whose weight+bias bytes fit in
    ``target_bytes``.  Raises if even the smallest template (h=2) does not fit.
    """
    if input_dim < 1 or output_dim < 1:
        raise ConfigError("input_dim and output_dim must be >= 1")
    h = None
    width = 2
    while mlp_param_bytes([input_dim, width, width // 2, output_dim], element_bytes) <= target_bytes:
        h = width
        width += 2
    if h is None:
        need = mlp_param_bytes([input_dim, 2, 1, output_dim], element_bytes)
        raise ConfigError(
            f"mlp byte target {target_bytes} infeasible: minimal "
            f"[{input_dim}, 2, 1, {output_dim}] template needs {need} bytes")
    return [input_dim, h, h // 2, output_dim]


def _check_seed(seed: int) -> int:
    if not 0 <= int(seed) < 2**64:
        raise ConfigError(f"seed must be a non-negative integer below 2**64, got {seed}")
    return int(seed)


def build_model(config: ModelConfig, seed: int) -> Model:
    """Materialize tables and weights, uniform on [-1, 1), fp32.

    Draw order is fixed (tables, then bottom layers, then top layers) so the
    same (config, seed) always reproduces the same model.
    """
    config.validate()
    seed = _check_seed(seed)
    rng = np.random.default_rng(seed)

    def uniform(shape):
        return rng.random(shape, dtype=np.float32) * np.float32(2) - np.float32(1)

    tables = tuple(
        uniform((config.rows_per_table, config.embedding_dim))
        for _ in range(config.num_tables)
    )

    def layers(dims):
        out = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            out.append((uniform((fan_out, fan_in)), uniform((fan_out,))))
        return tuple(out)

    return Model(
        config=config,
        tables=tables,
        bottom_layers=layers(config.bottom_mlp_dims),
        top_layers=layers(config.top_mlp_dims),
        seed=int(seed),
    )


def parse_distribution(text: str) -> tuple[str, float]:
    """Parse ``uniform`` or ``zipf(s)`` (also plain ``zipf``, s defaults to 1.05)."""
    value = text.strip().lower()
    if value == "uniform":
        return "uniform", 0.0
    if value == "zipf":
        return "zipf", 1.05
    if value.startswith("zipf(") and value.endswith(")"):
        try:
            s = float(value[5:-1])
        except ValueError as exc:
            raise ConfigError(f"index_distribution: bad zipf exponent in {text!r}") from exc
        if s <= 0:
            raise ConfigError("index_distribution: zipf exponent must be > 0")
        return "zipf", s
    raise ConfigError(f"index_distribution: expected 'uniform' or 'zipf(s)', got {text!r}")


def generate_batch(model_or_config, batch_size: int, distribution: str = "uniform",
                   seed: int = 0) -> QueryBatch:
    """Draw a query batch: L i.i.d. row IDs per (sample, table) and dense
    features uniform on [-1, 1).  Deterministic per seed."""
    config = config_of(model_or_config)
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    kind, s = parse_distribution(distribution)
    rng = np.random.default_rng(_check_seed(seed))
    shape = (batch_size, config.num_tables, config.gathers_per_table)
    rows = config.rows_per_table
    if kind == "uniform":
        indices = rng.integers(0, rows, size=shape, dtype=np.int64)
    else:
        # Zipf over ranks 1..R mapped to row IDs 0..R-1 by inverse CDF, so the
        # support is exactly the table (numpy's zipf sampler is unbounded).
        pmf = np.arange(1, rows + 1, dtype=np.float64) ** (-s)
        cdf = np.cumsum(pmf)
        cdf /= cdf[-1]
        indices = np.searchsorted(cdf, rng.random(shape)).astype(np.int64)
    dense = rng.random((batch_size, config.dense_feature_dim), dtype=np.float32)
    dense = dense * np.float32(2) - np.float32(1)
    return QueryBatch(indices=indices, dense_features=dense)


# ---------------------------------------------------------------------------
# Table I presets.  Byte budgets use binary units; the desk-scale budgets keep
# every model buildable in seconds while preserving all gather/MLP shape
# counts, which is what the timing model consumes.
# ---------------------------------------------------------------------------

_KB = 2**10
_MB = 2**20
_GB = 2**30

# name: (tables, gathers/table, full-scale table bytes, desk table bytes, mlp bytes)
_DLRM_PRESETS = {
    "dlrm1": (5, 20, 128 * _MB, 16 * _MB, int(57.4 * _KB)),
    "dlrm2": (50, 20, int(1.28 * _GB), 64 * _MB, int(57.4 * _KB)),
    "dlrm3": (5, 80, 128 * _MB, 16 * _MB, int(57.4 * _KB)),
    "dlrm4": (50, 80, int(1.28 * _GB), 64 * _MB, int(57.4 * _KB)),
    "dlrm5": (50, 80, int(3.2 * _GB), 128 * _MB, int(57.4 * _KB)),
    "dlrm6": (5, 2, 128 * _MB, 16 * _MB, 557 * _KB),
}

DLRM_NAMES = tuple(_DLRM_PRESETS)
DEFAULT_DENSE_FEATURES = 13  # de-facto dense-feature width of the open DLRM


def dlrm_config(name: str, table_bytes: int | None = None, full_scale: bool = False,
                dense_feature_dim: int = DEFAULT_DENSE_FEATURES,
                embedding_dim: int = 32) -> ModelConfig:
    """Build one of the six reference configurations.

    The single MLP byte budget is split evenly between the bottom and top
    networks; each side is solved by :func:`derive_mlp_dims`.
    """
    key = name.strip().lower()
    if key not in _DLRM_PRESETS:
        raise ConfigError(f"unknown model preset {name!r}; choose from {DLRM_NAMES}")
    tables, gathers, full_bytes, desk_bytes, mlp_bytes = _DLRM_PRESETS[key]
    budget = table_bytes if table_bytes is not None else (full_bytes if full_scale else desk_bytes)
    rows = derive_rows(budget, tables, embedding_dim)
    interaction = (tables + 1) * tables // 2 + embedding_dim
    bottom = derive_mlp_dims(mlp_bytes // 2, dense_feature_dim, embedding_dim)
    top = derive_mlp_dims(mlp_bytes // 2, interaction, 1)
    return ModelConfig(
        name=key,
        num_tables=tables,
        gathers_per_table=gathers,
        rows_per_table=rows,
        bottom_mlp_dims=tuple(bottom),
        top_mlp_dims=tuple(top),
        dense_feature_dim=dense_feature_dim,
        embedding_dim=embedding_dim,
    )


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

def model_config_from_file(path: str | Path) -> ModelConfig:
    """Load a model config from a ``key = value`` file.

    Either name a preset (``preset = dlrm4``, optionally overriding
    ``table_bytes``), or spell the shape out: ``num_tables``,
    ``gathers_per_table``, ``embedding_dim``, ``dense_feature_dim``, a row
    count (``rows_per_table`` or ``table_bytes``), and MLP widths
    (``bottom_mlp_dims``/``top_mlp_dims`` or a ``mlp_bytes`` budget).
    """
    raw = parse_kv_file(path)
    fields = dict(raw)
    name = fields.pop("name", Path(path).stem)

    preset = fields.pop("preset", None)
    if preset is not None:
        table_bytes = fields.pop("table_bytes", None)
        _reject_unknown(fields, path)
        cfg = dlrm_config(preset, table_bytes=parse_size(table_bytes, "table_bytes")
                          if table_bytes is not None else None)
        return replace(cfg, name=name)

    embedding_dim = parse_int(fields.pop("embedding_dim", "32"), "embedding_dim")
    dense_dim = parse_int(fields.pop("dense_feature_dim", str(DEFAULT_DENSE_FEATURES)),
                          "dense_feature_dim")
    try:
        num_tables = parse_int(fields.pop("num_tables"), "num_tables")
        gathers = parse_int(fields.pop("gathers_per_table"), "gathers_per_table")
    except KeyError as exc:
        raise ConfigError(f"{path}: missing required key {exc.args[0]!r}") from None

    if "rows_per_table" in fields:
        rows = parse_int(fields.pop("rows_per_table"), "rows_per_table")
        fields.pop("table_bytes", None)
    elif "table_bytes" in fields:
        rows = derive_rows(parse_size(fields.pop("table_bytes"), "table_bytes"),
                           num_tables, embedding_dim)
    else:
        raise ConfigError(f"{path}: need rows_per_table or table_bytes")

    interaction = (num_tables + 1) * num_tables // 2 + embedding_dim
    if "bottom_mlp_dims" in fields or "top_mlp_dims" in fields:
        try:
            bottom = parse_int_list(fields.pop("bottom_mlp_dims"), "bottom_mlp_dims")
            top = parse_int_list(fields.pop("top_mlp_dims"), "top_mlp_dims")
        except KeyError as exc:
            raise ConfigError(f"{path}: bottom_mlp_dims and top_mlp_dims must be "
                              f"given together (missing {exc.args[0]!r})") from None
        fields.pop("mlp_bytes", None)
    elif "mlp_bytes" in fields:
        budget = parse_size(fields.pop("mlp_bytes"), "mlp_bytes")
        bottom = derive_mlp_dims(budget // 2, dense_dim, embedding_dim)
        top = derive_mlp_dims(budget // 2, interaction, 1)
    else:
        raise ConfigError(f"{path}: need mlp_bytes or explicit bottom_mlp_dims/top_mlp_dims")

    activation = fields.pop("hidden_activation", "relu")
    _reject_unknown(fields, path)
    return ModelConfig(
        name=name,
        num_tables=num_tables,
        gathers_per_table=gathers,
        rows_per_table=rows,
        bottom_mlp_dims=tuple(bottom),
        top_mlp_dims=tuple(top),
        dense_feature_dim=dense_dim,
        embedding_dim=embedding_dim,
        hidden_activation=activation,
    )


def _reject_unknown(fields: dict, path) -> None:
    if fields:
        key = next(iter(fields))
        raise ConfigError(f"{path}: unknown key {key!r}")


def config_to_kv(config: ModelConfig) -> dict[str, str]:
    """Flatten a config to manifest key/value pairs (fixed key order)."""
    return {
        "name": config.name,
        "num_tables": str(config.num_tables),
        "gathers_per_table": str(config.gathers_per_table),
        "rows_per_table": str(config.rows_per_table),
        "embedding_dim": str(config.embedding_dim),
        "dense_feature_dim": str(config.dense_feature_dim),
        "bottom_mlp_dims": ",".join(map(str, config.bottom_mlp_dims)),
        "top_mlp_dims": ",".join(map(str, config.top_mlp_dims)),
        "element_bytes": str(config.element_bytes),
        "hidden_activation": config.hidden_activation,
        "table_bytes": str(config.table_bytes),
        "mlp_param_bytes": str(mlp_param_bytes(config.bottom_mlp_dims)
                               + mlp_param_bytes(config.top_mlp_dims)),
    }


# ---------------------------------------------------------------------------
# Binary model blob: a small little-endian header followed by the fp32
# payload (tables row-major, then per-layer weights and biases).
# ---------------------------------------------------------------------------

_HEADER_FMT = "<4sIIIIQIIIQI"  # magic, version, T, L, D, R, dense, nb, nt, seed, act


def save_model(model: Model, path: str | Path) -> None:
    cfg = model.config
    path = Path(path)
    header = struct.pack(
        _HEADER_FMT,
        _BLOB_MAGIC,
        _BLOB_VERSION,
        cfg.num_tables,
        cfg.gathers_per_table,
        cfg.embedding_dim,
        cfg.rows_per_table,
        cfg.dense_feature_dim,
        len(cfg.bottom_mlp_dims),
        len(cfg.top_mlp_dims),
        model.seed,
        _ACTIVATIONS.index(cfg.hidden_activation),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        np.asarray(cfg.bottom_mlp_dims, dtype="<u4").tofile(fh)
        np.asarray(cfg.top_mlp_dims, dtype="<u4").tofile(fh)
        for table in model.tables:
            np.ascontiguousarray(table, dtype="<f4").tofile(fh)
        for weight, bias in (*model.bottom_layers, *model.top_layers):
            np.ascontiguousarray(weight, dtype="<f4").tofile(fh)
            np.ascontiguousarray(bias, dtype="<f4").tofile(fh)


def load_model(path: str | Path, name: str | None = None) -> Model:
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.read(struct.calcsize(_HEADER_FMT))
        if len(header) != struct.calcsize(_HEADER_FMT):
            raise ConfigError(f"{path}: truncated model blob")
        (magic, version, tables, gathers, dim, rows, dense, n_bottom, n_top,
         seed, act) = struct.unpack(_HEADER_FMT, header)
        if magic != _BLOB_MAGIC:
            raise ConfigError(f"{path}: not a model blob (bad magic {magic!r})")
        if version != _BLOB_VERSION:
            raise ConfigError(f"{path}: unsupported blob version {version}")
        bottom_dims = tuple(int(x) for x in np.fromfile(fh, dtype="<u4", count=n_bottom))
        top_dims = tuple(int(x) for x in np.fromfile(fh, dtype="<u4", count=n_top))
        config = ModelConfig(
            name=name or path.stem,
            num_tables=tables,
            gathers_per_table=gathers,
            rows_per_table=rows,
            bottom_mlp_dims=bottom_dims,
            top_mlp_dims=top_dims,
            dense_feature_dim=dense,
            embedding_dim=dim,
            hidden_activation=_ACTIVATIONS[act],
        )

        def read(shape) -> np.ndarray:
            count = int(np.prod(shape))
            data = np.fromfile(fh, dtype="<f4", count=count)
            if data.size != count:
                raise ConfigError(f"{path}: truncated payload")
            return data.reshape(shape)

        table_arrays = tuple(read((rows, dim)) for _ in range(tables))

        def read_layers(dims):
            return tuple(
                (read((fan_out, fan_in)), read((fan_out,)))
                for fan_in, fan_out in zip(dims[:-1], dims[1:])
            )

        model = Model(
            config=config,
            tables=table_arrays,
            bottom_layers=read_layers(bottom_dims),
            top_layers=read_layers(top_dims),
            seed=seed,
        )
        if fh.read(1):
            raise ConfigError(f"{path}: trailing bytes after payload")
    return model
