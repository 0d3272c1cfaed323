import numpy as np
import pytest

from recperf import workload


def make_config(num_tables=3, gathers_per_table=4, rows_per_table=64,
                embedding_dim=8, dense_feature_dim=5, bottom_hidden=12,
                top_hidden=10, name="testmodel", activation="relu"):
    """Small, always-valid model shape for unit tests."""
    interaction = (num_tables + 1) * num_tables // 2 + embedding_dim
    return workload.ModelConfig(
        name=name,
        num_tables=num_tables,
        gathers_per_table=gathers_per_table,
        rows_per_table=rows_per_table,
        bottom_mlp_dims=(dense_feature_dim, bottom_hidden, bottom_hidden // 2, embedding_dim),
        top_mlp_dims=(interaction, top_hidden, top_hidden // 2, 1),
        dense_feature_dim=dense_feature_dim,
        embedding_dim=embedding_dim,
        hidden_activation=activation,
    )


def random_small_config(rng: np.random.Generator) -> workload.ModelConfig:
    return make_config(
        num_tables=int(rng.integers(1, 9)),
        gathers_per_table=int(rng.integers(1, 17)),
        rows_per_table=int(rng.integers(1, 10_001)),
        embedding_dim=int(rng.choice([8, 16, 32, 64])),
        dense_feature_dim=int(rng.integers(1, 24)),
        bottom_hidden=int(rng.integers(1, 32)) * 2,
        top_hidden=int(rng.integers(1, 32)) * 2,
    )


@pytest.fixture
def tiny_model():
    return workload.build_model(make_config(), seed=101)


@pytest.fixture
def tiny_batch(tiny_model):
    return workload.generate_batch(tiny_model, 6, "uniform", seed=33)
