import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recperf import workload
from recperf.textcfg import ConfigError

from conftest import make_config


class TestDeriveRows:
    def test_dlrm1_budget(self):
        # 128 MiB over 5 tables of 32-wide fp32 rows
        assert workload.derive_rows(128 * 2**20, 5, 32, 4) == 209_715

    def test_large_binary_budget(self):
        assert workload.derive_rows(int(1.28 * 2**30), 50, 32, 4) == 214_748

    def test_large_decimal_budget(self):
        assert workload.derive_rows(3_200_000_000, 50, 32, 4) == 500_000

    def test_exactly_one_row(self):
        assert workload.derive_rows(128, 1, 32, 4) == 1

    def test_budget_too_small(self):
        with pytest.raises(ConfigError, match="too small"):
            workload.derive_rows(127, 1, 32, 4)

    def test_rejects_nonpositive(self):
        with pytest.raises(ConfigError):
            workload.derive_rows(0, 1, 32, 4)
        with pytest.raises(ConfigError):
            workload.derive_rows(1024, 0, 32, 4)

    @given(total=st.integers(1, 10**12), tables=st.integers(1, 64),
           dim=st.integers(1, 256), eb=st.sampled_from([2, 4, 8]))
    @settings(max_examples=200)
    def test_floor_bracket(self, total, tables, dim, eb):
        unit = tables * dim * eb
        if total < unit:
            with pytest.raises(ConfigError):
                workload.derive_rows(total, tables, dim, eb)
        else:
            rows = workload.derive_rows(total, tables, dim, eb)
            assert rows * unit <= total < (rows + 1) * unit


def enumerate_h(target_bytes, input_dim, output_dim):
    """Brute-force oracle: largest even h whose template fits the budget."""
    best = None
    h = 2
    while True:
        size = workload.mlp_param_bytes([input_dim, h, h // 2, output_dim])
        if size > target_bytes:
            return best
        best = h
        h += 2


class TestDeriveMlpDims:
    def test_budget_57k(self):
        dims = workload.derive_mlp_dims(57_400, 38, 1)
        assert dims == [38, 134, 67, 1]  # frozen from the enumeration oracle
        assert dims[1] == enumerate_h(57_400, 38, 1)
        used = workload.mlp_param_bytes(dims)
        assert used <= 57_400
        assert used >= 0.9 * 57_400  # budget is large enough to land within 10%

    def test_minimal_template(self):
        floor_bytes = workload.mlp_param_bytes([2, 2, 1, 1])
        assert workload.derive_mlp_dims(floor_bytes, 2, 1) == [2, 2, 1, 1]

    def test_budget_557k_monotone(self):
        small = workload.derive_mlp_dims(57_400, 38, 1)[1]
        large = workload.derive_mlp_dims(557 * 1024, 38, 1)
        assert large == [38, 494, 247, 1]  # frozen from the enumeration oracle
        assert large[1] == enumerate_h(557 * 1024, 38, 1)
        assert 2.5 < large[1] / small < 4.5  # ~sqrt(10) growth for a 10x budget

    def test_infeasible(self):
        with pytest.raises(ConfigError, match="infeasible"):
            workload.derive_mlp_dims(10, 38, 1)

    @given(target=st.integers(50, 10**6), input_dim=st.integers(1, 200),
           output_dim=st.integers(1, 8))
    @settings(max_examples=60)
    def test_matches_enumeration(self, target, input_dim, output_dim):
        expect = enumerate_h(target, input_dim, output_dim)
        if expect is None:
            with pytest.raises(ConfigError):
                workload.derive_mlp_dims(target, input_dim, output_dim)
        else:
            assert workload.derive_mlp_dims(target, input_dim, output_dim)[1] == expect


class TestBuildModel:
    def test_deterministic(self):
        cfg = make_config()
        a = workload.build_model(cfg, seed=5)
        b = workload.build_model(cfg, seed=5)
        for ta, tb in zip(a.tables, b.tables):
            np.testing.assert_array_equal(ta, tb)
        for (wa, ba), (wb, bb) in zip(a.bottom_layers + a.top_layers,
                                      b.bottom_layers + b.top_layers):
            np.testing.assert_array_equal(wa, wb)
            np.testing.assert_array_equal(ba, bb)

    def test_seed_changes_values(self):
        cfg = make_config()
        a = workload.build_model(cfg, seed=5)
        b = workload.build_model(cfg, seed=6)
        assert not np.array_equal(a.tables[0], b.tables[0])

    def test_one_by_one_table(self):
        cfg = workload.ModelConfig(
            name="minimal", num_tables=1, gathers_per_table=1, rows_per_table=1,
            bottom_mlp_dims=(1, 1), top_mlp_dims=(2, 1), dense_feature_dim=1,
            embedding_dim=1)
        model = workload.build_model(cfg, seed=0)
        assert model.tables[0].shape == (1, 1)

    def test_values_in_range(self):
        model = workload.build_model(make_config(rows_per_table=500), seed=9)
        for table in model.tables:
            assert table.dtype == np.float32
            assert table.min() >= -1.0 and table.max() < 1.0

    def test_shapes_match_dims(self):
        cfg = make_config()
        model = workload.build_model(cfg, seed=1)
        for (fan_in, fan_out), (w, b) in zip(
                zip(cfg.bottom_mlp_dims[:-1], cfg.bottom_mlp_dims[1:]), model.bottom_layers):
            assert w.shape == (fan_out, fan_in)
            assert b.shape == (fan_out,)

    def test_rejects_negative_seed(self):
        with pytest.raises(ConfigError, match="seed"):
            workload.build_model(make_config(), seed=-1)
        with pytest.raises(ConfigError, match="seed"):
            workload.generate_batch(make_config(), 1, "uniform", seed=-1)

    def test_rejects_zero_dims(self):
        with pytest.raises(ConfigError, match="num_tables"):
            make_config(num_tables=0)
        with pytest.raises(ConfigError, match="embedding_dim"):
            make_config(embedding_dim=0)

    def test_rejects_mlp_width_mismatch(self):
        with pytest.raises(ConfigError, match="bottom_mlp_dims"):
            workload.ModelConfig(
                name="bad", num_tables=2, gathers_per_table=2, rows_per_table=4,
                bottom_mlp_dims=(3, 7), top_mlp_dims=(11, 1), dense_feature_dim=3,
                embedding_dim=8)


class TestGenerateBatch:
    def test_deterministic(self):
        cfg = make_config(rows_per_table=10, gathers_per_table=3)
        a = workload.generate_batch(cfg, 2, "uniform", seed=7)
        b = workload.generate_batch(cfg, 2, "uniform", seed=7)
        np.testing.assert_array_equal(a.indices, b.indices)
        np.testing.assert_array_equal(a.dense_features, b.dense_features)

    def test_single_row_table_all_zero(self):
        cfg = make_config(rows_per_table=1)
        batch = workload.generate_batch(cfg, 4, "uniform", seed=1)
        assert (batch.indices == 0).all()

    def test_uniform_mostly_distinct(self):
        # Birthday-bound check: 128*80 draws from 10^6 rows stay >99% distinct.
        cfg = make_config(num_tables=1, gathers_per_table=80, rows_per_table=10**6,
                          embedding_dim=32)
        batch = workload.generate_batch(cfg, 128, "uniform", seed=3)
        per_table = batch.indices[:, 0, :].reshape(-1)
        assert per_table.size == 128 * 80
        distinct = np.unique(per_table).size / per_table.size
        assert distinct > 0.99

    def test_zipf_prefers_low_rows(self):
        cfg = make_config(rows_per_table=100, gathers_per_table=50)
        batch = workload.generate_batch(cfg, 64, "zipf(1.5)", seed=11)
        values, counts = np.unique(batch.indices, return_counts=True)
        assert values[np.argmax(counts)] == 0
        assert batch.indices.max() < 100

    def test_rejects_bad_batch_size(self):
        with pytest.raises(ConfigError):
            workload.generate_batch(make_config(), 0, "uniform", seed=1)

    def test_rejects_bad_distribution(self):
        with pytest.raises(ConfigError):
            workload.generate_batch(make_config(), 1, "poisson", seed=1)

    @given(rows=st.integers(1, 5000), length=st.integers(1, 10),
           batch=st.integers(1, 8), seed=st.integers(0, 2**31),
           dist=st.sampled_from(["uniform", "zipf(1.2)"]))
    @settings(max_examples=50, deadline=None)
    def test_indices_always_in_range(self, rows, length, batch, seed, dist):
        cfg = make_config(rows_per_table=rows, gathers_per_table=length)
        out = workload.generate_batch(cfg, batch, dist, seed=seed)
        assert out.indices.shape == (batch, cfg.num_tables, length)
        assert out.indices.min() >= 0
        assert out.indices.max() < rows
        assert out.dense_features.shape == (batch, cfg.dense_feature_dim)


class TestSerialization:
    def test_round_trip_identical(self, tmp_path):
        model = workload.build_model(make_config(activation="tanh"), seed=21)
        path = tmp_path / "model.blob"
        workload.save_model(model, path)
        loaded = workload.load_model(path, name=model.config.name)
        assert loaded.config == model.config
        assert loaded.seed == model.seed
        for ta, tb in zip(model.tables, loaded.tables):
            np.testing.assert_array_equal(ta, tb)
        for (wa, ba), (wb, bb) in zip(model.bottom_layers + model.top_layers,
                                      loaded.bottom_layers + loaded.top_layers):
            np.testing.assert_array_equal(wa, wb)
            np.testing.assert_array_equal(ba, bb)

    def test_same_seed_same_bytes(self, tmp_path):
        cfg = make_config()
        for name in ("a.blob", "b.blob"):
            workload.save_model(workload.build_model(cfg, seed=4), tmp_path / name)
        assert (tmp_path / "a.blob").read_bytes() == (tmp_path / "b.blob").read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.blob"
        path.write_bytes(b"\x00" * 64)
        with pytest.raises(ConfigError, match="magic"):
            workload.load_model(path)

    def test_truncated(self, tmp_path):
        model = workload.build_model(make_config(), seed=21)
        path = tmp_path / "model.blob"
        workload.save_model(model, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ConfigError, match="truncated"):
            workload.load_model(path)


class TestPresetsAndFiles:
    def test_dlrm_presets_validate(self):
        for name in workload.DLRM_NAMES:
            cfg = workload.dlrm_config(name)
            assert cfg.embedding_dim == 32
            assert cfg.top_mlp_dims[-1] == 1

    def test_dlrm1_full_scale_rows(self):
        cfg = workload.dlrm_config("dlrm1", full_scale=True)
        assert cfg.num_tables == 5
        assert cfg.rows_per_table == 209_715

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown model preset"):
            workload.dlrm_config("dlrm9")

    def test_preset_file_matches_code(self):
        cfg = workload.model_config_from_file("configs/dlrm4.cfg")
        assert cfg == workload.dlrm_config("dlrm4")

    def test_custom_file(self, tmp_path):
        path = tmp_path / "m.cfg"
        path.write_text(
            "name = custom\nnum_tables = 4\ngathers_per_table = 8\n"
            "embedding_dim = 16\ndense_feature_dim = 13\n"
            "table_bytes = 256K\nmlp_bytes = 24K\n")
        cfg = workload.model_config_from_file(path)
        assert cfg.rows_per_table == workload.derive_rows(256 * 2**10, 4, 16)
        assert cfg.bottom_mlp_dims[0] == 13
        assert cfg.bottom_mlp_dims[-1] == 16

    def test_unknown_key_named(self, tmp_path):
        path = tmp_path / "m.cfg"
        path.write_text("num_tables = 4\ngathers_per_table = 8\n"
                        "rows_per_table = 16\nmlp_bytes = 24K\nwat = 1\n")
        with pytest.raises(ConfigError, match="wat"):
            workload.model_config_from_file(path)

    def test_missing_rows_spec(self, tmp_path):
        path = tmp_path / "m.cfg"
        path.write_text("num_tables = 4\ngathers_per_table = 8\nmlp_bytes = 24K\n")
        with pytest.raises(ConfigError, match="rows_per_table or table_bytes"):
            workload.model_config_from_file(path)
