import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recperf import cachesim, engine, workload
from recperf.cachesim import CacheConfig, CacheSim, CacheStats, simulate, simulate_steady
from recperf.textcfg import ConfigError

from conftest import make_config

SMALL = CacheConfig(capacity_bytes=4096, associativity=4, line_bytes=64)  # 64 lines


def line_trace(line_ids, line_bytes=64):
    return np.asarray(line_ids, dtype=np.int64) * line_bytes


class TestConfig:
    def test_geometry(self):
        cfg = CacheConfig(capacity_bytes=32 * 2**20, associativity=16)
        assert cfg.num_sets == 32 * 2**20 // (16 * 64)
        assert cfg.num_lines == 32 * 2**20 // 64

    @pytest.mark.parametrize("kwargs", [
        dict(capacity_bytes=3000, associativity=4),
        dict(capacity_bytes=4096, associativity=3),
        dict(capacity_bytes=4096, associativity=4, line_bytes=48),
    ])
    def test_rejects_non_power_of_two(self, kwargs):
        with pytest.raises(ConfigError):
            CacheConfig(**kwargs)


class TestStats:
    def test_mpka_is_rebased_miss_rate(self):
        stats = CacheStats.from_counts(accesses=400, hits=300, misses=100)
        assert stats.miss_rate == 0.25
        assert stats.mpka == 250.0

    def test_counts_must_balance(self):
        with pytest.raises(ValueError):
            CacheStats.from_counts(accesses=10, hits=3, misses=3)


class TestSimulate:
    def test_compulsory_misses(self):
        # N distinct lines touched once each: every access cold-misses.
        stats = simulate(line_trace(range(50)), SMALL)
        assert stats.miss_rate == 1.0
        assert stats.misses == 50

    def test_resident_working_set_loops(self):
        # Working set of W <= capacity lines looped 100 times: only the cold
        # misses survive, so the miss rate is exactly 1/100.
        w = 32
        trace = line_trace(list(range(w)) * 100)
        stats = simulate(trace, SMALL)
        assert stats.misses == w
        assert stats.miss_rate == w / (100 * w)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        trace = line_trace(rng.integers(0, 10_000, size=5000))
        assert simulate(trace, SMALL) == simulate(trace, SMALL)

    def test_lru_eviction_order(self):
        # 0 and 4 fill one set; re-touching 0 makes 4 the LRU victim when 8
        # arrives, so the final 0 still hits (FIFO would evict 0 instead).
        cfg = CacheConfig(capacity_bytes=4 * 2 * 64, associativity=2)  # 4 sets
        sim = CacheSim(cfg)
        sim.run(line_trace([0, 4, 0, 8, 0]))
        assert (sim.stats.hits, sim.stats.misses) == (2, 3)

    def test_empty_trace(self):
        stats = simulate(np.empty(0, dtype=np.int64), SMALL)
        assert stats.accesses == 0 and stats.miss_rate == 0.0

    @given(seed=st.integers(0, 2**31), span=st.integers(1, 4000),
           n=st.integers(1, 3000))
    @settings(max_examples=30, deadline=None)
    def test_capacity_monotonicity(self, seed, span, n):
        # Same number of sets, doubled ways: per-set LRU stack inclusion says
        # the bigger cache can never miss more.
        rng = np.random.default_rng(seed)
        trace = line_trace(rng.integers(0, span, size=n))
        small = CacheConfig(capacity_bytes=16 * 4 * 64, associativity=4)
        large = CacheConfig(capacity_bytes=16 * 8 * 64, associativity=8)
        assert simulate(trace, large).misses <= simulate(trace, small).misses

    def test_mlp_weight_region_proxy(self):
        # Cycling over a weight region that fits in the cache stays under a
        # 20% miss rate once warm.
        region = line_trace(range(48))
        cold = simulate(np.tile(region, 6), SMALL)
        assert cold.miss_rate < 0.20
        warm = simulate_steady(region, SMALL, warm_passes=1)
        assert warm.miss_rate == 0.0


class TestSteadyState:
    def test_full_residency_zero_misses(self):
        trace = line_trace(range(64))
        assert simulate_steady(trace, SMALL, warm_passes=1).miss_rate == 0.0

    def test_warm_zero_equals_cold(self):
        rng = np.random.default_rng(3)
        trace = line_trace(rng.integers(0, 1000, size=2000))
        assert simulate_steady(trace, SMALL, warm_passes=0) == simulate(trace, SMALL)

    def test_oversized_working_set_misses(self):
        trace = line_trace(range(512))  # 8x the cache
        stats = simulate_steady(trace, SMALL, warm_passes=1)
        assert stats.miss_rate == 1.0  # cyclic sweep is LRU's worst case


class TestTraceFromBatch:
    def test_single_gather_two_lines(self):
        cfg = make_config(num_tables=1, gathers_per_table=1, rows_per_table=16,
                          embedding_dim=32)
        batch = workload.QueryBatch(
            indices=np.array([[[5]]], dtype=np.int64),
            dense_features=np.zeros((1, cfg.dense_feature_dim), dtype=np.float32))
        trace = cachesim.trace_from_batch(cfg, batch)
        assert trace.tolist() == [5 * 128, 5 * 128 + 64]

    def test_dlrm1_shape_count(self):
        cfg = workload.dlrm_config("dlrm1", table_bytes=5 * 64 * 128)
        batch = workload.generate_batch(cfg, 1, "uniform", seed=4)
        trace = cachesim.trace_from_batch(cfg, batch)
        assert trace.size == 5 * 20 * 2

    def test_empty_batch(self):
        cfg = make_config()
        batch = workload.QueryBatch(
            indices=np.empty((0, cfg.num_tables, cfg.gathers_per_table), dtype=np.int64),
            dense_features=np.empty((0, cfg.dense_feature_dim), dtype=np.float32))
        assert cachesim.trace_from_batch(cfg, batch).size == 0

    def test_order_matches_gather_stream(self, tiny_model, tiny_batch):
        trace = cachesim.trace_from_batch(tiny_model, tiny_batch)
        regs = engine.load_base_pointers(tiny_model, tiny_batch)
        fills = engine.stage_indices(regs, tiny_batch)
        expect = []
        for request, _ in engine.gather_stream(regs, fills):
            first = request.address // 64 * 64
            expect.extend(first + 64 * k for k in range(request.line_count))
        assert trace.tolist() == expect

    def test_rejects_out_of_range(self, tiny_model, tiny_batch):
        bad = workload.QueryBatch(indices=tiny_batch.indices * 0 - 1,
                                  dense_features=tiny_batch.dense_features)
        with pytest.raises(ConfigError):
            cachesim.trace_from_batch(tiny_model, bad)


class TestTrendAndFiles:
    def test_miss_rate_nondecreasing_in_batch(self):
        # Uniform gathers over tables much larger than the cache, steady
        # state: bigger batches stream bigger working sets, evicting more.
        cfg = workload.dlrm_config("dlrm2", table_bytes=16 * 2**20)
        cache = CacheConfig(capacity_bytes=2**20, associativity=16)
        rates = []
        for batch_size in (1, 4, 16, 64):
            batch = workload.generate_batch(cfg, batch_size, "uniform", seed=77)
            trace = cachesim.trace_from_batch(cfg, batch)
            rates.append(simulate_steady(trace, cache, warm_passes=1).miss_rate)
        assert rates == sorted(rates)
        assert rates[-1] > rates[0]

    def test_trace_file_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        trace = line_trace(rng.integers(0, 10**6, size=100))
        path = tmp_path / "trace.txt"
        cachesim.save_trace(path, trace)
        assert path.read_text().splitlines()[0].startswith("0x")
        np.testing.assert_array_equal(cachesim.load_trace(path), trace)

    def test_trace_file_bad_line(self, tmp_path):
        path = tmp_path / "trace.txt"
        path.write_text("0x10\nnot-hex\n")
        with pytest.raises(ConfigError, match="bad hex"):
            cachesim.load_trace(path)
