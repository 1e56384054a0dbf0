import csv
import types

import numpy as np
import pytest

from deskdlm import ConfigError, DecodeConfig, ModelConfig, init_model
from deskdlm.bench import (
    CSV_COLUMNS,
    BenchRow,
    compare_methods,
    mean_tps,
    measure_throughput,
    spearman,
    sweep_shots,
    synthetic_pool,
    synthetic_query,
    write_csv,
)
from deskdlm.planner import render_example


CFG = DecodeConfig(gen_len=16, block_size=8)


@pytest.fixture(scope="module")
def bench_setup(tiny_model):
    return tiny_model, synthetic_pool(4, example_len=24, seed=1), synthetic_query(3, length=16)


class TestMeasureThroughput:
    def test_median_of_repeats_excluding_warmup(self):
        walls = iter([999.0, 10.0, 30.0, 20.0])

        def run():
            return types.SimpleNamespace(wall_ms=next(walls))

        wall, _ = measure_throughput(run, repeats=3, warmup=1)
        assert wall == 20.0

    def test_tokens_per_second_arithmetic(self):
        # 256 tokens in 2.0 s -> 128 tokens/sec
        assert 256 / (2000.0 / 1e3) == pytest.approx(128.0)

    def test_repeats_must_be_positive(self):
        with pytest.raises(ConfigError):
            measure_throughput(lambda: None, repeats=0)


class TestSpearman:
    def test_perfectly_decreasing(self):
        assert spearman([1, 2, 4, 8], [100.0, 80.0, 60.0, 40.0]) == pytest.approx(-1.0)

    def test_single_point_is_undefined(self):
        assert spearman([1], [100.0]) is None

    def test_increasing(self):
        assert spearman([1, 2, 3], [1.0, 5.0, 9.0]) == pytest.approx(1.0)


class TestSyntheticInputs:
    def test_pool_examples_render_to_exact_length(self):
        pool = synthetic_pool(5, example_len=48, seed=0)
        for e in pool.examples:
            assert len(render_example(e.question, e.answer).encode()) == 48

    def test_pool_deterministic(self):
        a = synthetic_pool(3, example_len=32, seed=7)
        b = synthetic_pool(3, example_len=32, seed=7)
        assert [e.question for e in a.examples] == [e.question for e in b.examples]

    def test_pool_has_embeddings(self):
        pool = synthetic_pool(3, example_len=32, seed=7)
        assert pool.embedding_matrix().shape == (3, 256)

    def test_query_deterministic(self):
        assert synthetic_query(5) == synthetic_query(5)

    def test_example_len_floor(self):
        with pytest.raises(ConfigError):
            synthetic_pool(2, example_len=10, seed=0)


class TestSweep:
    def test_rows_and_schema(self, bench_setup, tmp_path):
        model, pool, query = bench_setup
        result = sweep_shots(model, pool, query, CFG, [1, 2], repeats=1)
        assert [r.shots for r in result.rows] == [1, 2]
        assert -1.0 <= result.spearman_rho <= 1.0
        for row in result.rows:
            assert row.tokens_generated == CFG.gen_len
            assert row.refresh_count == CFG.num_blocks
            assert row.tokens_per_sec == pytest.approx(
                row.tokens_generated / (row.wall_ms / 1e3), rel=1e-6
            )
        path = str(tmp_path / "sweep.csv")
        write_csv(path, result.rows)
        with open(path) as f:
            rows = list(csv.reader(f))
        assert rows[0] == CSV_COLUMNS
        assert len(rows) == 3

    def test_single_shot_rho_undefined(self, bench_setup):
        model, pool, query = bench_setup
        result = sweep_shots(model, pool, query, CFG, [2], repeats=1)
        assert result.spearman_rho is None

    def test_overflowing_shots_marked_skipped(self, bench_setup):
        model, pool, query = bench_setup
        tight = init_model(ModelConfig(layers=1, hidden_dim=32, heads=2, max_seq_len=80, seed=1))
        result = sweep_shots(tight, pool, query, CFG, [1, 4], repeats=1)
        assert [r.shots for r in result.rows] == [1]
        assert len(result.skipped) == 1 and result.skipped[0][0] == 4


class TestCompare:
    def test_row_per_method_and_refresh_counts(self, bench_setup):
        model, pool, query = bench_setup
        rows = compare_methods(model, pool, [(0, query)], CFG, [0.1], [0.2])
        assert [r.method for r in rows] == ["baseline", "fastdllm", "dip"]
        for row in rows:
            assert row.refresh_count == CFG.num_blocks
            assert row.seed == 0
        assert rows[0].final_example_count == pool.size
        assert 1 <= rows[2].final_example_count <= pool.size

    def test_epsilon_grid_adds_dip_rows(self, bench_setup):
        model, pool, query = bench_setup
        rows = compare_methods(
            model, pool, [(0, query)], CFG, [0.1], [0.0, 1.0], methods=["dip"]
        )
        assert [r.epsilon for r in rows] == [0.0, 1.0]

    def test_same_seeds_across_methods(self, bench_setup):
        model, pool, query = bench_setup
        queries = [(0, query), (1, synthetic_query(4, length=16))]
        rows = compare_methods(model, pool, queries, CFG, [0.1], [0.2])
        seeds = {m: [r.seed for r in rows if r.method == m] for m in ("baseline", "fastdllm", "dip")}
        assert seeds["baseline"] == seeds["fastdllm"] == seeds["dip"] == [0, 1]

    def test_unknown_method_rejected(self, bench_setup):
        model, pool, query = bench_setup
        with pytest.raises(ConfigError):
            compare_methods(model, pool, [(0, query)], CFG, [0.1], [0.2], methods=["magic"])

    def test_mean_tps_filters(self):
        rows = [
            BenchRow("dip", 1, 0.1, 0.0, 0.9, 8, 16, 0, 16, 10.0, 1600.0, 2, 2),
            BenchRow("dip", 1, 0.1, 1.0, 0.9, 8, 16, 0, 16, 5.0, 3200.0, 2, 2),
        ]
        assert mean_tps(rows, "dip", 0.0) == 1600.0
        assert mean_tps(rows, "dip", 1.0) == 3200.0
        with pytest.raises(ConfigError):
            mean_tps(rows, "baseline")


def test_csv_row_values_roundtrip(tmp_path):
    row = BenchRow("fastdllm", 4, 0.1, None, 0.9, 32, 256, 7, 256, 1234.5, 207.37, 4, 8)
    path = str(tmp_path / "row.csv")
    write_csv(path, [row])
    with open(path) as f:
        reader = csv.DictReader(f)
        got = next(reader)
    assert got["method"] == "fastdllm"
    assert got["epsilon"] == ""
    assert got["accuracy_proxy"] == ""
    assert float(got["tokens_per_sec"]) == pytest.approx(207.37)
    assert int(got["refresh_count"]) == 8
