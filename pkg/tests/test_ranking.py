import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deskdlm import (
    ConfigError,
    Example,
    ExamplePool,
    cosine_sim,
    embed_text,
    load_embeddings,
    load_pool,
    mmr_rank,
    resolve_embeddings,
    save_pool,
)

from conftest import mmr_oracle


def unit(v):
    v = np.asarray(v, dtype=np.float32)
    return v / np.linalg.norm(v)


def make_pool(vectors):
    return ExamplePool(
        [Example(f"e{i}", f"q{i}", f"a{i}", unit(v)) for i, v in enumerate(vectors)]
    )


class TestEmbed:
    def test_deterministic(self):
        assert np.array_equal(embed_text("apples and pears"), embed_text("apples and pears"))

    def test_bag_of_words_order_invariant(self):
        assert np.array_equal(embed_text("a b"), embed_text("b a"))

    def test_unit_norm(self):
        assert abs(np.linalg.norm(embed_text("count the marbles")) - 1.0) <= 1e-6

    def test_empty_text_rejected(self):
        with pytest.raises(ConfigError):
            embed_text("")
        with pytest.raises(ConfigError):
            embed_text("   ")

    def test_punctuation_only_still_embeds(self):
        assert np.linalg.norm(embed_text("!!!")) > 0

    def test_dimension_parameter(self):
        assert embed_text("apples", dim=64).shape == (64,)


class TestCosine:
    def test_self_similarity_is_one(self):
        v = embed_text("trains and speeds")
        assert cosine_sim(v, v) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_sim([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        u, v = rng.normal(size=8), rng.normal(size=8)
        assert cosine_sim(u, v) == pytest.approx(cosine_sim(v, u))

    def test_zero_vector_rejected(self):
        with pytest.raises(ConfigError):
            cosine_sim([0.0, 0.0], [1.0, 0.0])

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            cosine_sim([1.0, 0.0], [1.0, 0.0, 0.0])


class TestMmr:
    def test_lambda_one_sorts_by_similarity(self):
        q = unit([1.0, 0.0])
        pool = make_pool([[0.0, 1.0], [1.0, 0.0], [0.7, 0.7]])
        ranked = mmr_rank(q, pool, 1.0)
        assert ranked.order == ("e1", "e2", "e0")

    def test_duplicate_penalized_behind_diverse_example(self):
        # hand-computed: duplicate of the top pick scores 0.4 - 0.6 = -0.2,
        # the diverse example 0.24 - 0.36 = -0.12, so it goes first
        q = unit([1.0, 0.0])
        pool = make_pool([[1.0, 0.0], [1.0, 0.0], [0.6, 0.8]])
        ranked = mmr_rank(q, pool, 0.4)
        assert ranked.order == ("e0", "e2", "e1")
        assert ranked.scores[0] == pytest.approx(0.4)
        assert ranked.scores[1] == pytest.approx(-0.12)
        assert ranked.scores[2] == pytest.approx(-0.2)

    def test_singleton_pool(self):
        pool = make_pool([[0.3, 0.9]])
        for lam in (0.0, 0.5, 1.0):
            assert mmr_rank(unit([1.0, 0.0]), pool, lam).order == ("e0",)

    def test_output_is_permutation(self):
        rng = np.random.default_rng(0)
        pool = make_pool(rng.normal(size=(7, 5)))
        ranked = mmr_rank(unit(rng.normal(size=5)), pool, 0.3)
        assert sorted(ranked.order) == sorted(e.id for e in pool.examples)

    @pytest.mark.parametrize("lam", [0.25, 0.5, 0.75, 1.0])
    def test_first_pick_is_most_similar(self, lam):
        rng = np.random.default_rng(42)
        for _ in range(20):
            vecs = rng.normal(size=(5, 6))
            q = unit(rng.normal(size=6))
            pool = make_pool(vecs)
            ranked = mmr_rank(q, pool, lam)
            sims = [cosine_sim(q, e.embedding) for e in pool.examples]
            assert ranked.order[0] == pool.examples[int(np.argmax(sims))].id

    @pytest.mark.parametrize("lam", [0.0, 0.25, 0.5, 0.75, 1.0])
    def test_matches_independent_oracle(self, lam):
        rng = np.random.default_rng(7)
        for trial in range(20):
            k = int(rng.integers(1, 7))
            vecs = [unit(rng.normal(size=4)) for _ in range(k)]
            q = unit(rng.normal(size=4))
            pool = make_pool(vecs)
            got = [pool.examples.index(pool.by_id(i)) for i in mmr_rank(q, pool, lam).order]
            want = mmr_oracle([float(x) for x in q], [[float(x) for x in v] for v in vecs], lam)
            assert got == want, f"trial {trial} lam {lam}"

    def test_lambda_out_of_range(self):
        pool = make_pool([[1.0, 0.0]])
        with pytest.raises(ConfigError):
            mmr_rank(unit([1.0, 0.0]), pool, 1.5)

    def test_missing_embeddings_rejected(self):
        pool = ExamplePool([Example("e0", "q", "a", None)])
        with pytest.raises(ConfigError):
            mmr_rank(unit([1.0, 0.0]), pool, 0.5)

    def test_dim_mismatch_rejected(self):
        pool = make_pool([[1.0, 0.0]])
        with pytest.raises(ConfigError):
            mmr_rank(unit([1.0, 0.0, 0.0]), pool, 0.5)


class TestPoolFiles:
    def test_roundtrip(self, tmp_path):
        pool = ExamplePool(
            [
                Example("a", "q1", "ans1", embed_text("q1")),
                Example("b", "q2", "ans2", None),
            ]
        )
        path = str(tmp_path / "pool.jsonl")
        save_pool(pool, path)
        loaded = load_pool(path)
        assert [e.id for e in loaded.examples] == ["a", "b"]
        np.testing.assert_allclose(loaded.examples[0].embedding, pool.examples[0].embedding, rtol=1e-6)
        assert loaded.examples[1].embedding is None

    def test_malformed_line_reports_lineno(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "question": "q", "answer": "a"}\n{oops\n')
        with pytest.raises(ConfigError, match="bad.jsonl:2"):
            load_pool(str(path))

    def test_missing_key_reports_lineno(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "question": "q"}\n')
        with pytest.raises(ConfigError, match=":1"):
            load_pool(str(path))

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        line = '{"id": "a", "question": "q", "answer": "x"}\n'
        path.write_text(line + line)
        with pytest.raises(ConfigError):
            load_pool(str(path))

    def test_embedding_override_file(self, tmp_path):
        pool_path = tmp_path / "pool.jsonl"
        pool_path.write_text('{"id": "a", "question": "q one", "answer": "x"}\n')
        emb_path = tmp_path / "emb.jsonl"
        emb_path.write_text(json.dumps({"id": "a", "vector": [3.0, 4.0]}) + "\n")
        pool = load_pool(str(pool_path))
        overrides = load_embeddings(str(emb_path))
        resolved = resolve_embeddings(pool, overrides)
        np.testing.assert_allclose(resolved.examples[0].embedding, [0.6, 0.8], rtol=1e-6)

    def test_resolve_requires_embeddings_unless_hashing_enabled(self):
        pool = ExamplePool([Example("a", "some question", "x", None)])
        with pytest.raises(ConfigError):
            resolve_embeddings(pool)
        resolved = resolve_embeddings(pool, hash_embed=True)
        assert resolved.examples[0].embedding is not None

    def test_resolve_rejects_mixed_dims(self):
        pool = ExamplePool(
            [
                Example("a", "q", "x", unit([1.0, 0.0])),
                Example("b", "q", "x", unit([1.0, 0.0, 0.0])),
            ]
        )
        with pytest.raises(ConfigError):
            resolve_embeddings(pool)
