import csv

import numpy as np
import pytest

import oracles
from backeval.errors import DataError, ManifestError
from backeval.metrics import (
    EvalConfig,
    ModelScore,
    RetrievalTrace,
    backretrieval,
    corr_baseline,
    export_traces,
    recall_from_ranks,
    xlr_recall,
)
from backeval.store import EmbeddingMatrix, PairedDataset

from conftest import make_dataset, make_matrix


def unit_rows32(rows):
    arr = np.asarray(rows, dtype=np.float64)
    return (arr / np.linalg.norm(arr, axis=1)[:, None]).astype(np.float32)


def dataset_from_arrays(text, image, language="en", prefix="r"):
    n = len(text)
    ids = [f"{prefix}{i}" for i in range(n)]
    return PairedDataset(
        language=language,
        text=EmbeddingMatrix(np.asarray(text, dtype=np.float32), ids),
        image=EmbeddingMatrix(np.asarray(image, dtype=np.float32), ids),
    )


def random_pair(rng, n_src, n_tgt, text_dim, image_dim):
    src = dataset_from_arrays(
        rng.standard_normal((n_src, text_dim)),
        rng.standard_normal((n_src, image_dim)),
        language="src",
        prefix="s",
    )
    tgt = dataset_from_arrays(
        rng.standard_normal((n_tgt, text_dim)),
        rng.standard_normal((n_tgt, image_dim)),
        language="tgt",
        prefix="t",
    )
    return src, tgt


class TestEvalConfig:
    def test_defaults_valid(self):
        cfg = EvalConfig()
        assert cfg.k == 10

    def test_bad_k(self):
        with pytest.raises(ManifestError, match="k must be"):
            EvalConfig(k=0)

    def test_sample_smaller_than_k(self):
        with pytest.raises(ManifestError, match="sample_size"):
            EvalConfig(k=10, sample_size=5)

    def test_small_budget(self):
        with pytest.raises(ManifestError, match="corr_pair_budget"):
            EvalConfig(corr_pair_budget=10)


class TestRecallFromRanks:
    def test_half(self):
        assert recall_from_ranks([1, 5, 11, 200], 10) == 0.5

    def test_all_hits(self):
        assert recall_from_ranks([1, 1, 1], 3) == 1.0

    def test_all_misses(self):
        assert recall_from_ranks([11, 12, 13], 10) == 0.0

    def test_empty_error(self):
        with pytest.raises(DataError, match="empty"):
            recall_from_ranks([], 10)

    def test_antitone_in_inverse_k(self):
        rng = np.random.default_rng(0)
        ranks = rng.integers(1, 50, size=100)
        values = [recall_from_ranks(ranks, k) for k in range(1, 50)]
        assert all(a <= b for a, b in zip(values, values[1:]))


class TestXlrRecall:
    def test_self_retrieval_is_perfect(self):
        m = make_matrix(25, 8, seed=1)
        for k in (1, 5, 10):
            recall, ranks = xlr_recall(m, m, k=k)
            assert recall == 1.0
            assert np.all(ranks == 1)

    def test_orthogonal_match(self):
        source = np.eye(4, dtype=np.float32)
        target = np.eye(4, dtype=np.float32) * 2.0
        recall, ranks = xlr_recall(source, target, k=1)
        assert recall == 1.0

    def test_row_count_mismatch(self):
        with pytest.raises(DataError, match="equal row counts"):
            xlr_recall(make_matrix(3, 4), make_matrix(4, 4), k=1)

    def test_matches_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            n = int(rng.integers(2, 40))
            d = int(rng.integers(2, 9))
            src = rng.standard_normal((n, d))
            tgt = rng.standard_normal((n, d))
            recall, ranks = xlr_recall(src, tgt, k=5)
            expected = oracles.xlr_ranks(src, tgt)
            assert list(ranks) == expected
            assert recall == oracles.recall_at_k(expected, 5)


class TestBackretrieval:
    def test_identical_datasets_rank_one(self):
        ds = make_dataset(30, 6, 9, seed=3)
        recall, traces = backretrieval(ds, ds, EvalConfig(k=1, sample_size=30))
        assert recall == 1.0
        assert all(t.back_rank == 1 for t in traces)
        assert all(t.retrieved_target_index == t.query_index for t in traces)

    def test_hand_built_four_items(self):
        # Two orthogonal "topics" in text space; images mirror the topics.
        src_text = unit_rows32([[1, 0], [0.9, 0.1], [0, 1], [0.1, 0.9]])
        tgt_text = unit_rows32([[0.95, 0.05], [0.05, 0.95]])
        src_image = unit_rows32([[1, 0, 0], [0.8, 0.2, 0], [0, 1, 0], [0, 0.9, 0.1]])
        tgt_image = unit_rows32([[0.9, 0.1, 0], [0, 0.95, 0.05]])
        src = dataset_from_arrays(src_text, src_image, "src", "s")
        tgt = dataset_from_arrays(tgt_text, tgt_image, "tgt", "t")
        recall, traces = backretrieval(src, tgt, EvalConfig(k=1, sample_size=4))
        expected_recall, expected_ranks, expected_retrieved = oracles.backretrieval(
            src_text, src_image, tgt_text, tgt_image, 1
        )
        assert [t.retrieved_target_index for t in traces] == expected_retrieved
        assert [t.back_rank for t in traces] == expected_ranks
        assert recall == expected_recall

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            n_src = int(rng.integers(2, 40))
            n_tgt = int(rng.integers(2, 40))
            src, tgt = random_pair(rng, n_src, n_tgt, 5, 7)
            cfg = EvalConfig(k=3, sample_size=max(3, n_src))
            recall, traces = backretrieval(src, tgt, cfg)
            exp_recall, exp_ranks, exp_retrieved = oracles.backretrieval(
                src.text.data, src.image.data, tgt.text.data, tgt.image.data, 3
            )
            assert [t.retrieved_target_index for t in traces] == exp_retrieved
            assert [t.back_rank for t in traces] == exp_ranks
            assert recall == exp_recall

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        src, tgt = random_pair(rng, 20, 25, 4, 6)
        cfg = EvalConfig(k=3, sample_size=20)
        base, base_traces = backretrieval(src, tgt, cfg)
        scales = rng.uniform(0.2, 5.0, size=20).astype(np.float32)
        scaled_src = dataset_from_arrays(
            src.text.data * scales[:, None],
            src.image.data,
            "src",
            "s",
        )
        got, got_traces = backretrieval(scaled_src, tgt, cfg)
        assert got == base
        assert [t.back_rank for t in got_traces] == [t.back_rank for t in base_traces]

    def test_target_permutation_invariance(self):
        rng = np.random.default_rng(6)
        src, tgt = random_pair(rng, 20, 25, 4, 6)
        cfg = EvalConfig(k=3, sample_size=20)
        base, base_traces = backretrieval(src, tgt, cfg)
        perm = rng.permutation(25)
        shuffled = tgt.take(perm)
        got, got_traces = backretrieval(src, shuffled, cfg)
        assert got == base
        inverse = np.argsort(perm)
        assert [t.retrieved_target_index for t in got_traces] == [
            int(inverse[t.retrieved_target_index]) for t in base_traces
        ]

    def test_worker_invariance(self):
        rng = np.random.default_rng(7)
        src, tgt = random_pair(rng, 60, 50, 5, 5)
        cfg = EvalConfig(k=5, sample_size=60)
        base, base_traces = backretrieval(src, tgt, cfg, workers=1)
        got, got_traces = backretrieval(src, tgt, cfg, workers=4)
        assert got == base
        assert got_traces == base_traces

    def test_text_dim_mismatch(self):
        src = make_dataset(5, 4, 6, seed=8, language="src")
        tgt = make_dataset(5, 3, 6, seed=9, language="tgt")
        with pytest.raises(DataError, match="text dim mismatch"):
            backretrieval(src, tgt, EvalConfig(k=1, sample_size=5))

    def test_image_dim_mismatch(self):
        src = make_dataset(5, 4, 6, seed=8, language="src")
        tgt = make_dataset(5, 4, 7, seed=9, language="tgt")
        with pytest.raises(DataError, match="image dim mismatch"):
            backretrieval(src, tgt, EvalConfig(k=1, sample_size=5))

    def test_empty_dataset(self):
        src = make_dataset(5, 4, 6, language="src")
        empty = PairedDataset(
            language="tgt",
            text=EmbeddingMatrix(np.zeros((0, 4), dtype=np.float32), []),
            image=EmbeddingMatrix(np.zeros((0, 6), dtype=np.float32), []),
        )
        with pytest.raises(DataError, match="non-empty"):
            backretrieval(src, empty, EvalConfig(k=1, sample_size=5))


class TestCorrBaseline:
    def test_identical_geometry_is_one(self):
        rng = np.random.default_rng(10)
        text = rng.standard_normal((12, 5))
        src = dataset_from_arrays(text, text, "src", "s")
        tgt_t = rng.standard_normal((15, 5))
        tgt = dataset_from_arrays(tgt_t, tgt_t, "tgt", "t")
        value = corr_baseline(src, tgt, EvalConfig(k=1, sample_size=12))
        assert value == pytest.approx(1.0, abs=1e-12)

    def test_antitone_image_distances(self):
        # One query against targets whose image angles reverse the text
        # ordering: image distance strictly decreases as text distance grows.
        def ray(a):
            return [np.cos(a), np.sin(a)]

        src = dataset_from_arrays([ray(0.0)], [ray(0.0)], "src", "s")
        tgt = dataset_from_arrays(
            [ray(0.1), ray(0.5), ray(1.0)],
            [ray(1.0), ray(0.5), ray(0.1)],
            "tgt",
            "t",
        )
        value = corr_baseline(src, tgt, EvalConfig(k=1, sample_size=1))
        assert value == pytest.approx(-1.0, abs=1e-12)

    def test_matches_full_enumeration_oracle(self):
        rng = np.random.default_rng(11)
        src, tgt = random_pair(rng, 9, 8, 4, 6)
        value = corr_baseline(src, tgt, EvalConfig(k=1, sample_size=9))
        expected = oracles.corr_baseline_full(
            src.text.data, src.image.data, tgt.text.data, tgt.image.data
        )
        assert value == pytest.approx(expected, abs=1e-9)

    def test_independent_embeddings_near_zero(self):
        rng = np.random.default_rng(12)
        src, tgt = random_pair(rng, 200, 200, 16, 16)
        value = corr_baseline(src, tgt, EvalConfig(k=1, sample_size=200))
        assert abs(value) < 0.05

    def test_sampled_mode_deterministic(self):
        rng = np.random.default_rng(13)
        src, tgt = random_pair(rng, 60, 60, 4, 4)
        cfg = EvalConfig(k=1, sample_size=60, seed=99, corr_pair_budget=1000)
        assert 60 * 60 > cfg.corr_pair_budget
        a = corr_baseline(src, tgt, cfg)
        b = corr_baseline(src, tgt, cfg)
        assert a == b
        other = corr_baseline(
            src, tgt, EvalConfig(k=1, sample_size=60, seed=100, corr_pair_budget=1000)
        )
        assert a != other  # different pair sample

    def test_constant_distances_error(self):
        text = np.eye(3, dtype=np.float32)
        src = dataset_from_arrays(text, text, "src", "s")
        tgt = dataset_from_arrays(text, text, "tgt", "t")
        # every cross pair is either orthogonal or identical; with distinct
        # rows only orthogonal pairs repeat the same distance
        sub_src = src.take(np.array([0]))
        sub_tgt = tgt.take(np.array([1, 2]))
        with pytest.raises(DataError, match="constant"):
            corr_baseline(sub_src, sub_tgt, EvalConfig(k=1, sample_size=1))


class TestTraces:
    def test_export_csv(self, tmp_path):
        ds = make_dataset(6, 4, 5, seed=14)
        recall, traces = backretrieval(ds, ds, EvalConfig(k=1, sample_size=6))
        out = tmp_path / "traces.csv"
        export_traces(out, traces, ds.text.ids, ds.text.ids)
        with open(out, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["query_id", "retrieved_target_id", "back_rank"]
        assert len(rows) == 7
        assert rows[1] == ["r0", "r0", "1"]

    def test_trace_fields(self):
        t = RetrievalTrace(query_index=3, retrieved_target_index=7, back_rank=2)
        assert t.query_index == 3 and t.back_rank == 2


class TestModelScore:
    def test_range_validation(self):
        with pytest.raises(DataError, match="out of range"):
            ModelScore("m", ("a", "b"), xlr=1.5, bkr=0.5, corr=0.0)

    def test_valid(self):
        s = ModelScore("m", ("a", "b"), xlr=1.0, bkr=0.0, corr=-0.5)
        assert s.direction == ("a", "b")
