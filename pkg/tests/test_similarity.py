import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from backeval.errors import DataError
from backeval.similarity import (
    cosine,
    for_each_block,
    matched_ranks_units,
    pairwise,
    rank_of,
    top1_index,
    top1_indices_units,
    unit_rows,
)

from conftest import make_matrix


class TestCosine:
    def test_orthogonal(self):
        assert cosine([1, 0], [0, 1]) == 0.0

    def test_collinear(self):
        assert cosine([1, 2], [2, 4]) == pytest.approx(1.0, abs=1e-12)

    def test_collinear_unit_vectors_exact(self):
        assert cosine([1.0, 0.0], [1.0, 0.0]) == 1.0

    def test_analytic_sqrt_half(self):
        assert cosine([1, 0], [1, 1]) == pytest.approx(0.70710678, abs=1e-8)

    def test_dim_mismatch(self):
        with pytest.raises(DataError, match="dimension mismatch"):
            cosine([1, 0], [1, 0, 0])

    def test_zero_norm(self):
        with pytest.raises(DataError, match="near-zero"):
            cosine([0, 0], [1, 0])

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        st.floats(0.01, 100),
    )
    def test_symmetry_and_scale_invariance(self, u, v, c):
        if oracles.norm(u) < 1e-3 or oracles.norm(v) < 1e-3:
            return
        assert cosine(u, v) == cosine(v, u)
        scaled = [c * x for x in u]
        assert cosine(scaled, v) == pytest.approx(cosine(u, v), abs=1e-9)
        assert -1.0 <= cosine(u, v) <= 1.0


class TestTop1:
    def test_exact_match_present(self):
        assert top1_index([1, 0], [[0, 1], [1, 0], [1, 1]]) == 1

    def test_tie_break_lowest_index(self):
        assert top1_index([1, 1], [[1, 1], [2, 2]]) == 0

    def test_empty_candidates(self):
        with pytest.raises(DataError, match="empty"):
            top1_index([1.0, 0.0], np.zeros((0, 2)))

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(1, 51))
            d = int(rng.integers(2, 9))
            cands = rng.standard_normal((n, d))
            query = rng.standard_normal(d)
            assert top1_index(query, cands) == oracles.top1(query, cands)


class TestRankOf:
    def test_unique_argmax_is_rank_one(self):
        cands = [[1, 0], [0, 1], [-1, 0]]
        assert rank_of(0, [2, 0.1], cands) == 1

    def test_all_identical_positional_rank(self):
        cands = [[1.0, 1.0]] * 6
        assert rank_of(4, [1.0, 1.0], cands) == 5

    def test_out_of_bounds(self):
        with pytest.raises(DataError, match="out of bounds"):
            rank_of(3, [1, 0], [[1, 0]])

    def test_matches_sort_oracle_on_random_instances(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            n = int(rng.integers(1, 51))
            d = int(rng.integers(2, 9))
            cands = rng.standard_normal((n, d))
            query = rng.standard_normal(d)
            t = int(rng.integers(0, n))
            assert rank_of(t, query, cands) == oracles.rank(t, query, cands)

    def test_rank_of_top1_is_one(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            cands = rng.standard_normal((30, 5))
            query = rng.standard_normal(5)
            assert rank_of(top1_index(query, cands), query, cands) == 1


class TestPairwise:
    def test_identity_like(self):
        out = pairwise(np.eye(2), np.eye(2))
        assert np.allclose(out, np.eye(2))

    def test_single_pair_equals_cosine(self):
        u = [0.3, -1.2, 0.5]
        v = [1.0, 0.4, -0.2]
        out = pairwise([u], [v])
        assert out.shape == (1, 1)
        assert out[0, 0] == cosine(u, v)

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((30, 16))
        b = rng.standard_normal((30, 16))
        got = pairwise(a, b)
        for i in range(a.shape[0]):
            for j in range(b.shape[0]):
                assert got[i, j] == pytest.approx(oracles.cosine(a[i], b[j]), abs=1e-6)

    def test_transpose_consistency(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((12, 7))
        b = rng.standard_normal((9, 7))
        assert np.allclose(pairwise(a, b), pairwise(b, a).T, atol=1e-6)

    def test_dim_mismatch(self):
        with pytest.raises(DataError, match="dimension mismatch"):
            pairwise(np.ones((2, 3)), np.ones((2, 4)))

    def test_values_in_range(self):
        rng = np.random.default_rng(5)
        out = pairwise(rng.standard_normal((20, 4)), rng.standard_normal((20, 4)))
        assert np.all(out <= 1.0) and np.all(out >= -1.0)


class TestDeterminism:
    """Blocking and worker count never change a single bit of output."""

    def test_block_size_invariance(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((101, 19))
        b = rng.standard_normal((77, 19))
        ref = pairwise(a, b, block_rows=101)
        for block_rows in (1, 3, 32, 100):
            assert np.array_equal(pairwise(a, b, block_rows=block_rows), ref)

    def test_worker_invariance(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((200, 24))
        b = rng.standard_normal((150, 24))
        ref = pairwise(a, b, workers=1, block_rows=16)
        for workers in (2, 4, 8):
            assert np.array_equal(pairwise(a, b, workers=workers, block_rows=16), ref)

    def test_batched_ops_match_scalar_ops(self):
        rng = np.random.default_rng(8)
        queries = rng.standard_normal((40, 6))
        cands = rng.standard_normal((40, 6))
        uq = unit_rows(queries)
        uc = unit_rows(cands)
        tops = top1_indices_units(uq, uc, block_rows=7)
        ranks = matched_ranks_units(uq, uc, block_rows=7)
        for i in range(40):
            assert tops[i] == top1_index(queries[i], cands)
            assert ranks[i] == rank_of(i, queries[i], cands)

    def test_for_each_block_covers_all_rows(self):
        rng = np.random.default_rng(9)
        uq = unit_rows(rng.standard_normal((23, 5)))
        uc = unit_rows(rng.standard_normal((11, 5)))
        seen = []

        def handle(start, stop, block):
            assert block.shape == (stop - start, 11)
            seen.append((start, stop))

        for_each_block(uq, uc, handle, block_rows=4)
        assert sorted(seen) == [(i, min(i + 4, 23)) for i in range(0, 23, 4)]
