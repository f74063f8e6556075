import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sqsolve import oracle
from sqsolve.errors import EmptyDistributionError, RejectedInputError
from sqsolve.sqcore import (
    VectorSQ,
    build_matrix_sq,
    build_vector_sq,
    query_entry,
    query_norm,
    sample_column,
    sample_index,
    sample_row,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
# magnitudes whose squares neither underflow nor overflow
moderate = st.one_of(st.just(0.0), st.floats(1e-100, 100).flatmap(lambda x: st.sampled_from([x, -x])))
vectors = arrays(np.float64, st.integers(1, 200), elements=finite)


# --- VectorSQ construction -------------------------------------------------

def test_single_support_vector_is_point_mass():
    sq = build_vector_sq([0.0, 0.0, 5.0])
    assert query_norm(sq) == 5.0
    rng = np.random.default_rng(0)
    assert {sample_index(sq, rng) for _ in range(200)} == {2}
    assert set(sq.sample_many(rng, 1000).tolist()) == {2}


def test_three_four_vector():
    sq = build_vector_sq([3.0, 4.0])
    assert sq.probability(0) == pytest.approx(0.36, abs=1e-15)
    assert sq.probability(1) == pytest.approx(0.64, abs=1e-15)
    assert query_norm(sq) == 5.0
    assert query_entry(sq, 1) == 4.0


def test_one_two_two_tree_weights():
    sq = build_vector_sq([1.0, 2.0, 2.0])
    assert sq.total_weight == 9.0
    assert [sq.weight(i) for i in range(3)] == [1.0, 4.0, 4.0]
    np.testing.assert_allclose(sq.probabilities(), [1 / 9, 4 / 9, 4 / 9], rtol=1e-15)


def test_random_vector_sampling_tv():
    rng = np.random.default_rng(1)
    v = rng.standard_normal(64)
    sq = build_vector_sq(v)
    draws = sq.sample_many(np.random.default_rng(2), 100_000)
    emp = np.bincount(draws, minlength=64) / draws.size
    assert oracle.tv_distance(emp, oracle.exact_distribution(v)) <= 0.02


def test_uniform_vector_chi_square():
    sq = build_vector_sq([1.0, 1.0, 1.0, 1.0])
    draws = sq.sample_many(np.random.default_rng(3), 100_000)
    counts = np.bincount(draws, minlength=4)
    assert oracle.chi_square_pvalue(counts, np.full(4, 25_000.0)) > 1e-3


def test_single_draw_descent_matches_distribution():
    v = np.array([0.5, 0.0, 2.0, 1.0, 0.0, 3.0])
    sq = build_vector_sq(v)
    rng = np.random.default_rng(4)
    draws = np.array([sq.sample(rng) for _ in range(40_000)])
    assert not np.isin(draws, [1, 4]).any()
    counts = np.bincount(draws, minlength=6)
    p = oracle.exact_distribution(v)
    keep = p > 0
    assert oracle.chi_square_pvalue(counts[keep], p[keep] * draws.size) > 1e-3


def test_point_mass_e1():
    sq = build_vector_sq([1.0, 0.0, 0.0])
    assert set(sq.sample_many(np.random.default_rng(0), 500).tolist()) == {0}
    assert query_entry(sq, 1) == 0.0


def test_sample_counts_match_distribution():
    v = np.arange(1.0, 9.0)
    sq = build_vector_sq(v)
    counts = sq.sample_counts(np.random.default_rng(5), 200_000)
    assert counts.sum() == 200_000
    assert oracle.chi_square_pvalue(counts, oracle.exact_distribution(v) * 200_000) > 1e-3


def test_same_seed_same_sequence():
    sq = build_vector_sq(np.random.default_rng(6).standard_normal(64))
    a = sq.sample_many(np.random.default_rng(7), 1000)
    b = sq.sample_many(np.random.default_rng(7), 1000)
    np.testing.assert_array_equal(a, b)
    r1 = np.random.default_rng(8)
    r2 = np.random.default_rng(8)
    assert [sq.sample(r1) for _ in range(50)] == [sq.sample(r2) for _ in range(50)]


def test_non_finite_rejected():
    with pytest.raises(RejectedInputError):
        build_vector_sq([1.0, np.nan])
    with pytest.raises(RejectedInputError):
        build_vector_sq([np.inf])
    with pytest.raises(RejectedInputError):
        build_vector_sq([])


def test_zero_vector_norm_and_sampling():
    sq = build_vector_sq([0.0, 0.0])
    assert query_norm(sq) == 0.0
    with pytest.raises(EmptyDistributionError):
        sample_index(sq, np.random.default_rng(0))
    with pytest.raises(EmptyDistributionError):
        sq.sample_many(np.random.default_rng(0), 3)


def test_out_of_range_query():
    sq = build_vector_sq([3.0, 4.0])
    with pytest.raises(IndexError):
        query_entry(sq, 2)
    with pytest.raises(IndexError):
        query_entry(sq, -1)


def test_long_vector_norm_against_compensated_sum():
    v = np.random.default_rng(9).standard_normal(1000) * 1e3
    ref = math.sqrt(math.fsum(float(x) * float(x) for x in v))
    assert query_norm(build_vector_sq(v)) == pytest.approx(ref, rel=1e-12)


def test_million_entry_total_weight():
    v = np.random.default_rng(10).standard_normal(1_000_000)
    sq = build_vector_sq(v)
    assert sq.total_weight == pytest.approx(math.fsum((v * v).tolist()), rel=1e-12)


def test_sparse_vector_storage():
    sq = VectorSQ([2.0, -1.0], indices=[3, 7], dim=10)
    assert sq.dim == 10
    assert query_entry(sq, 3) == 2.0
    assert query_entry(sq, 5) == 0.0
    assert set(sq.sample_many(np.random.default_rng(0), 200).tolist()) <= {3, 7}
    np.testing.assert_array_equal(sq.entries, np.eye(10)[3] * 2 - np.eye(10)[7])


def test_update_keeps_tree_consistent():
    sq = build_vector_sq([1.0, 2.0, 3.0, 4.0, 5.0])
    sq.update(2, 0.0)
    sq.update(4, -1.0)
    assert sq.total_weight == pytest.approx(1 + 4 + 16 + 1)
    np.testing.assert_allclose(sq.probabilities(), np.array([1, 4, 0, 16, 1]) / 22)
    assert 2 not in set(sq.sample_many(np.random.default_rng(0), 2000).tolist())


@settings(max_examples=60, deadline=None)
@given(vectors)
def test_roundtrip_prefix_and_total(v):
    sq = build_vector_sq(v)
    np.testing.assert_array_equal([query_entry(sq, i) for i in range(v.size)], v)
    sq_w = v * v
    assert sq.total_weight == pytest.approx(math.fsum(sq_w.tolist()), rel=1e-12, abs=1e-300)
    for i in range(v.size):
        assert sq.prefix(i) == pytest.approx(math.fsum(sq_w[: i + 1].tolist()), rel=1e-12, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(vectors)
def test_interval_widths_equal_weights(v):
    sq = build_vector_sq(v)
    if sq.total_weight == 0:
        return
    lo_prev = 0.0
    for i in range(v.size):
        lo, hi = sq.interval(i)
        assert lo == pytest.approx(lo_prev, rel=1e-12, abs=1e-300)
        assert hi - lo == pytest.approx(v[i] ** 2, rel=1e-9, abs=1e-300 + 1e-12 * sq.total_weight)
        lo_prev = hi
    probs = sq.probabilities()
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(vectors, st.integers(0, 2**32 - 1))
def test_samples_never_hit_zero_entries(v, seed):
    sq = build_vector_sq(v)
    if sq.total_weight == 0:
        return
    draws = sq.sample_many(np.random.default_rng(seed), 500)
    assert np.all(v[draws] != 0)


# --- MatrixSQ ----------------------------------------------------------------

def test_identity_matrix_uniform():
    msq = build_matrix_sq(np.eye(3))
    np.testing.assert_allclose(msq.row_norm_vector.probabilities(), np.full(3, 1 / 3))
    np.testing.assert_allclose(msq.column_norm_vector.probabilities(), np.full(3, 1 / 3))
    assert msq.frobenius == pytest.approx(math.sqrt(3))


def test_diag_one_two_rows():
    msq = build_matrix_sq(np.diag([1.0, 2.0]))
    np.testing.assert_allclose(msq.row_norm_vector.probabilities(), [0.2, 0.8])
    draws = np.array([sample_row(msq, np.random.default_rng(s)) for s in range(4000)])
    assert abs(draws.mean() - 0.8) < 0.03


def test_single_nonzero_column_point_mass():
    A = np.zeros((4, 3))
    A[:, 1] = [1.0, -2.0, 0.5, 3.0]
    msq = build_matrix_sq(A)
    rng = np.random.default_rng(0)
    assert {sample_column(msq, rng) for _ in range(100)} == {1}
    assert msq.min_col_norm_sq == pytest.approx(1 + 4 + 0.25 + 9)


def test_frobenius_matches_singular_values():
    A = np.random.default_rng(11).standard_normal((20, 10))
    msq = build_matrix_sq(A)
    s = oracle.spectral_summary(A).singular_values
    assert msq.frobenius_sq == pytest.approx(float(np.sum(s * s)), rel=1e-8)


def test_row_and_column_sampling_tv():
    A = np.random.default_rng(12).standard_normal((10, 10))
    msq = build_matrix_sq(A)
    rows = msq.sample_rows(np.random.default_rng(13), 100_000)
    cols = msq.sample_columns(np.random.default_rng(14), 100_000)
    p_row = (A * A).sum(axis=1) / (A * A).sum()
    p_col = (A * A).sum(axis=0) / (A * A).sum()
    assert oracle.tv_distance(np.bincount(rows, minlength=10) / 1e5, p_row) <= 0.02
    assert oracle.tv_distance(np.bincount(cols, minlength=10) / 1e5, p_col) <= 0.02


def test_all_zero_matrix_rejected():
    with pytest.raises(EmptyDistributionError):
        build_matrix_sq(np.zeros((3, 2)))


def test_non_finite_matrix_rejected():
    with pytest.raises(RejectedInputError):
        build_matrix_sq(np.array([[1.0, np.nan]]))


def test_sparse_layout_agrees_with_dense():
    rng = np.random.default_rng(15)
    S = sp.random(30, 12, density=0.2, random_state=rng, format="csr")
    dense = build_matrix_sq(S.toarray())
    sparse = build_matrix_sq(S)
    assert sparse.csr is not None and dense.dense is not None
    np.testing.assert_allclose(sparse.row_norms_sq, dense.row_norms_sq, rtol=1e-14)
    np.testing.assert_allclose(sparse.col_norms_sq, dense.col_norms_sq, rtol=1e-14)
    assert sparse.row_sparsity == int(np.diff(S.indptr).max())
    for i in range(30):
        cols, vals = sparse.row_entries(i)
        np.testing.assert_array_equal(S.toarray()[i, cols], vals)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 12)),
              elements=moderate))
def test_matrix_invariants(A):
    if not np.any(A):
        return
    msq = build_matrix_sq(A)
    F2 = msq.frobenius_sq
    assert math.fsum(msq.row_norms_sq.tolist()) == pytest.approx(F2, rel=1e-10)
    assert math.fsum(msq.col_norms_sq.tolist()) == pytest.approx(F2, rel=1e-10)
    assert msq.row_sparsity >= int(np.count_nonzero(A, axis=1).max())
    p = msq.row_norm_vector.probabilities()
    np.testing.assert_allclose(p, (A * A).sum(axis=1) / (A * A).sum(), atol=1e-12)
