"""Sampling-and-query (SQ) access to vectors and matrices.

A :class:`VectorSQ` stores a real vector together with a binary prefix-sum
tree over its squared entries.  The tree gives O(log n) draws from the
length-squared distribution ``D_v(i) = v_i**2 / ||v||**2``, O(log n) prefix
queries and O(log n) single-entry updates.  A :class:`MatrixSQ` bundles one
VectorSQ per row with VectorSQs over the row norms and the column norms.

All sampling routines take an explicit ``numpy.random.Generator``; nothing
here touches global random state.
"""
from __future__ import annotations

import math
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import EmptyDistributionError, RejectedInputError

__all__ = [
    "VectorSQ",
    "MatrixSQ",
    "build_vector_sq",
    "build_matrix_sq",
    "sample_index",
    "query_entry",
    "query_norm",
    "sample_row",
    "sample_column",
]


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


class VectorSQ:
    """Length-squared sampling, entry query and norm query for a real vector.

    Parameters
    ----------
    values : array_like
        Stored entries.  For a dense vector these are all ``n`` entries.
    indices : array_like of int, optional
        Strictly increasing positions of ``values`` inside a vector of length
        ``dim``.  Positions not listed are zero.  Omit for dense vectors.
    dim : int, optional
        Logical length when ``indices`` is given.
    """

    def __init__(self, values, indices=None, dim=None):
        values = np.array(values, dtype=np.float64).ravel()
        if indices is None:
            if values.size < 1:
                raise RejectedInputError("vector must have length >= 1")
            dim = values.size
        else:
            indices = np.array(indices, dtype=np.int64).ravel()
            if indices.shape != values.shape:
                raise RejectedInputError("indices and values differ in length")
            if dim is None or dim < 1:
                raise RejectedInputError("sparse vector needs dim >= 1")
            if indices.size and (indices[0] < 0 or indices[-1] >= dim
                                 or np.any(np.diff(indices) <= 0)):
                raise RejectedInputError("indices must be strictly increasing within [0, dim)")
        if not np.all(np.isfinite(values)):
            raise RejectedInputError("vector contains non-finite entries")

        values.setflags(write=False)
        if indices is not None:
            indices.setflags(write=False)
        self._values = values
        self._indices = indices
        self.dim = int(dim)

        nleaf = max(values.size, 1)
        size = 1
        while size < nleaf:
            size *= 2
        self._size = size
        self._depth = size.bit_length() - 1
        tree = np.zeros(2 * size)
        tree[size:size + values.size] = values * values
        lo = size // 2
        while lo >= 1:
            tree[lo:2 * lo] = tree[2 * lo:4 * lo:2] + tree[2 * lo + 1:4 * lo:2]
            lo //= 2
        self._tree = tree
        self._probs = None
        self._cdf = None
        self.total_weight = math.fsum(tree[size:size + values.size])

    # ------------------------------------------------------------------
    @property
    def norm(self) -> float:
        return math.sqrt(self.total_weight)

    @property
    def entries(self) -> np.ndarray:
        """Dense copy of the logical vector."""
        if self._indices is None:
            return self._values.copy()
        out = np.zeros(self.dim)
        out[self._indices] = self._values
        return out

    @property
    def stored_values(self) -> np.ndarray:
        return self._values

    @property
    def stored_indices(self) -> np.ndarray:
        if self._indices is None:
            return np.arange(self.dim)
        return self._indices

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self._values))

    def __len__(self) -> int:
        return self.dim

    def __repr__(self) -> str:
        kind = "dense" if self._indices is None else "sparse"
        return f"VectorSQ(dim={self.dim}, {kind}, norm={self.norm:.6g})"

    # ------------------------------------------------------------------
    def _slot(self, i):
        """Leaf slot of logical index ``i`` or None when ``i`` is a structural zero."""
        if not 0 <= i < self.dim:
            raise IndexError(f"index {i} out of range for vector of length {self.dim}")
        if self._indices is None:
            return i
        pos = int(np.searchsorted(self._indices, i))
        if pos < self._indices.size and self._indices[pos] == i:
            return pos
        return None

    def _logical(self, slots):
        if self._indices is None:
            return slots
        return self._indices[slots]

    def query(self, i) -> float:
        """Entry ``v_i`` exactly as stored."""
        i = int(i)
        slot = self._slot(i)
        return 0.0 if slot is None else float(self._values[slot])

    def weight(self, i) -> float:
        """Squared magnitude held by the tree leaf for index ``i``."""
        slot = self._slot(int(i))
        return 0.0 if slot is None else float(self._tree[self._size + slot])

    def _prefix_slots(self, count):
        # sum of the first `count` leaves, assembled from O(log n) tree nodes
        total = 0.0
        lo, hi = self._size, self._size + count
        while lo < hi:
            if lo & 1:
                total += self._tree[lo]
                lo += 1
            if hi & 1:
                hi -= 1
                total += self._tree[hi]
            lo //= 2
            hi //= 2
        return total

    def prefix(self, i) -> float:
        """Tree prefix sum ``sum_{j <= i} v_j**2``."""
        i = int(i)
        if not 0 <= i < self.dim:
            raise IndexError(f"index {i} out of range for vector of length {self.dim}")
        if self._indices is None:
            count = i + 1
        else:
            count = int(np.searchsorted(self._indices, i, side="right"))
        return self._prefix_slots(count)

    def interval(self, i):
        """Half-open weight interval ``[lo, hi)`` that maps to index ``i`` when sampling."""
        hi = self.prefix(i)
        lo = self.prefix(i - 1) if i > 0 else 0.0
        return lo, hi

    def probability(self, i) -> float:
        if self.total_weight == 0.0:
            raise EmptyDistributionError("zero vector has no sampling distribution")
        return self.weight(i) / self._tree[1]

    def probabilities(self) -> np.ndarray:
        """Dense vector of sampling probabilities read from the tree leaves."""
        if self.total_weight == 0.0:
            raise EmptyDistributionError("zero vector has no sampling distribution")
        if self._probs is not None:
            return self._probs.copy()
        p = np.zeros(self.dim)
        leaves = self._tree[self._size:self._size + self._values.size]
        if self._indices is None:
            p[:] = leaves
        else:
            p[self._indices] = leaves
        p /= leaves.sum()
        p.setflags(write=False)
        self._probs = p
        return p.copy()

    # ------------------------------------------------------------------
    def _check_nonempty(self):
        if self.total_weight == 0.0:
            raise EmptyDistributionError("cannot sample from a zero vector")

    def sample(self, rng) -> int:
        """One index drawn from D_v."""
        self._check_nonempty()
        rng = _as_rng(rng)
        tree = self._tree
        u = rng.random() * tree[1]
        node = 1
        for _ in range(self._depth):
            left = tree[2 * node]
            # never step into a zero-weight subtree, even when rounding pushes u past the end
            if u >= left and tree[2 * node + 1] > 0.0:
                u -= left
                node = 2 * node + 1
            else:
                node = 2 * node
        slot = node - self._size
        return int(self._logical(slot))

    def sample_many(self, rng, size) -> np.ndarray:
        """``size`` independent indices drawn from D_v.

        Uses binary search over cached cumulative weights, the batched form
        of the tree descent in :meth:`sample`.
        """
        self._check_nonempty()
        rng = _as_rng(rng)
        cdf, last = self._cumulative()
        u = rng.random(size) * cdf[-1]
        # u >= cdf[k-1] and u < cdf[k] imply leaf k has positive weight
        slots = np.minimum(np.searchsorted(cdf, u, side="right"), last)
        return np.asarray(self._logical(slots), dtype=np.int64)

    def _cumulative(self):
        if self._cdf is None:
            w = self._tree[self._size:self._size + self._values.size]
            self._cdf = (np.cumsum(w), int(np.flatnonzero(w)[-1]))
        return self._cdf

    def sample_counts(self, rng, d) -> np.ndarray:
        """Multiplicities of each index among ``d`` i.i.d. draws from D_v.

        Equal in law to ``np.bincount(self.sample_many(rng, d), minlength=dim)``
        but costs O(n) instead of O(d log n), which matters when ``d`` is in
        the millions.
        """
        self._check_nonempty()
        rng = _as_rng(rng)
        if self._probs is None:
            self.probabilities()
        return rng.multinomial(int(d), self._probs)

    def update(self, i, value) -> None:
        """Overwrite entry ``i``; O(log n).  Requires exclusive access."""
        value = float(value)
        if not math.isfinite(value):
            raise RejectedInputError("non-finite entry")
        slot = self._slot(int(i))
        if slot is None:
            raise IndexError(f"index {i} is a structural zero of this sparse vector")
        values = self._values.copy()
        values[slot] = value
        values.setflags(write=False)
        self._values = values
        self._probs = None
        self._cdf = None
        node = self._size + slot
        self._tree[node] = value * value
        node //= 2
        while node >= 1:
            self._tree[node] = self._tree[2 * node] + self._tree[2 * node + 1]
            node //= 2
        self.total_weight = math.fsum(self._tree[self._size:self._size + values.size])


class MatrixSQ:
    """SQ access to a real matrix: per-row SQ, row-norm SQ and column-norm SQ.

    Build with :func:`build_matrix_sq`.  Instances are read-only after
    construction and may be shared across threads; each sampler owns its
    random generator.
    """

    def __init__(self, matrix, storage):
        self.storage = storage
        if storage == "sparse":
            csr = sp.csr_matrix(matrix, dtype=np.float64)
            csr.sum_duplicates()
            csr.eliminate_zeros()
            csr.sort_indices()
            self.csr = csr
            self.dense = None
            data, indices, indptr = csr.data, csr.indices, csr.indptr
        else:
            self.dense = np.array(matrix, dtype=np.float64)
            self.dense.setflags(write=False)
            self.csr = None
        m, n = (self.csr.shape if storage == "sparse" else self.dense.shape)
        self.shape = (int(m), int(n))

        values = self.csr.data if storage == "sparse" else self.dense
        if not np.all(np.isfinite(values)):
            raise RejectedInputError("matrix contains non-finite entries")

        rows = []
        row_sq = np.empty(m)
        if storage == "sparse":
            nnz_per_row = np.diff(indptr)
            for i in range(m):
                lo, hi = indptr[i], indptr[i + 1]
                v = VectorSQ(data[lo:hi], indices=indices[lo:hi], dim=n)
                rows.append(v)
                row_sq[i] = v.total_weight
            col_sq = np.bincount(indices, weights=data * data, minlength=n).astype(np.float64)
        else:
            nnz_per_row = np.count_nonzero(self.dense, axis=1)
            for i in range(m):
                v = VectorSQ(self.dense[i])
                rows.append(v)
                row_sq[i] = v.total_weight
            col_sq = np.einsum("ij,ij->j", self.dense, self.dense)

        self.rows = tuple(rows)
        self.row_norms_sq = row_sq
        self.col_norms_sq = col_sq
        self.row_norm_vector = VectorSQ(np.sqrt(row_sq))
        self.column_norm_vector = VectorSQ(np.sqrt(col_sq))
        self.frobenius_sq = math.fsum(row_sq)
        self.frobenius = math.sqrt(self.frobenius_sq)
        self.row_sparsity = int(nnz_per_row.max()) if m else 0
        self.row_nnz = np.asarray(nnz_per_row, dtype=np.int64)
        if self.frobenius_sq == 0.0:
            raise EmptyDistributionError("all-zero matrix has no row or column distribution")
        for arr in (self.row_norms_sq, self.col_norms_sq):
            arr.setflags(write=False)

    def __repr__(self) -> str:
        m, n = self.shape
        return (f"MatrixSQ({m}x{n}, {self.storage}, s={self.row_sparsity}, "
                f"frobenius={self.frobenius:.6g})")

    # ------------------------------------------------------------------
    @property
    def min_col_norm_sq(self) -> float:
        """Smallest squared column norm over columns with nonzero norm."""
        nz = self.col_norms_sq[self.col_norms_sq > 0.0]
        return float(nz.min())

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense.copy()
        return self.csr.toarray()

    def entry(self, i, j) -> float:
        return self.rows[i].query(j)

    def row(self, i) -> np.ndarray:
        """Dense copy of row ``i``."""
        if self.dense is not None:
            return self.dense[i].copy()
        return self.rows[i].entries

    def row_entries(self, i):
        """``(columns, values)`` of the stored entries of row ``i``."""
        if self.dense is not None:
            return np.arange(self.shape[1]), self.dense[i]
        lo, hi = self.csr.indptr[i], self.csr.indptr[i + 1]
        return self.csr.indices[lo:hi], self.csr.data[lo:hi]

    def block(self, rows, cols) -> np.ndarray:
        """Dense sub-block ``A[rows][:, cols]``."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if self.dense is not None:
            return self.dense[np.ix_(rows, cols)]
        return self.csr[rows][:, cols].toarray()

    def matvec(self, x) -> np.ndarray:
        if self.dense is not None:
            return self.dense @ x
        return self.csr @ x

    def rmatvec_rows(self, rows, y) -> np.ndarray:
        """``sum_k y_k * A[rows_k]`` as a dense length-n vector."""
        rows = np.asarray(rows, dtype=np.int64)
        y = np.asarray(y, dtype=np.float64)
        if self.dense is not None:
            return self.dense[rows].T @ y
        return self.csr[rows].T @ y

    # ------------------------------------------------------------------
    def sample_row(self, rng) -> int:
        return self.row_norm_vector.sample(rng)

    def sample_rows(self, rng, size) -> np.ndarray:
        return self.row_norm_vector.sample_many(rng, size)

    def sample_column(self, rng) -> int:
        return self.column_norm_vector.sample(rng)

    def sample_columns(self, rng, size) -> np.ndarray:
        return self.column_norm_vector.sample_many(rng, size)

    # ------------------------------------------------------------------
    # quantities used by the SPD solvers
    @cached_property
    def diagonal(self) -> np.ndarray:
        m, n = self.shape
        if self.dense is not None:
            diag = np.diagonal(self.dense).copy()
        else:
            diag = self.csr.diagonal()
        diag.setflags(write=False)
        return diag

    @cached_property
    def trace(self) -> float:
        return math.fsum(self.diagonal)

    @cached_property
    def diagonal_sq(self) -> VectorSQ:
        """VectorSQ whose sampling law is ``Pr[r] = A_rr / Tr(A)`` (positive diagonal)."""
        return VectorSQ(np.sqrt(np.clip(self.diagonal, 0.0, None)))


def build_vector_sq(v) -> VectorSQ:
    """Build SQ access to the dense vector ``v`` in O(n)."""
    return VectorSQ(v)


def build_matrix_sq(A, layout=None) -> MatrixSQ:
    """Build SQ access to ``A``.

    ``layout`` is ``"dense"`` or ``"sparse"``; by default scipy sparse inputs
    are stored as CSR and everything else densely.
    """
    if layout is None:
        layout = "sparse" if sp.issparse(A) else "dense"
    if layout not in ("dense", "sparse"):
        raise RejectedInputError(f"unknown layout {layout!r}")
    if layout == "dense" and sp.issparse(A):
        A = A.toarray()
    if not sp.issparse(A):
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2 or min(A.shape) < 1:
            raise RejectedInputError("matrix must be two-dimensional with m, n >= 1")
    elif min(A.shape) < 1:
        raise RejectedInputError("matrix must have m, n >= 1")
    return MatrixSQ(A, layout)


def sample_index(sq: VectorSQ, rng) -> int:
    return sq.sample(rng)


def query_entry(sq: VectorSQ, i) -> float:
    return sq.query(i)


def query_norm(sq: VectorSQ) -> float:
    return sq.norm


def sample_row(msq: MatrixSQ, rng) -> int:
    return msq.sample_row(rng)


def sample_column(msq: MatrixSQ, rng) -> int:
    return msq.sample_column(rng)
