"""Sampling and norm access to ``x = A^T y`` from a sparse description.

For ``x = sum_i y_i A_{i*}`` over the ``k`` rows in the support of ``y``,
the vector ``v~`` with ``v~_j^2 = k sum_i y_i^2 A_{ij}^2`` dominates ``x``
entrywise (Cauchy-Schwarz) and is easy to sample from in two stages:
pick ``i`` with probability proportional to ``y_i^2 ||A_i||^2``, then ``j``
from the length-squared distribution of row ``i``.  Rejection sampling with
acceptance probability ``x_j^2 / v~_j^2`` then yields exact draws from
``D_x``; the expected number of proposals is the oversampling factor
``phi = ||v~||^2 / ||x||^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import EmptyDistributionError, RejectedInputError, SamplingFailureError
from .solvers.types import SparseDescription
from .sqcore import VectorSQ

__all__ = [
    "OversampledAccess",
    "NormEstimate",
    "query_solution_entry",
    "build_oversampled_access",
    "rejection_sample",
    "rejection_sample_many",
    "bootstrap_phi",
    "estimate_norm",
    "measure_phi",
]

# estimates of ||x|| at or below this fraction of ||v~|| are treated as cancellation
DEGENERATE_RATIO = 1e-8


@dataclass(frozen=True, eq=False)
class OversampledAccess:
    description: SparseDescription
    k: int
    combo_weights: VectorSQ
    tilde_norm_sq: float
    phi_hat: float | None = None

    def with_phi_hat(self, phi_hat) -> "OversampledAccess":
        return replace(self, phi_hat=float(phi_hat))

    # ------------------------------------------------------------------
    def _rows_block(self, cols):
        """``A[support][:, cols]`` (identity basis: indicator block)."""
        desc = self.description
        cols = np.asarray(cols, dtype=np.int64)
        if desc.matrix is None:
            return (desc.support[:, None] == cols[None, :]).astype(np.float64)
        return desc.matrix.block(desc.support, cols)

    def x_and_tilde_sq(self, cols):
        """``(x_j, v~_j^2)`` for each column in ``cols``; O(k) work per column."""
        block = self._rows_block(cols)
        lam = self.description.values
        x = lam @ block
        tilde = self.k * ((lam * lam) @ (block * block))
        return x, tilde

    def tilde_entry_sq(self, j) -> float:
        return float(self.x_and_tilde_sq([j])[1][0])

    def propose(self, rng, size) -> np.ndarray:
        """``size`` independent draws from ``D_{v~}`` (two-stage).

        Stage one picks a support slot from ``combo_weights``; stage two
        inverts the chosen row's cumulative distribution, shifted by the
        slot number so that all rows share one sorted table.
        """
        desc = self.description
        slots = self.combo_weights.sample_many(rng, size)
        if desc.matrix is None:
            return desc.support[slots]
        table, offsets, last, cols = self._row_table
        u = slots + rng.random(size)
        pos = np.searchsorted(table, u, side="right")
        pos = np.clip(pos, offsets[slots], last[slots])
        return cols[pos]

    @cached_property
    def _row_table(self):
        desc = self.description
        rows = desc.matrix.rows
        parts, colparts, offsets, last = [], [], [], []
        start = 0
        for slot, i in enumerate(desc.support.tolist()):
            row = rows[i]
            w = row.stored_values ** 2
            cdf = np.cumsum(w)
            total = cdf[-1] if cdf.size else 0.0
            parts.append(slot + (cdf / total if total > 0 else np.zeros_like(cdf)))
            colparts.append(row.stored_indices)
            offsets.append(start)
            nz = np.flatnonzero(w)
            last.append(start + (int(nz[-1]) if nz.size else 0))
            start += w.size
        return (np.concatenate(parts), np.array(offsets), np.array(last),
                np.concatenate(colparts).astype(np.int64))

    def acceptance(self, cols) -> np.ndarray:
        """Acceptance probabilities ``x_j^2 / v~_j^2`` for proposed columns.

        Ratios are memoized per column, so each column costs O(k) queries
        once.
        """
        cols = np.asarray(cols, dtype=np.int64)
        cache = self._ratio_cache
        todo = np.unique(cols[np.isnan(cache[cols])])
        if todo.size:
            x, tilde = self.x_and_tilde_sq(todo)
            ratio = np.zeros(todo.size)
            nz = tilde > 0
            ratio[nz] = np.minimum(1.0, x[nz] ** 2 / tilde[nz])
            cache[todo] = ratio
        return cache[cols]

    @cached_property
    def _ratio_cache(self) -> np.ndarray:
        return np.full(self.description.n, np.nan)


@dataclass(frozen=True)
class NormEstimate:
    value: float
    degenerate: bool
    phi_hat: float
    groups: int
    group_size: int


def query_solution_entry(desc: SparseDescription, j) -> float:
    """``x_j = sum_{i in supp(y)} y_i A_{i,j}``."""
    return desc.query(j)


def build_oversampled_access(desc: SparseDescription, phi_hat=None) -> OversampledAccess:
    """Oversampled access to ``x = A^T y`` from its sparse description."""
    k = len(desc)
    if k == 0:
        raise EmptyDistributionError("description has empty support")
    if desc.matrix is None:
        norms = np.ones(k)
    else:
        norms = np.sqrt(desc.matrix.row_norms_sq[desc.support])
    combo = VectorSQ(np.abs(desc.values) * norms)
    if combo.total_weight == 0.0:
        raise EmptyDistributionError("all coefficients of the description vanish")
    tilde_norm_sq = k * combo.total_weight
    return OversampledAccess(desc, k, combo, tilde_norm_sq,
                             None if phi_hat is None else float(phi_hat))


def measure_phi(oa: OversampledAccess, norm_of_x) -> float:
    """``phi = k sum_i ||y_i A_i||^2 / ||x||^2``."""
    if norm_of_x <= 0:
        raise RejectedInputError("norm_of_x must be positive")
    return oa.tilde_norm_sq / float(norm_of_x) ** 2


def bootstrap_phi(oa: OversampledAccess, rng, accepts=36, max_attempts=10**7, batch=4096) -> float:
    """Coarse upper estimate of ``phi`` from the empirical acceptance rate.

    Proposes until ``accepts`` acceptances (inverse binomial sampling, about
    17% relative error at the default) and returns 1.5x the observed
    attempts per acceptance.  Raises :class:`SamplingFailureError` if
    ``max_attempts`` pass without enough acceptances.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    got = 0
    tried = 0
    while got < accepts:
        if tried >= max_attempts:
            raise SamplingFailureError(
                f"only {got} acceptances in {tried} proposals; x is near zero")
        cols = oa.propose(rng, batch)
        hits = np.flatnonzero(rng.random(batch) < oa.acceptance(cols))
        if got + hits.size >= accepts:
            tried += int(hits[accepts - got - 1]) + 1
            got = accepts
        else:
            got += hits.size
            tried += batch
    return max(1.0, 1.5 * tried / got)


def _ensure_phi_hat(oa, rng):
    if oa.phi_hat is not None:
        return oa.phi_hat
    return bootstrap_phi(oa, rng)


def _attempt_cap(phi_hat, delta):
    return math.ceil(10.0 * phi_hat * math.log(1.0 / delta))


def rejection_sample(oa: OversampledAccess, rng, delta=0.01):
    """One index from ``D_x``; returns ``(index, attempts)``.

    Gives up with :class:`SamplingFailureError` after
    ``ceil(10 phi_hat ln(1/delta))`` proposals.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    cap = _attempt_cap(_ensure_phi_hat(oa, rng), delta)
    for attempt in range(1, cap + 1):
        j = int(oa.propose(rng, 1)[0])
        if rng.random() < oa.acceptance([j])[0]:
            return j, attempt
    raise SamplingFailureError(f"no acceptance within {cap} proposals")


def rejection_sample_many(oa: OversampledAccess, rng, size, delta=0.01, batch=None):
    """``size`` independent draws from ``D_x`` by batched rejection sampling.

    Returns ``(indices, total_attempts)``.  The overall proposal budget is
    ``size * ceil(10 phi_hat ln(1/delta))``.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    phi_hat = _ensure_phi_hat(oa, rng)
    budget = size * _attempt_cap(phi_hat, delta)
    batch = batch or max(1024, min(1 << 20, int(1.2 * size * phi_hat)))
    out = []
    got = 0
    attempts = 0
    while got < size:
        if attempts >= budget:
            raise SamplingFailureError(f"{got}/{size} samples after {attempts} proposals")
        cols = oa.propose(rng, batch)
        keep = rng.random(batch) < oa.acceptance(cols)
        hits = np.flatnonzero(keep)
        need = size - got
        if hits.size >= need:
            attempts += int(hits[need - 1]) + 1
            out.append(cols[hits[:need]])
            got = size
        else:
            attempts += batch
            out.append(cols[hits])
            got += hits.size
    return np.concatenate(out), attempts


def estimate_norm(oa: OversampledAccess, epsilon, delta, rng) -> NormEstimate:
    """Median-of-means estimate of ``||x||``.

    ``ceil(6 ln(1/delta))`` groups of ``ceil(9 phi_hat / epsilon^2)``
    proposals each; a group mean of ``x_j^2 / v~_j^2`` estimates
    ``||x||^2 / ||v~||^2``.  The median group mean times ``||v~||^2`` is
    square-rooted.  A result at or below ``DEGENERATE_RATIO * ||v~||``
    (rows cancelling) is flagged as degenerate instead of raising.
    """
    if not (0.0 < epsilon < 1.0 and 0.0 < delta < 1.0):
        raise RejectedInputError("epsilon and delta must lie in (0, 1)")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    if oa.phi_hat is None:
        try:
            phi_hat = bootstrap_phi(oa, rng)
        except SamplingFailureError:
            return NormEstimate(0.0, True, math.inf, 0, 0)
    else:
        phi_hat = oa.phi_hat
    groups = math.ceil(6.0 * math.log(1.0 / delta))
    size = math.ceil(9.0 * phi_hat / epsilon ** 2)
    means = np.empty(groups)
    chunk = 1 << 18
    for g in range(groups):
        total = 0.0
        left = size
        while left:
            n = min(left, chunk)
            total += float(oa.acceptance(oa.propose(rng, n)).sum())
            left -= n
        means[g] = total / size
    value = math.sqrt(float(np.median(means)) * oa.tilde_norm_sq)
    degenerate = value <= DEGENERATE_RATIO * math.sqrt(oa.tilde_norm_sq)
    return NormEstimate(value, degenerate, phi_hat, groups, size)
