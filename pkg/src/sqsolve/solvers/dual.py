"""Kaczmarz on the dual variable ``y`` with ``x = A^T y``.

The exact form is coordinate descent on ``g(y) = ||A^T y||^2 / 2 - b.y``.
The sampled forms replace the inner product ``<A_r, A^T y>`` by a Monte Carlo
estimate over ``d`` columns drawn with ``Pr[j] = ||A_{*j}||^2 / ||A||_F^2``,
so a step only queries ``A`` on the current support of ``y`` and on the
sampled columns.

Row choices for all ``T`` steps are drawn from the generator before any
column draws.  Two solvers given the same seed therefore visit the same rows,
which is what makes paired (primal vs dual, exact vs sampled) runs comparable.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import DegenerateRowError
from ..sqcore import MatrixSQ
from .schedules import (
    compute_d_averaged,
    compute_d_basic,
    compute_q_averaged,
    compute_T_averaged,
    compute_T_basic,
    compute_T_kaczmarz,
)
from .types import IterationTrace, SolverConfig, SparseDescription, as_rhs

__all__ = [
    "dual_kaczmarz_step",
    "dual_kaczmarz_solve",
    "sampled_inner_product",
    "dual_kaczmarz_sampled_step",
    "dual_kaczmarz_sampled_solve",
    "averaged_kaczmarz_sampled_solve",
]


def _column_weights(msq: MatrixSQ) -> np.ndarray:
    # ||A||_F^2 / ||A_{*j}||^2, zero on empty columns (they are never sampled)
    col = msq.col_norms_sq
    w = np.zeros_like(col)
    nz = col > 0.0
    w[nz] = msq.frobenius_sq / col[nz]
    return w


def _sampled_estimates(msq, rows, supp, yvals, counts, d, wcol):
    """Estimates of ``<A~_r, A^T y>`` for each ``r`` in ``rows``.

    ``counts[t, j]`` is the multiplicity of column ``j`` in the sample set of
    row ``rows[t]``.  Only columns sampled at least once are touched.
    """
    out = np.zeros(len(rows))
    if len(supp) == 0:
        return out, 0
    J = np.flatnonzero(counts.any(axis=0))
    xJ = msq.block(supp, J).T @ yvals
    rn = np.sqrt(msq.row_norms_sq[rows])
    AJ = msq.block(rows, J) / rn[:, None]
    out = (counts[:, J] * AJ * (xJ * wcol[J])).sum(axis=1) / d
    return out, 2 * len(supp) * J.size + 3 * len(rows) * J.size


class _DualState:
    """Dense-backed ``y`` that tracks its support, plus optional dense ``x``."""

    def __init__(self, msq, track_x):
        self.msq = msq
        self.y = np.zeros(msq.shape[0])
        self.in_supp = np.zeros(msq.shape[0], dtype=bool)
        self.supp = np.empty(0, dtype=np.int64)
        self.x = np.zeros(msq.shape[1]) if track_x else None

    def add(self, rows, deltas):
        rows = np.atleast_1d(rows)
        deltas = np.atleast_1d(deltas)
        np.add.at(self.y, rows, deltas)
        new = np.unique(rows[~self.in_supp[rows]])
        if new.size:
            self.in_supp[new] = True
            self.supp = np.concatenate([self.supp, new])
        if self.x is not None:
            self.x += self.msq.rmatvec_rows(rows, deltas)

    def x_dense(self):
        if self.x is not None:
            return self.x
        if not self.supp.size:
            return np.zeros(self.msq.shape[1])
        return self.msq.rmatvec_rows(self.supp, self.y[self.supp])

    def lambda_norm_sq(self):
        s = self.supp
        return float(np.dot(self.msq.row_norms_sq[s], self.y[s] ** 2))

    def description(self):
        supp = np.sort(self.supp)
        return SparseDescription(supp, self.y[supp], self.msq, self.msq.shape[0])


def _record(trace, state, msq, b, x_star, mu=math.nan, flops=0):
    x = state.x
    err = math.nan if x_star is None else float(np.linalg.norm(x - x_star))
    trace.record(np.linalg.norm(msq.matvec(x) - b), err, state.supp.size,
                 state.lambda_norm_sq(), mu, flops)


def _early_stop(cfg, k, T, state, msq, b):
    if cfg.tol is None:
        return False
    every = max(1, math.ceil(T / 20))
    if (k + 1) % every:
        return False
    return np.linalg.norm(msq.matvec(state.x_dense()) - b) <= cfg.tol


def _finish(trace, k, T, stopped):
    trace.iterations = k + 1 if stopped else T
    trace.stopped_early = stopped


# ----------------------------------------------------------------------
# exact dual iteration

def dual_kaczmarz_step(msq: MatrixSQ, b, y: SparseDescription, r, rng=None) -> SparseDescription:
    """Exact dual update ``y_r += (b_r - <A_r, A^T y>) / ||A_r||^2``.

    ``rng`` is accepted for signature symmetry with the sampled step and
    ignored.
    """
    r = int(r)
    norm_sq = msq.row_norms_sq[r]
    if norm_sq == 0.0:
        raise DegenerateRowError(f"row {r} is zero")
    x = y.materialize()
    cols, vals = msq.row_entries(r)
    delta = (b[r] - vals @ x[cols]) / norm_sq
    return y.with_increment(r, delta)


def dual_kaczmarz_solve(msq: MatrixSQ, b, cfg: SolverConfig, x_star=None):
    """Exact dual Kaczmarz; ``A^T y_k`` reproduces the primal iterates for the same seed."""
    b = as_rhs(msq, b)
    T = cfg.T if cfg.T is not None else compute_T_kaczmarz(cfg)
    rng = np.random.default_rng(cfg.seed)
    rows = msq.sample_rows(rng, T)
    if np.any(msq.row_norms_sq[rows] == 0.0):
        raise DegenerateRowError("sampled a zero row")
    state = _DualState(msq, cfg.track_trace)
    trace = IterationTrace()
    x_star = None if x_star is None else np.asarray(x_star, dtype=np.float64)
    k, stopped = -1, False
    for k, r in enumerate(rows.tolist()):
        cols, vals = msq.row_entries(r)
        if state.supp.size:
            block = msq.block(state.supp, cols)
            inner = vals @ (block.T @ state.y[state.supp])
        else:
            inner = 0.0
        state.add(r, (b[r] - inner) / msq.row_norms_sq[r])
        if cfg.track_trace:
            _record(trace, state, msq, b, x_star,
                    flops=2 * state.supp.size * cols.size + 2 * cols.size)
        if _early_stop(cfg, k, T, state, msq, b):
            stopped = True
            break
    _finish(trace, k, T, stopped)
    return state.description(), trace


# ----------------------------------------------------------------------
# sampled inner products

def sampled_inner_product(msq: MatrixSQ, r, y: SparseDescription, d, rng, repeats=None):
    """Monte Carlo estimate of ``<A~_r, A^T y>`` with ``A~_r = A_r / ||A_r||``.

    Draws a multiset ``S`` of ``d`` columns from the column-norm distribution
    and returns ``(1/d) sum_{j in S} A~_{r,j} <A_{*j}, y> ||A||_F^2 / ||A_{*j}||^2``.
    The estimate is unbiased.  With ``repeats=N`` an array of ``N``
    independent estimates is returned instead of a float.
    """
    r = int(r)
    if msq.row_norms_sq[r] == 0.0:
        raise DegenerateRowError(f"row {r} is zero")
    d = int(d)
    wcol = _column_weights(msq)
    colvec = msq.column_norm_vector
    if repeats is None:
        counts = colvec.sample_counts(rng, d)[None, :]
        est, _ = _sampled_estimates(msq, [r], y.support, y.values, counts, d, wcol)
        return float(est[0])
    counts = rng.multinomial(d, colvec.probabilities(), size=int(repeats))
    if not len(y):
        return np.zeros(int(repeats))
    x = y.materialize()
    a = msq.row(r) / math.sqrt(msq.row_norms_sq[r])
    return counts @ (a * x * wcol) / d


def dual_kaczmarz_sampled_step(msq: MatrixSQ, b, y: SparseDescription, r, d, rng) -> SparseDescription:
    """One sampled dual update ``y_r += (b~_r - estimate) / ||A_r||``."""
    est = sampled_inner_product(msq, r, y, d, rng)
    rn = math.sqrt(msq.row_norms_sq[int(r)])
    return y.with_increment(r, (b[int(r)] / rn - est) / rn)


def dual_kaczmarz_sampled_solve(msq: MatrixSQ, b, cfg: SolverConfig, x_star=None):
    """Dual Kaczmarz with sampled inner products.

    Defaults: ``T = ceil(kappa_F^2 ln(2/eps^2))`` and
    ``d = ceil(4 ||A||_F^2 kappa_F^2 ln(2/eps^2) / (eps^2 min_j ||A_{*j}||^2))``,
    which give ``E||x_T - x*||^2 <= eps^2 ||x*||^2``.  Returns a
    :class:`SparseDescription` with at most ``T`` nonzeros and a trace.
    """
    b = as_rhs(msq, b)
    T = cfg.T if cfg.T is not None else compute_T_basic(cfg)
    d = cfg.d if cfg.d is not None else compute_d_basic(cfg, msq)
    rng = np.random.default_rng(cfg.seed)
    rows = msq.sample_rows(rng, T)
    if np.any(msq.row_norms_sq[rows] == 0.0):
        raise DegenerateRowError("sampled a zero row")
    wcol = _column_weights(msq)
    colvec = msq.column_norm_vector
    state = _DualState(msq, cfg.track_trace)
    trace = IterationTrace()
    x_star = None if x_star is None else np.asarray(x_star, dtype=np.float64)
    k, stopped = -1, False
    for k, r in enumerate(rows.tolist()):
        counts = colvec.sample_counts(rng, d)[None, :]
        supp = state.supp
        est, flops = _sampled_estimates(msq, [r], supp, state.y[supp], counts, d, wcol)
        rn = math.sqrt(msq.row_norms_sq[r])
        if cfg.track_trace:
            cols, vals = msq.row_entries(r)
            mu = float(vals @ state.x[cols]) / rn - est[0]
        state.add(r, (b[r] / rn - est[0]) / rn)
        if cfg.track_trace:
            _record(trace, state, msq, b, x_star, mu, flops)
        if _early_stop(cfg, k, T, state, msq, b):
            stopped = True
            break
    _finish(trace, k, T, stopped)
    return state.description(), trace


def averaged_kaczmarz_sampled_solve(msq: MatrixSQ, b, cfg: SolverConfig, x_star=None):
    """Averaged (minibatch) dual Kaczmarz with sampled inner products.

    Each step draws a batch of ``q`` rows with replacement and an independent
    column multiset per batch entry, then applies
    ``y_i += 1/2 (b~_i - estimate_i) / ||A_i||`` for every batch entry, all
    computed from the same ``y_k``.  Defaults: ``q = round(kappa_F^2/kappa^2)``,
    ``T = ceil(2 kappa^2 ln(2/eps^2))`` and
    ``d = ceil(||A||_F^4 T / (eps^2 ||A||^2 min_j ||A_{*j}||^2))``.
    """
    b = as_rhs(msq, b)
    q = cfg.q if cfg.q is not None else compute_q_averaged(cfg)
    T = cfg.T if cfg.T is not None else compute_T_averaged(cfg)
    d = cfg.d if cfg.d is not None else compute_d_averaged(cfg, msq, T)
    rng = np.random.default_rng(cfg.seed)
    batches = msq.sample_rows(rng, T * q).reshape(T, q)
    if np.any(msq.row_norms_sq[batches] == 0.0):
        raise DegenerateRowError("sampled a zero row")
    wcol = _column_weights(msq)
    p = msq.column_norm_vector.probabilities()
    state = _DualState(msq, cfg.track_trace)
    trace = IterationTrace()
    x_star = None if x_star is None else np.asarray(x_star, dtype=np.float64)
    k, stopped = -1, False
    for k in range(T):
        R = batches[k]
        counts = rng.multinomial(d, p, size=q)
        supp = state.supp
        est, flops = _sampled_estimates(msq, R, supp, state.y[supp], counts, d, wcol)
        rn = np.sqrt(msq.row_norms_sq[R])
        if cfg.track_trace:
            exact = msq.block(R, np.arange(msq.shape[1])) @ state.x / rn
            mu = float(np.mean(exact - est))
        state.add(R, 0.5 * (b[R] / rn - est) / rn)
        if cfg.track_trace:
            _record(trace, state, msq, b, x_star, mu, flops)
        if _early_stop(cfg, k, T, state, msq, b):
            stopped = True
            break
    _finish(trace, k, T, stopped)
    return state.description(), trace
