"""Randomized Kaczmarz on the primal iterate.

Row ``r`` is drawn with probability ``||A_r||^2 / ||A||_F^2`` and ``x`` is
projected onto the hyperplane ``<A_r, x> = b_r``.  With CSR storage each step
touches only the nonzeros of the chosen row, so ``x_T`` has at most ``s T``
nonzeros when started from zero.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import DegenerateRowError
from ..sqcore import MatrixSQ
from .schedules import compute_T_kaczmarz
from .types import IterationTrace, SolverConfig, as_rhs


def kaczmarz_step(msq: MatrixSQ, b, x, r) -> np.ndarray:
    """Project ``x`` onto ``{z : <A_r, z> = b_r}`` and return the new iterate."""
    r = int(r)
    norm_sq = msq.row_norms_sq[r]
    if norm_sq == 0.0:
        raise DegenerateRowError(f"row {r} is zero")
    x = np.array(x, dtype=np.float64)
    cols, vals = msq.row_entries(r)
    coef = (b[r] - vals @ x[cols]) / norm_sq
    x[cols] += coef * vals
    return x


def _check_rows(msq, rows):
    if np.any(msq.row_norms_sq[rows] == 0.0):
        bad = int(rows[np.flatnonzero(msq.row_norms_sq[rows] == 0.0)[0]])
        raise DegenerateRowError(f"row {bad} is zero")


def kaczmarz_solve(msq: MatrixSQ, b, cfg: SolverConfig, x_star=None):
    """Run ``T`` randomized Kaczmarz steps from ``x_0 = 0``.

    ``T`` defaults to ``ceil(kappa_F^2 ln(100 / eps^2))``.  Returns the final
    iterate and an :class:`IterationTrace`.  The trace's ``support`` column
    holds ``nnz(x_k)`` and ``flops`` the inner-product work of each step
    (``2 * nnz(row)``).
    """
    b = as_rhs(msq, b)
    T = cfg.T if cfg.T is not None else compute_T_kaczmarz(cfg)
    rng = np.random.default_rng(cfg.seed)
    rows = msq.sample_rows(rng, T)
    _check_rows(msq, rows)

    n = msq.shape[1]
    x = np.zeros(n)
    trace = IterationTrace()
    x_star = None if x_star is None else np.asarray(x_star, dtype=np.float64)
    check_every = max(1, math.ceil(T / 20))
    norms_sq = msq.row_norms_sq
    nnz = msq.row_nnz

    if msq.dense is not None:
        A = msq.dense
        for k, r in enumerate(rows.tolist()):
            a = A[r]
            x += ((b[r] - a @ x) / norms_sq[r]) * a
            if cfg.track_trace:
                err = math.nan if x_star is None else float(np.linalg.norm(x - x_star))
                trace.record(np.linalg.norm(A @ x - b), err, int(np.count_nonzero(x)),
                             flops=2 * int(nnz[r]))
            if cfg.tol is not None and (k + 1) % check_every == 0:
                if np.linalg.norm(A @ x - b) <= cfg.tol:
                    trace.stopped_early = True
                    trace.iterations = k + 1
                    break
        else:
            trace.iterations = T
    else:
        csr = msq.csr
        indptr, indices, data = csr.indptr, csr.indices, csr.data
        for k, r in enumerate(rows.tolist()):
            lo, hi = indptr[r], indptr[r + 1]
            cols = indices[lo:hi]
            vals = data[lo:hi]
            x[cols] += ((b[r] - vals @ x[cols]) / norms_sq[r]) * vals
            if cfg.track_trace:
                err = math.nan if x_star is None else float(np.linalg.norm(x - x_star))
                trace.record(np.linalg.norm(csr @ x - b), err, int(np.count_nonzero(x)),
                             flops=2 * (hi - lo))
            if cfg.tol is not None and (k + 1) % check_every == 0:
                if np.linalg.norm(csr @ x - b) <= cfg.tol:
                    trace.stopped_early = True
                    trace.iterations = k + 1
                    break
        else:
            trace.iterations = T
    return x, trace
