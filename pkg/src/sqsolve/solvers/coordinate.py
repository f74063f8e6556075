"""Randomized coordinate descent for symmetric positive definite systems.

Coordinate ``r`` is chosen with probability ``A_rr / Tr(A)`` and the ``r``-th
residual is zeroed.  The averaged variant updates a batch of ``q`` coordinates
with relaxation 1/2 and replaces each row inner product by a sampled estimate
over the diagonal distribution, mirroring the averaged Kaczmarz scheme with
``||A||_F^2`` replaced by ``Tr(A)``.
"""
from __future__ import annotations

import math

import numpy as np

from .. import oracle
from ..errors import DegenerateRowError, PreconditionError
from ..sqcore import MatrixSQ
from .schedules import (
    compute_d_cd_averaged,
    compute_q_cd_averaged,
    compute_T_cd,
    compute_T_cd_averaged,
)
from .types import IterationTrace, SolverConfig, SparseDescription, as_rhs

SYM_TOL = 1e-10
EIG_CHECK_MAX_N = 2000


def validate_spd(msq: MatrixSQ, trusted=False) -> None:
    """Raise unless ``msq`` looks symmetric positive definite.

    Checks squareness, symmetry to ``SYM_TOL`` relative to the largest entry
    and a positive diagonal.  Unless ``trusted``, instances with
    ``n <= EIG_CHECK_MAX_N`` also get a smallest-eigenvalue check.  The
    result is cached on the structure.
    """
    cached = msq.__dict__.get("_spd_validated")
    if cached is not None and (trusted or cached == "full"):
        return
    m, n = msq.shape
    if m != n:
        raise PreconditionError(f"SPD solver needs a square matrix, got {m}x{n}")
    if msq.dense is not None:
        A = msq.dense
        scale = float(np.abs(A).max())
        asym = float(np.abs(A - A.T).max())
    else:
        diff = msq.csr - msq.csr.T
        scale = float(abs(msq.csr).max())
        asym = float(abs(diff).max()) if diff.nnz else 0.0
    if asym > SYM_TOL * scale:
        raise PreconditionError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    diag = msq.diagonal
    if np.any(diag == 0.0):
        raise DegenerateRowError(f"zero diagonal entry at {int(np.flatnonzero(diag == 0.0)[0])}")
    if np.any(diag < 0.0):
        raise PreconditionError("matrix has a negative diagonal entry")
    level = "trusted"
    if not trusted and n <= EIG_CHECK_MAX_N:
        lam = oracle.smallest_eigenvalue(msq)
        if lam <= 0.0:
            raise PreconditionError(f"matrix is not positive definite (min eigenvalue {lam:.3e})")
        level = "full"
    msq.__dict__["_spd_validated"] = level


def coord_descent_step(msq: MatrixSQ, b, x, r, trusted=False) -> np.ndarray:
    """``x_r -= (<A_r, x> - b_r) / A_rr``; afterwards ``(b - A x)_r = 0``."""
    validate_spd(msq, trusted)
    r = int(r)
    x = np.array(x, dtype=np.float64)
    cols, vals = msq.row_entries(r)
    x[r] -= (vals @ x[cols] - b[r]) / msq.diagonal[r]
    return x


def coord_descent_solve(msq: MatrixSQ, b, cfg: SolverConfig, x_star=None, trusted=False):
    """Direct randomized coordinate descent from ``x_0 = 0``.

    ``T`` defaults to ``ceil(Tr(A) ||A^{-1}|| ln(100/eps^2))`` with
    ``||A^{-1}|| = kappa_F / ||A||_F`` taken from the config.  Returns the
    iterate (at most ``T`` nonzeros) and a trace whose ``flops`` column is the
    per-step inner-product work.
    """
    validate_spd(msq, trusted)
    b = as_rhs(msq, b)
    T = cfg.T if cfg.T is not None else compute_T_cd(cfg, msq)
    rng = np.random.default_rng(cfg.seed)
    rows = msq.diagonal_sq.sample_many(rng, T)
    n = msq.shape[1]
    x = np.zeros(n)
    diag = msq.diagonal
    trace = IterationTrace()
    x_star = None if x_star is None else np.asarray(x_star, dtype=np.float64)
    every = max(1, math.ceil(T / 20))
    k, stopped = -1, False
    if msq.dense is not None:
        A = msq.dense
        for k, r in enumerate(rows.tolist()):
            x[r] -= (A[r] @ x - b[r]) / diag[r]
            if cfg.track_trace:
                err = math.nan if x_star is None else float(np.linalg.norm(x - x_star))
                trace.record(np.linalg.norm(A @ x - b), err, int(np.count_nonzero(x)),
                             flops=2 * int(msq.row_nnz[r]))
            if cfg.tol is not None and (k + 1) % every == 0 and np.linalg.norm(A @ x - b) <= cfg.tol:
                stopped = True
                break
    else:
        csr = msq.csr
        indptr, indices, data = csr.indptr, csr.indices, csr.data
        for k, r in enumerate(rows.tolist()):
            lo, hi = indptr[r], indptr[r + 1]
            x[r] -= (data[lo:hi] @ x[indices[lo:hi]] - b[r]) / diag[r]
            if cfg.track_trace:
                err = math.nan if x_star is None else float(np.linalg.norm(x - x_star))
                trace.record(np.linalg.norm(csr @ x - b), err, int(np.count_nonzero(x)),
                             flops=2 * (hi - lo))
            if cfg.tol is not None and (k + 1) % every == 0 and np.linalg.norm(csr @ x - b) <= cfg.tol:
                stopped = True
                break
    trace.iterations = k + 1 if stopped else T
    trace.stopped_early = stopped
    return x, trace


def averaged_coord_descent_solve(msq: MatrixSQ, b, cfg: SolverConfig, x_star=None, trusted=False):
    """Averaged coordinate descent with sampled inner products.

    Per step: a batch ``T_k`` of ``q = round(Tr(A)/||A||)`` coordinates drawn
    from ``A_ii / Tr(A)`` with replacement; for each ``i`` an independent
    multiset ``S_i`` of ``d`` draws from the same law estimates
    ``<A_i, x> ~ (1/d) sum_{j in S_i} A_ij x_j Tr(A) / A_jj``; then
    ``x_i -= 1/2 (estimate_i - b_i) / A_ii``.  Defaults
    ``T = ceil(2 kappa ln(2/eps^2))`` and
    ``d = ceil(Tr(A)^2 T / (eps^2 ||A|| min_j A_jj))``.

    Returns the iterate as an identity-basis :class:`SparseDescription`.
    """
    validate_spd(msq, trusted)
    b = as_rhs(msq, b)
    q = cfg.q if cfg.q is not None else compute_q_cd_averaged(cfg, msq)
    T = cfg.T if cfg.T is not None else compute_T_cd_averaged(cfg)
    d = cfg.d if cfg.d is not None else compute_d_cd_averaged(cfg, msq, T)
    rng = np.random.default_rng(cfg.seed)
    diag_sq = msq.diagonal_sq
    batches = diag_sq.sample_many(rng, T * q).reshape(T, q)
    p = diag_sq.probabilities()
    diag = msq.diagonal
    n = msq.shape[1]
    wdiag = np.zeros(n)
    wdiag[diag > 0] = msq.trace / diag[diag > 0]

    x = np.zeros(n)
    in_supp = np.zeros(n, dtype=bool)
    trace = IterationTrace()
    x_star = None if x_star is None else np.asarray(x_star, dtype=np.float64)
    every = max(1, math.ceil(T / 20))
    k, stopped = -1, False
    for k in range(T):
        R = batches[k]
        counts = rng.multinomial(d, p, size=q)
        supp = np.flatnonzero(in_supp)
        J = np.flatnonzero(counts.any(axis=0))
        J = J[in_supp[J]]
        if J.size:
            est = (counts[:, J] * msq.block(R, J) * (x[J] * wdiag[J])).sum(axis=1) / d
        else:
            est = np.zeros(q)
        if cfg.track_trace:
            exact = msq.block(R, supp) @ x[supp] if supp.size else np.zeros(q)
            mu = float(np.mean(exact - est))
        np.add.at(x, R, -0.5 * (est - b[R]) / diag[R])
        in_supp[R] = True
        if cfg.track_trace:
            err = math.nan if x_star is None else float(np.linalg.norm(x - x_star))
            trace.record(np.linalg.norm(msq.matvec(x) - b), err, int(in_supp.sum()),
                         float(x @ x), mu, 2 * J.size * q)
        if cfg.tol is not None and (k + 1) % every == 0 and np.linalg.norm(msq.matvec(x) - b) <= cfg.tol:
            stopped = True
            break
    trace.iterations = k + 1 if stopped else T
    trace.stopped_early = stopped
    supp = np.flatnonzero(in_supp)
    return SparseDescription(supp, x[supp], None, n), trace
