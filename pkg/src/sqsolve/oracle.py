"""Dense ground truth for small instances.

Everything here is deliberately independent of the sampling data structures:
solutions and spectra come from LAPACK via numpy, distributions are formed by
direct normalization, and the Monte Carlo kernel draws its own samples with
``Generator.choice``.  This is the only module that does dense O(m n^2) work.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import stats

__all__ = [
    "SpectralSummary",
    "RANK_TOL",
    "min_norm_least_squares",
    "spectral_summary",
    "smallest_eigenvalue",
    "exact_distribution",
    "tv_distance",
    "chi_square_pvalue",
    "mu_statistics",
    "optimal_residual",
]

RANK_TOL = 1e-10


def _dense(A):
    if hasattr(A, "to_dense"):
        return A.to_dense()
    if sp.issparse(A):
        return A.toarray()
    return np.asarray(A, dtype=np.float64)


@dataclass(frozen=True)
class SpectralSummary:
    singular_values: np.ndarray
    spectral_norm: float
    min_singular: float
    frobenius: float
    kappa: float
    kappa_f: float
    inv_norm: float
    trace: float | None = None
    rank: int = 0


def _pinv_parts(A):
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    cutoff = RANK_TOL * (s[0] if s.size else 0.0)
    keep = s > cutoff
    return U[:, keep], s[keep], Vt[keep], s


def min_norm_least_squares(A, b) -> np.ndarray:
    """Minimum-norm minimizer of ``||A x - b||``, i.e. the pseudoinverse solution."""
    A = _dense(A)
    b = np.asarray(b, dtype=np.float64)
    U, s, Vt, _ = _pinv_parts(A)
    return Vt.T @ ((U.T @ b) / s)


def optimal_residual(A, b) -> float:
    """``Z = min_x ||A x - b||``."""
    A = _dense(A)
    b = np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm(A @ min_norm_least_squares(A, b) - b))


def spectral_summary(A) -> SpectralSummary:
    """Singular values, norms and the condition numbers kappa and kappa_F.

    ``||A^{-1}||`` is the reciprocal of the smallest singular value above
    ``RANK_TOL * ||A||`` (Moore-Penrose sense).  The trace is filled in for
    square inputs.
    """
    A = _dense(A)
    s = np.linalg.svd(A, compute_uv=False)
    spec = float(s[0])
    keep = s[s > RANK_TOL * spec]
    smin = float(keep[-1])
    fro = math.sqrt(math.fsum(s * s))
    inv = 1.0 / smin
    tr = float(np.trace(A)) if A.shape[0] == A.shape[1] else None
    return SpectralSummary(
        singular_values=s,
        spectral_norm=spec,
        min_singular=smin,
        frobenius=fro,
        kappa=spec * inv,
        kappa_f=fro * inv,
        inv_norm=inv,
        trace=tr,
        rank=int(keep.size),
    )


def smallest_eigenvalue(A) -> float:
    """Smallest eigenvalue of the symmetric part of a square matrix."""
    A = _dense(A)
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])


def exact_distribution(v) -> np.ndarray:
    """``D_v(i) = v_i**2 / ||v||**2`` by direct normalization."""
    v = np.asarray(v, dtype=np.float64)
    w = v * v
    total = math.fsum(w)
    if total == 0.0:
        raise ValueError("zero vector has no distribution")
    return w / total


def tv_distance(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return 0.5 * float(np.abs(p - q).sum())


def chi_square_pvalue(counts, expected) -> float:
    """Pearson goodness-of-fit p-value; cells with zero expectation are dropped."""
    counts = np.asarray(counts, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    keep = expected > 0
    if np.any(counts[~keep] > 0):
        return 0.0
    counts, expected = counts[keep], expected[keep]
    expected = expected * (counts.sum() / expected.sum())
    if counts.size < 2:
        return 1.0
    return float(stats.chisquare(counts, expected).pvalue)


def mu_statistics(msq, r, y, d, N, rng, chunk=20000):
    """Monte Carlo mean and variance of the sampled-inner-product error.

    ``mu = <A~_r, x> - (1/d) sum_{j in S} A~_{r,j} x_j ||A||_F^2 / ||A_{*j}||^2``
    with ``x = A^T y``, ``A~_r = A_r / ||A_r||`` and ``S`` a fresh multiset of
    ``d`` column draws from ``Pr[j] = ||A_{*j}||^2 / ||A||_F^2`` per repetition.

    ``y`` may be a dense length-m vector or any object with ``to_dense()``.
    """
    A = _dense(msq)
    y = y.to_dense() if hasattr(y, "to_dense") else np.asarray(y, dtype=np.float64)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    x = A.T @ y
    a = A[r] / np.linalg.norm(A[r])
    col_sq = (A * A).sum(axis=0)
    fro_sq = col_sq.sum()
    p = col_sq / fro_sq
    exact = float(a @ x)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(col_sq > 0, a * x * fro_sq / col_sq, 0.0)
    n = A.shape[1]
    mus = np.empty(N)
    for start in range(0, N, chunk):
        stop = min(N, start + chunk)
        S = rng.choice(n, size=(stop - start, d), p=p)
        mus[start:stop] = exact - term[S].mean(axis=1)
    return float(mus.mean()), float(mus.var(ddof=1)) if N > 1 else 0.0
