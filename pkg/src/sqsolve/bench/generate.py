"""Test instances with controlled spectrum, sparsity and residual.

Dense instances are ``U diag(sigma) V^T`` with Haar-random orthogonal
factors, so the requested condition number is met to rounding.  Row-sparse
instances cannot be built that way; they are ``R + w D`` with ``R`` random
and ``D`` a fixed one-per-row pattern, and ``w`` is found by bisection so
the measured condition number hits the target.  Every instance is scaled to
``||A|| = 1``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .. import oracle
from ..errors import GenerationError, RejectedInputError

__all__ = ["GeneratorSpec", "Problem", "generate_matrix", "singular_profile"]

PROFILES = ("linear", "geometric", "flat", "explicit")
# relative tolerance for bisection-based generators
KAPPA_RTOL = 1e-6


@dataclass(frozen=True)
class GeneratorSpec:
    m: int
    n: int
    kappa: float | None = None
    profile: str = "linear"
    singular_values: tuple | None = None
    s: int | None = None
    spd: bool = False
    diag_dominant: bool = False
    consistent: bool = True
    Z: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise RejectedInputError("m and n must be positive")
        if self.spd and self.m != self.n:
            raise RejectedInputError("an SPD instance must be square")
        if self.profile not in PROFILES:
            raise RejectedInputError(f"unknown profile {self.profile!r}; choose from {PROFILES}")
        if self.profile == "explicit" and self.singular_values is None:
            raise RejectedInputError("explicit profile needs singular_values")
        if self.kappa is not None and not self.kappa >= 1.0:
            raise RejectedInputError("kappa must be >= 1")
        if self.s is not None and not 1 <= self.s <= self.n:
            raise RejectedInputError("row sparsity s must lie in [1, n]")
        if self.Z < 0:
            raise RejectedInputError("Z must be non-negative")
        if self.consistent and self.Z > 0:
            raise RejectedInputError("a consistent instance has Z = 0")
        if self.singular_values is not None:
            object.__setattr__(self, "singular_values", tuple(float(v) for v in self.singular_values))

    @classmethod
    def from_dict(cls, payload: dict) -> "GeneratorSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(payload) - known
        if extra:
            raise RejectedInputError(f"unknown generator fields {sorted(extra)}")
        return cls(**payload)

    def to_dict(self) -> dict:
        out = asdict(self)
        if out["singular_values"] is not None:
            out["singular_values"] = list(out["singular_values"])
        return out


@dataclass(eq=False)
class Problem:
    A: object
    b: np.ndarray
    x_star: np.ndarray
    x_planted: np.ndarray
    summary: oracle.SpectralSummary
    Z: float
    spec: GeneratorSpec | None = field(default=None, repr=False)

    @property
    def row_sparsity(self) -> int:
        if sp.issparse(self.A):
            return int(np.diff(self.A.indptr).max())
        return int(np.count_nonzero(self.A, axis=1).max())


def singular_profile(profile, r, kappa=None, values=None) -> np.ndarray:
    """Descending spectrum of length ``r`` with largest value 1."""
    if profile == "explicit":
        sigma = np.sort(np.abs(np.asarray(values, dtype=np.float64)))[::-1]
        if sigma.size != r:
            raise GenerationError(f"need {r} singular values, got {sigma.size}")
        if not np.all(np.isfinite(sigma)) or sigma[0] == 0.0:
            raise GenerationError("explicit spectrum must be finite and not all zero")
        return sigma
    kappa = 1.0 if kappa is None else float(kappa)
    if profile == "flat":
        if kappa != 1.0:
            raise GenerationError("flat profile has kappa = 1", achieved_kappa=1.0)
        return np.ones(r)
    if r == 1 and kappa != 1.0:
        raise GenerationError("a rank-one instance has kappa = 1", achieved_kappa=1.0)
    if profile == "linear":
        return np.linspace(1.0, 1.0 / kappa, r)
    return np.geomspace(1.0, 1.0 / kappa, r)


def _orthonormal(rng, rows, cols):
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def _dense(spec: GeneratorSpec, rng):
    r = min(spec.m, spec.n)
    sigma = singular_profile(spec.profile, r, spec.kappa, spec.singular_values)
    U = _orthonormal(rng, spec.m, r)
    V = _orthonormal(rng, spec.n, r)
    return (U * sigma) @ V.T


def _dense_spd(spec: GeneratorSpec, rng):
    lam = singular_profile(spec.profile, spec.n, spec.kappa, spec.singular_values)
    if lam[-1] <= 0.0:
        raise GenerationError("SPD spectrum must be positive")
    Q = _orthonormal(rng, spec.n, spec.n)
    A = (Q * lam) @ Q.T
    return 0.5 * (A + A.T)


def _bisect(build, target, lo, hi, what):
    """Find ``t`` in ``[lo, hi]`` (log scale) with ``kappa(build(t)) = target``.

    ``kappa(build(t))`` must decrease in ``t``.
    """
    def kappa_of(t):
        return oracle.spectral_summary(build(t)).kappa

    k_lo, k_hi = kappa_of(lo), kappa_of(hi)
    if not k_hi <= target <= k_lo:
        closest = k_hi if target < k_hi else k_lo
        raise GenerationError(
            f"{what}: kappa={target:g} is outside the reachable range "
            f"[{k_hi:.6g}, {k_lo:.6g}]", achieved_kappa=closest)
    a, c = math.log(lo), math.log(hi)
    for _ in range(200):
        mid = 0.5 * (a + c)
        k = kappa_of(math.exp(mid))
        if abs(k - target) <= KAPPA_RTOL * target:
            return build(math.exp(mid))
        if k > target:
            a = mid
        else:
            c = mid
    k = kappa_of(math.exp(0.5 * (a + c)))
    raise GenerationError(f"{what}: bisection did not converge", achieved_kappa=k)


def _row_sparse(spec: GeneratorSpec, rng):
    m, n, s = spec.m, spec.n, spec.s
    anchor = np.arange(m) % n
    rows, cols, vals = [], [], []
    for i in range(m):
        others = rng.choice(np.delete(np.arange(n), anchor[i]), size=s - 1, replace=False)
        rows.extend([i] * (s - 1))
        cols.extend(others.tolist())
        vals.extend(rng.standard_normal(s - 1).tolist())
    R = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
    D = sp.csr_matrix((np.ones(m), (np.arange(m), anchor)), shape=(m, n))
    scale = max(1.0, math.sqrt(s))

    def build(w):
        A = (R + w * D).tocsr()
        return A / oracle.spectral_summary(A).spectral_norm

    if spec.kappa is None:
        return build(scale)
    return _bisect(build, spec.kappa, 1e-6 * scale, 1e6 * scale, "row-sparse generator")


def _diag_dominant_spd(spec: GeneratorSpec, rng):
    n = spec.n
    s = spec.s if spec.s is not None else n
    # each symmetric permutation pair adds at most two entries per row
    pairs = (s - 1) // 2
    off = sp.csr_matrix((n, n))
    for _ in range(pairs):
        perm = rng.permutation(n)
        B = sp.csr_matrix((rng.standard_normal(n), (np.arange(n), perm)), shape=(n, n))
        off = off + B + B.T
    off = off.tolil()
    off.setdiag(0.0)
    off = off.tocsr()
    off.eliminate_zeros()
    rowabs = np.asarray(abs(off).sum(axis=1)).ravel()

    def build(mu):
        A = (off + sp.diags(rowabs + mu)).tocsr()
        return A / oracle.spectral_summary(A).spectral_norm

    if spec.kappa is None:
        return build(1.0)
    return _bisect(build, spec.kappa, 1e-8, 1e8, "diagonally dominant SPD generator")


def generate_matrix(spec: GeneratorSpec) -> Problem:
    """Build an instance, its right-hand side and the oracle solution.

    With ``consistent`` set, ``b = A x_planted`` for a seeded unit vector
    ``x_planted``; otherwise a residual of norm ``Z`` orthogonal to the
    column space of ``A`` is added.  ``x_star`` is the minimum-norm least
    squares solution.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.spd and (spec.diag_dominant or spec.s is not None):
        A = _diag_dominant_spd(spec, rng)
    elif spec.spd:
        A = _dense_spd(spec, rng)
    elif spec.s is not None:
        A = _row_sparse(spec, rng)
    else:
        A = _dense(spec, rng)

    summary = oracle.spectral_summary(A)
    if spec.kappa is not None and abs(summary.kappa - spec.kappa) > KAPPA_RTOL * spec.kappa * 10:
        raise GenerationError(
            f"requested kappa={spec.kappa:g}, achieved {summary.kappa:.6g}",
            achieved_kappa=summary.kappa)

    x_planted = rng.standard_normal(spec.n)
    x_planted /= np.linalg.norm(x_planted)
    b = A @ x_planted
    Z = 0.0
    if not spec.consistent and spec.Z > 0:
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A)
        U, sig, _ = np.linalg.svd(Ad, full_matrices=False)
        U = U[:, sig > oracle.RANK_TOL * sig[0]]
        g = rng.standard_normal(spec.m)
        g -= U @ (U.T @ g)
        g -= U @ (U.T @ g)
        gn = np.linalg.norm(g)
        if gn <= 1e-8:
            raise GenerationError("column space of A is everything; no residual can be added")
        b = b + spec.Z * g / gn
        Z = spec.Z
    x_star = oracle.min_norm_least_squares(A, b)
    return Problem(A, b, x_star, x_planted, summary, Z, spec)
