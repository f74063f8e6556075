from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import RejectedInputError
from ..sqcore import MatrixSQ


@dataclass(frozen=True)
class SolverConfig:
    """Parameters shared by every solver.

    ``kappa`` and ``kappa_f`` are inputs: solvers never estimate spectra.
    ``d``, ``T`` and ``q`` default to the schedule of the chosen solver when
    left as ``None``.  ``tol`` enables the optional residual-based early stop.
    """

    epsilon: float = 0.1
    delta: float = 0.01
    kappa: float = 1.0
    kappa_f: float = 1.0
    d: int | None = None
    T: int | None = None
    q: int | None = None
    seed: int = 0
    track_trace: bool = False
    tol: float | None = None

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise RejectedInputError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise RejectedInputError(f"delta must lie in (0, 1), got {self.delta}")
        if self.kappa < 1.0 - 1e-12:
            raise RejectedInputError("kappa must be >= 1")
        if self.kappa > self.kappa_f * (1.0 + 1e-12):
            raise RejectedInputError("kappa must not exceed kappa_f")
        for name in ("d", "T", "q"):
            val = getattr(self, name)
            if val is not None and int(val) < 1:
                raise RejectedInputError(f"{name} must be >= 1")
        if self.tol is not None and self.tol < 0:
            raise RejectedInputError("tol must be non-negative")


@dataclass(frozen=True, eq=False)
class SparseDescription:
    """Sparse dual vector ``y`` standing for ``x = A^T y``.

    With ``matrix=None`` the description is in the identity basis, ``x = y``
    (used by the SPD coordinate-descent solvers, whose iterate is already a
    sparse vector).
    """

    support: np.ndarray
    values: np.ndarray
    matrix: MatrixSQ | None
    dim: int
    source: str | None = None

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64).ravel()
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if support.shape != values.shape:
            raise RejectedInputError("support and values differ in length")
        if support.size and (support[0] < 0 or support[-1] >= self.dim
                             or np.any(np.diff(support) <= 0)):
            raise RejectedInputError("support must be strictly increasing within [0, dim)")
        if self.matrix is not None and self.matrix.shape[0] != self.dim:
            raise RejectedInputError("description length does not match the matrix rows")
        support.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    # ------------------------------------------------------------------
    @classmethod
    def zeros(cls, msq: MatrixSQ | None, dim=None):
        dim = msq.shape[0] if msq is not None else int(dim)
        return cls(np.empty(0, np.int64), np.empty(0), msq, dim)

    @classmethod
    def from_dense(cls, y, msq: MatrixSQ | None, keep_zeros=False):
        y = np.asarray(y, dtype=np.float64).ravel()
        support = np.arange(y.size) if keep_zeros else np.flatnonzero(y)
        return cls(support, y[support], msq, y.size)

    @property
    def n(self) -> int:
        """Length of ``x``."""
        return self.matrix.shape[1] if self.matrix is not None else self.dim

    def __len__(self) -> int:
        return int(self.support.size)

    def to_dense(self) -> np.ndarray:
        y = np.zeros(self.dim)
        y[self.support] = self.values
        return y

    def materialize(self) -> np.ndarray:
        """Dense ``x``; costs O(k n)."""
        if self.matrix is None:
            return self.to_dense()
        if not self.support.size:
            return np.zeros(self.n)
        return self.matrix.rmatvec_rows(self.support, self.values)

    def query(self, j) -> float:
        """``x_j = sum_i y_i A_{i,j}``; O(k) entry queries."""
        j = int(j)
        if not 0 <= j < self.n:
            raise IndexError(f"column {j} out of range for length {self.n}")
        if self.matrix is None:
            pos = np.searchsorted(self.support, j)
            if pos < self.support.size and self.support[pos] == j:
                return float(self.values[pos])
            return 0.0
        rows = self.matrix.rows
        return math.fsum(v * rows[i].query(j) for i, v in zip(self.support.tolist(), self.values.tolist()))

    def lambda_norm_sq(self) -> float:
        """``||y||_Lambda^2 = sum_i ||A_{i*}||^2 y_i^2``."""
        if self.matrix is None:
            return float(np.dot(self.values, self.values))
        w = self.matrix.row_norms_sq[self.support]
        return float(np.dot(w, self.values * self.values))

    def with_increment(self, r, delta) -> "SparseDescription":
        """Copy with ``y_r += delta``; support grows by at most one."""
        r = int(r)
        pos = int(np.searchsorted(self.support, r))
        if pos < self.support.size and self.support[pos] == r:
            values = self.values.copy()
            values[pos] += delta
            support = self.support
        else:
            support = np.insert(self.support, pos, r)
            values = np.insert(self.values, pos, delta)
        return SparseDescription(support, values, self.matrix, self.dim, self.source)

    # ------------------------------------------------------------------
    def to_json(self, matrix_path=None) -> str:
        path = matrix_path if matrix_path is not None else self.source
        payload = {
            "support": self.support.tolist(),
            "values": [float(v) for v in self.values],
            "dim": self.dim,
            "basis": "rows" if self.matrix is not None else "identity",
            "matrix": None if path is None else str(path),
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text, msq: MatrixSQ | None = None):
        payload = json.loads(text)
        try:
            support = payload["support"]
            values = payload["values"]
            dim = int(payload["dim"])
        except KeyError as exc:
            raise RejectedInputError(f"description is missing field {exc}") from None
        basis = payload.get("basis", "rows")
        if basis == "rows" and msq is None:
            raise RejectedInputError("row-basis description needs its matrix")
        return cls(support, values, msq if basis == "rows" else None, dim, payload.get("matrix"))


@dataclass
class IterationTrace:
    """Per-step diagnostics, recorded after each update when tracing is on.

    With ``track_trace=False`` only ``iterations`` (and ``z``) are filled and
    the per-step lists stay empty.
    """

    residual: list = field(default_factory=list)
    error: list = field(default_factory=list)
    support: list = field(default_factory=list)
    lambda_norm_sq: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    flops: list = field(default_factory=list)
    iterations: int = 0
    z: float | None = None
    stopped_early: bool = False

    def record(self, residual, error=math.nan, support=0, lambda_norm_sq=math.nan,
               mu=math.nan, flops=0):
        self.residual.append(float(residual))
        self.error.append(float(error))
        self.support.append(int(support))
        self.lambda_norm_sq.append(float(lambda_norm_sq))
        self.mu.append(float(mu))
        self.flops.append(int(flops))

    def __len__(self) -> int:
        return len(self.residual)

    def to_records(self) -> list[dict]:
        keys = ("residual", "error", "support", "lambda_norm_sq", "mu", "flops")
        return [
            {"step": k + 1, **{key: getattr(self, key)[k] for key in keys}}
            for k in range(len(self))
        ]

    def as_dict(self) -> dict:
        return asdict(self)


def as_rhs(msq: MatrixSQ, b) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64).ravel()
    if b.size != msq.shape[0]:
        raise RejectedInputError(f"rhs has length {b.size}, expected {msq.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise RejectedInputError("rhs contains non-finite entries")
    return b
