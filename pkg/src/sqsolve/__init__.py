"""Sampling-based randomized solvers for linear systems.

Rows and entries of the input are accessed through length-squared sampling
structures (:mod:`sqsolve.sqcore`); solvers return either a dense iterate or
a sparse description ``x = A^T y`` that :mod:`sqsolve.access` turns into
sample, query and norm access to ``x``.
"""
from . import access, oracle, solvers, sqcore
from .access import (
    NormEstimate,
    OversampledAccess,
    build_oversampled_access,
    estimate_norm,
    measure_phi,
    query_solution_entry,
    rejection_sample,
    rejection_sample_many,
)
from .errors import (
    DegenerateRowError,
    EmptyDistributionError,
    GenerationError,
    ParseError,
    PreconditionError,
    RejectedInputError,
    SamplingFailureError,
    SQError,
)
from .solvers import SOLVERS, IterationTrace, SolverConfig, SparseDescription
from .sqcore import MatrixSQ, VectorSQ, build_matrix_sq, build_vector_sq

__version__ = "0.1.0"

__all__ = [
    "DegenerateRowError",
    "EmptyDistributionError",
    "GenerationError",
    "IterationTrace",
    "MatrixSQ",
    "NormEstimate",
    "OversampledAccess",
    "ParseError",
    "PreconditionError",
    "RejectedInputError",
    "SOLVERS",
    "SQError",
    "SamplingFailureError",
    "SolverConfig",
    "SparseDescription",
    "VectorSQ",
    "access",
    "build_matrix_sq",
    "build_oversampled_access",
    "build_vector_sq",
    "estimate_norm",
    "measure_phi",
    "oracle",
    "query_solution_entry",
    "rejection_sample",
    "rejection_sample_many",
    "solvers",
    "sqcore",
]
