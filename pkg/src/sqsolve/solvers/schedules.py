"""Iteration counts, inner-product sample counts and batch sizes.

All logarithms are natural and every count is rounded up.
"""
from __future__ import annotations

import math

from ..errors import PreconditionError
from ..sqcore import MatrixSQ
from .types import SolverConfig


def _spectral_norm_sq(cfg: SolverConfig, msq: MatrixSQ) -> float:
    # ||A|| / ||A||_F = kappa / kappa_F
    return msq.frobenius_sq * (cfg.kappa / cfg.kappa_f) ** 2


def _inv_norm(cfg: SolverConfig, msq: MatrixSQ) -> float:
    return cfg.kappa_f / msq.frobenius


def compute_T_kaczmarz(cfg: SolverConfig) -> int:
    """Steps for the direct solver to reach error epsilon with probability 0.99."""
    return max(1, math.ceil(cfg.kappa_f ** 2 * math.log(100.0 / cfg.epsilon ** 2)))


def compute_T_basic(cfg: SolverConfig) -> int:
    return max(1, math.ceil(cfg.kappa_f ** 2 * math.log(2.0 / cfg.epsilon ** 2)))


def compute_d_basic(cfg: SolverConfig, msq: MatrixSQ) -> int:
    eps2 = cfg.epsilon ** 2
    d = (4.0 * msq.frobenius_sq * cfg.kappa_f ** 2 * math.log(2.0 / eps2)
         / (eps2 * msq.min_col_norm_sq))
    return max(1, math.ceil(d))


def compute_T_averaged(cfg: SolverConfig) -> int:
    return max(1, math.ceil(2.0 * cfg.kappa ** 2 * math.log(2.0 / cfg.epsilon ** 2)))


def compute_d_averaged(cfg: SolverConfig, msq: MatrixSQ, T=None) -> int:
    T = compute_T_averaged(cfg) if T is None else T
    d = (msq.frobenius_sq ** 2 * T
         / (cfg.epsilon ** 2 * _spectral_norm_sq(cfg, msq) * msq.min_col_norm_sq))
    return max(1, math.ceil(d))


def compute_q_averaged(cfg: SolverConfig) -> int:
    """Batch size ``round(||A||_F^2 / ||A||^2)`` = ``round(kappa_F^2 / kappa^2)``."""
    return max(1, round((cfg.kappa_f / cfg.kappa) ** 2))


# --- SPD coordinate descent: ||A||_F^2 -> Tr(A), ||A^{-1}||^2 -> ||A^{-1}|| ---

def compute_T_cd(cfg: SolverConfig, msq: MatrixSQ) -> int:
    rate = msq.trace * _inv_norm(cfg, msq)
    return max(1, math.ceil(rate * math.log(100.0 / cfg.epsilon ** 2)))


def compute_T_cd_averaged(cfg: SolverConfig) -> int:
    return max(1, math.ceil(2.0 * cfg.kappa * math.log(2.0 / cfg.epsilon ** 2)))


def compute_q_cd_averaged(cfg: SolverConfig, msq: MatrixSQ) -> int:
    spec = math.sqrt(_spectral_norm_sq(cfg, msq))
    return max(1, round(msq.trace / spec))


def compute_d_cd_averaged(cfg: SolverConfig, msq: MatrixSQ, T=None) -> int:
    T = compute_T_cd_averaged(cfg) if T is None else T
    diag = msq.diagonal
    if not (diag > 0).all():
        raise PreconditionError("coordinate descent needs a positive diagonal")
    spec = math.sqrt(_spectral_norm_sq(cfg, msq))
    d = msq.trace ** 2 * T / (cfg.epsilon ** 2 * spec * float(diag.min()))
    return max(1, math.ceil(d))
