"""Seeded experiment orchestration.

An experiment fixes one generated instance and runs a solver ``trials``
times.  Trial ``t`` gets its own seed derived from ``(master_seed, t)``
through :class:`numpy.random.SeedSequence`, so trials are independent and
any trial can be rerun alone.  Results are ordered by trial index whatever
the degree of parallelism, which makes reports reproducible byte for byte
once wall times are switched off.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..access import build_oversampled_access, measure_phi
from ..errors import RejectedInputError, SQError
from ..solvers import SOLVERS, SolverConfig, SparseDescription
from ..solvers.schedules import (
    compute_d_averaged,
    compute_d_basic,
    compute_d_cd_averaged,
    compute_q_averaged,
    compute_q_cd_averaged,
    compute_T_averaged,
    compute_T_basic,
    compute_T_cd,
    compute_T_cd_averaged,
    compute_T_kaczmarz,
)
from ..sqcore import build_matrix_sq
from .generate import GeneratorSpec, Problem, generate_matrix

__all__ = [
    "ExperimentSpec",
    "ExperimentResult",
    "ScalingResult",
    "trial_seed",
    "run_solver",
    "resolve_schedule",
    "run_convergence_experiment",
    "run_scaling_experiment",
    "fit_loglog",
]

CONFIG_KEYS = ("epsilon", "delta", "d", "T", "q", "tol")


def trial_seed(master_seed, trial) -> int:
    """Seed of trial ``trial``, a hash of ``(master_seed, trial)``."""
    ss = np.random.SeedSequence([int(master_seed), int(trial)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class ExperimentSpec:
    generator: GeneratorSpec
    solver: str = "kaczmarz"
    config: dict = field(default_factory=dict)
    trials: int = 1
    seed: int | None = None
    outputs: tuple = ()
    grid: tuple = ()
    scale_key: str = "kappa"

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise RejectedInputError(f"unknown solver {self.solver!r}; choose from {sorted(SOLVERS)}")
        if int(self.trials) < 1:
            raise RejectedInputError("trials must be >= 1")
        extra = set(self.config) - set(CONFIG_KEYS)
        if extra:
            raise RejectedInputError(f"unknown solver config keys {sorted(extra)}")
        if self.solver.startswith("cd") and not self.generator.spd:
            raise RejectedInputError("coordinate-descent solvers need an SPD generator")
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "grid", tuple(dict(g) for g in self.grid))

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentSpec":
        payload = dict(payload)
        if "generator" not in payload:
            raise RejectedInputError("experiment spec needs a 'generator' section")
        gen = GeneratorSpec.from_dict(payload.pop("generator"))
        solver = payload.pop("solver", "kaczmarz")
        config = {}
        if isinstance(solver, dict):
            solver = dict(solver)
            name = solver.pop("id", "kaczmarz")
            config = solver
            solver = name
        config.update(payload.pop("config", {}))
        known = {"trials", "seed", "outputs", "grid", "scale_key"}
        extra = set(payload) - known
        if extra:
            raise RejectedInputError(f"unknown experiment fields {sorted(extra)}")
        return cls(generator=gen, solver=solver, config=config, **payload)

    @classmethod
    def from_json(cls, text) -> "ExperimentSpec":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise RejectedInputError(f"experiment spec is not valid JSON: {exc}") from None
        return cls.from_dict(payload)

    def to_dict(self) -> dict:
        return {
            "generator": self.generator.to_dict(),
            "solver": {"id": self.solver, **self.config},
            "trials": self.trials,
            "seed": self.seed,
            "outputs": list(self.outputs),
            "grid": [dict(g) for g in self.grid],
            "scale_key": self.scale_key,
        }


@dataclass
class ExperimentResult:
    records: list
    error_curves: dict
    problem: Problem | None = field(default=None, repr=False)

    def successful(self):
        return [r for r in self.records if r["status"] == "ok"]

    def mean_of(self, key):
        vals = [r[key] for r in self.successful() if r[key] is not None]
        return float(np.mean(vals)) if vals else math.nan


@dataclass
class ScalingResult:
    records: list
    points: list
    slope: float
    intercept: float


def resolve_schedule(solver, msq, cfg: SolverConfig) -> dict:
    """Effective ``(d, T, q)`` for ``solver`` (``None`` where unused)."""
    d = q = None
    if solver in ("kaczmarz", "dual"):
        T = cfg.T or compute_T_kaczmarz(cfg)
    elif solver == "dual-sampled":
        T = cfg.T or compute_T_basic(cfg)
        d = cfg.d or compute_d_basic(cfg, msq)
    elif solver == "averaged":
        T = cfg.T or compute_T_averaged(cfg)
        q = cfg.q or compute_q_averaged(cfg)
        d = cfg.d or compute_d_averaged(cfg, msq, T)
    elif solver == "cd":
        T = cfg.T or compute_T_cd(cfg, msq)
    elif solver == "cd-averaged":
        T = cfg.T or compute_T_cd_averaged(cfg)
        q = cfg.q or compute_q_cd_averaged(cfg, msq)
        d = cfg.d or compute_d_cd_averaged(cfg, msq, T)
    else:
        raise RejectedInputError(f"unknown solver {solver!r}")
    return {"d": d, "T": T, "q": q}


def run_solver(solver, msq, b, cfg: SolverConfig, x_star=None):
    """Dispatch to a solver; returns ``(x_dense, description_or_None, trace)``."""
    if solver not in SOLVERS:
        raise RejectedInputError(f"unknown solver {solver!r}; choose from {sorted(SOLVERS)}")
    out, trace = SOLVERS[solver](msq, b, cfg, x_star=x_star)
    if isinstance(out, SparseDescription):
        return out.materialize(), out, trace
    return out, None, trace


def _phi(desc, x):
    if desc is None or not len(desc):
        return None
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        return None
    return measure_phi(build_oversampled_access(desc), norm)


def _run_trial(job):
    (t, seed, solver, A, b, x_star, base_cfg, timing, want_curve) = job
    msq = build_matrix_sq(A)
    m, n = msq.shape
    cfg = replace(base_cfg, seed=seed, track_trace=want_curve)
    record = {
        "solver": solver, "trial": t, "seed": seed, "m": m, "n": n,
        "s": msq.row_sparsity, "kappa": cfg.kappa, "kappa_f": cfg.kappa_f,
        "epsilon": cfg.epsilon, "d": None, "T": None, "q": None,
        "final_error": None, "iterations": None, "wall_time": 0.0, "phi": None,
        "status": "ok", "error": None,
    }
    curve = None
    try:
        record.update(resolve_schedule(solver, msq, cfg))
        start = time.perf_counter()
        x, desc, trace = run_solver(solver, msq, b, cfg, x_star)
        elapsed = time.perf_counter() - start
        xs_norm = float(np.linalg.norm(x_star))
        scale = xs_norm if xs_norm > 0 else 1.0
        record["final_error"] = float(np.linalg.norm(x - x_star)) / scale
        record["wall_time"] = elapsed if timing else 0.0
        record["phi"] = _phi(desc, x)
        if want_curve:
            curve = np.asarray(trace.error) / scale
            hit = np.flatnonzero(curve <= cfg.epsilon)
            record["iterations"] = int(hit[0]) + 1 if hit.size else None
        else:
            record["iterations"] = trace.iterations
    except (SQError, ValueError, ArithmeticError) as exc:
        record["status"] = "failed"
        record["error"] = f"{type(exc).__name__}: {exc}"
    return t, record, curve


def _base_config(spec: ExperimentSpec, problem: Problem) -> SolverConfig:
    summ = problem.summary
    kwargs = {k: v for k, v in spec.config.items() if v is not None}
    return SolverConfig(kappa=summ.kappa, kappa_f=max(summ.kappa_f, summ.kappa), **kwargs)


def run_convergence_experiment(spec: ExperimentSpec, jobs=1, timing=True, curves=True,
                               problem: Problem | None = None) -> ExperimentResult:
    """Run ``spec.trials`` seeded trials of one solver on one instance.

    Each record carries the final relative error ``||x_T - x*|| / ||x*||``,
    the first step at which the relative error drops to ``epsilon``
    (``None`` if never; the number of steps run when ``curves`` is off),
    the schedule and the measured oversampling factor.
    ``error_curves`` holds mean and median curves of the squared relative
    error over successful trials.  Failed trials are recorded, not raised.
    """
    problem = problem if problem is not None else generate_matrix(spec.generator)
    base = _base_config(spec, problem)
    jobs_list = [
        (t, trial_seed(spec.seed or 0, t), spec.solver, problem.A, problem.b, problem.x_star,
         base, timing, curves)
        for t in range(int(spec.trials))
    ]
    if jobs and jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=int(jobs)) as pool:
            results = list(pool.map(_run_trial, jobs_list))
    else:
        results = [_run_trial(job) for job in jobs_list]
    results.sort(key=lambda item: item[0])
    records = [rec for _, rec, _ in results]
    sq_curves = [c ** 2 for _, rec, c in results if c is not None and rec["status"] == "ok"]
    error_curves = {}
    if sq_curves:
        length = min(len(c) for c in sq_curves)
        stack = np.stack([c[:length] for c in sq_curves])
        error_curves = {"mean": stack.mean(axis=0), "median": np.median(stack, axis=0)}
    return ExperimentResult(records, error_curves, problem)


def fit_loglog(xs, ys):
    """Least-squares slope and intercept of ``log y`` against ``log x``."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size < 2 or np.any(xs <= 0) or np.any(ys <= 0):
        raise RejectedInputError("log-log fit needs at least two positive points")
    slope, intercept = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope), float(intercept)


def run_scaling_experiment(spec: ExperimentSpec, grid=None, metric="iterations", jobs=1,
                           timing=True) -> ScalingResult:
    """Repeat the experiment over generator variations and fit a power law.

    ``grid`` is a sequence of generator overrides such as ``{"kappa": 5}``;
    the fitted slope is that of ``log(mean metric)`` against
    ``log(spec.scale_key)`` where ``scale_key`` is read from the generated
    instance's oracle summary (``kappa``/``kappa_f``) or from the override.
    """
    grid = tuple(grid) if grid is not None else spec.grid
    if len(grid) < 2:
        raise RejectedInputError("a scaling experiment needs at least two grid points")
    records, points = [], []
    for overrides in grid:
        gen = replace(spec.generator, **overrides)
        sub = replace(spec, generator=gen)
        res = run_convergence_experiment(sub, jobs=jobs, timing=timing,
                                         curves=(metric == "iterations"))
        records.extend(res.records)
        summ = res.problem.summary
        if spec.scale_key in ("kappa", "kappa_f"):
            x = getattr(summ, spec.scale_key)
        else:
            x = overrides[spec.scale_key]
        points.append((float(x), res.mean_of(metric)))
    slope, intercept = fit_loglog([p[0] for p in points], [p[1] for p in points])
    return ScalingResult(records, points, slope, intercept)
