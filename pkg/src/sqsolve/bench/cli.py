"""``sqsolve`` command line.

Subcommands::

    gen     generate an instance (Matrix Market matrix, rhs, x*)
    solve   run a solver; writes a JSON solution description
    sample  draw indices of x from a description (JSON lines)
    query   read entries of x from a description (JSON lines)
    norm    estimate ||x|| from a description
    bench   run an experiment spec and write a report

Seeds come from ``--seed``, then the experiment spec, then the
``SQSOLVE_SEED`` environment variable, then 0.  Failures exit with status 2
and a JSON object ``{"error": ..., "message": ...}`` on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .. import oracle
from ..access import build_oversampled_access, estimate_norm, rejection_sample_many
from ..errors import RejectedInputError, SQError
from ..solvers import SOLVERS, SolverConfig, SparseDescription
from ..sqcore import build_matrix_sq
from .experiments import ExperimentSpec, run_convergence_experiment, run_scaling_experiment, run_solver
from .generate import GeneratorSpec, generate_matrix
from .mmio import load_matrix_market, load_vector, save_matrix_market, save_vector
from .report import format_report

SEED_ENV = "SQSOLVE_SEED"
EXIT_FAILURE = 2


class _JsonArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise RejectedInputError(f"{self.prog}: {message}")


def _seed(arg_seed, fallback=None):
    if arg_seed is not None:
        return arg_seed
    if fallback is not None:
        return int(fallback)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise RejectedInputError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return 0


def _emit(obj, out=None):
    line = json.dumps(obj, allow_nan=False)
    if out is None:
        print(line)
    else:
        out.write(line + "\n")


def _load_description(path, matrix=None):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    payload = json.loads(text)
    mpath = matrix if matrix is not None else payload.get("matrix")
    msq = None
    if payload.get("basis", "rows") == "rows":
        if mpath is None:
            raise RejectedInputError("description names no matrix; pass --matrix")
        if not os.path.isabs(mpath) and not os.path.exists(mpath):
            mpath = os.path.join(os.path.dirname(os.path.abspath(path)), mpath)
        msq = build_matrix_sq(load_matrix_market(mpath))
    return SparseDescription.from_json(text, msq)


# ----------------------------------------------------------------------
def cmd_gen(args):
    spec = GeneratorSpec(
        m=args.m, n=args.n if args.n is not None else args.m, kappa=args.kappa,
        profile=args.profile, s=args.sparsity, spd=args.spd,
        diag_dominant=args.diag_dominant, consistent=args.Z == 0.0, Z=args.Z,
        seed=_seed(args.seed),
    )
    prob = generate_matrix(spec)
    save_matrix_market(args.out, prob.A)
    if args.rhs_out:
        save_vector(args.rhs_out, prob.b)
    if args.xstar_out:
        save_vector(args.xstar_out, prob.x_star)
    s = prob.summary
    _emit({"matrix": args.out, "m": spec.m, "n": spec.n, "s": prob.row_sparsity,
           "kappa": s.kappa, "kappa_f": s.kappa_f, "frobenius": s.frobenius,
           "Z": prob.Z, "seed": spec.seed})


def cmd_solve(args):
    A = load_matrix_market(args.matrix)
    msq = build_matrix_sq(A)
    b = load_vector(args.rhs)
    kappa, kappa_f = args.kappa, args.kappa_f
    if kappa is None or kappa_f is None:
        summ = oracle.spectral_summary(A)
        kappa = summ.kappa if kappa is None else kappa
        kappa_f = summ.kappa_f if kappa_f is None else kappa_f
    cfg = SolverConfig(epsilon=args.eps, delta=args.delta, kappa=kappa, kappa_f=kappa_f,
                       d=args.d, T=args.T, q=args.q, seed=_seed(args.seed))
    x, desc, trace = run_solver(args.solver, msq, b, cfg)
    if desc is None:
        desc = SparseDescription.from_dense(x, None)
    text = desc.to_json(os.path.abspath(args.matrix) if desc.matrix is not None else None)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    _emit({"solver": args.solver, "support": len(desc), "iterations": trace.iterations,
           "residual": float(np.linalg.norm(msq.matvec(x) - b)), "seed": cfg.seed,
           "out": args.out})


def cmd_sample(args):
    desc = _load_description(args.desc, args.matrix)
    oa = build_oversampled_access(desc, args.phi_hat)
    rng = np.random.default_rng(_seed(args.seed))
    idx, attempts = rejection_sample_many(oa, rng, args.count, delta=args.delta)
    for j in idx.tolist():
        _emit({"index": j})
    print(json.dumps({"samples": int(idx.size), "attempts": int(attempts)}), file=sys.stderr)


def cmd_query(args):
    desc = _load_description(args.desc, args.matrix)
    for j in args.index:
        _emit({"index": j, "value": desc.query(j)})


def cmd_norm(args):
    desc = _load_description(args.desc, args.matrix)
    oa = build_oversampled_access(desc, args.phi_hat)
    est = estimate_norm(oa, args.eps, args.delta, np.random.default_rng(_seed(args.seed)))
    _emit({"norm": est.value, "degenerate": est.degenerate, "phi_hat": est.phi_hat,
           "groups": est.groups, "group_size": est.group_size})


def cmd_bench(args):
    with open(args.spec, encoding="utf-8") as fh:
        spec = ExperimentSpec.from_json(fh.read())
    overrides = {"seed": _seed(args.seed, spec.seed)}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.solver is not None:
        overrides["solver"] = args.solver
    eps_cfg = dict(spec.config)
    if args.eps is not None:
        eps_cfg["epsilon"] = args.eps
    if args.delta is not None:
        eps_cfg["delta"] = args.delta
    overrides["config"] = eps_cfg
    spec = replace(spec, **overrides)
    timing = not args.no_timing
    if spec.grid:
        res = run_scaling_experiment(spec, jobs=args.jobs, timing=timing)
        records = res.records
        summary = {"slope": res.slope, "intercept": res.intercept,
                   "points": [list(p) for p in res.points]}
    else:
        res = run_convergence_experiment(spec, jobs=args.jobs, timing=timing)
        records = res.records
        summary = {"mean_final_error": res.mean_of("final_error"),
                   "mean_iterations": res.mean_of("iterations")}
    outputs = [args.out] if args.out else list(spec.outputs)
    for path in outputs:
        fmt = args.format or ("csv" if path.endswith(".csv") else "json")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(format_report(records, fmt))
    if not outputs:
        sys.stdout.write(format_report(records, args.format or "json"))
    failed = sum(r["status"] != "ok" for r in records)
    summary = {k: (None if isinstance(v, float) and v != v else v) for k, v in summary.items()}
    print(json.dumps({"records": len(records), "failed": failed, **summary}), file=sys.stderr)


# ----------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = _JsonArgumentParser(prog="sqsolve", description="Sampling-based linear solvers.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_JsonArgumentParser)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int)
    g.add_argument("--kappa", type=float)
    g.add_argument("--profile", default="linear", choices=["linear", "geometric", "flat"])
    g.add_argument("--sparsity", "-s", type=int)
    g.add_argument("--spd", action="store_true")
    g.add_argument("--diag-dominant", action="store_true")
    g.add_argument("--Z", type=float, default=0.0, help="residual norm (0 = consistent)")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.add_argument("--rhs-out")
    g.add_argument("--xstar-out")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run a solver")
    s.add_argument("--matrix", required=True)
    s.add_argument("--rhs", required=True)
    s.add_argument("--solver", default="kaczmarz", choices=sorted(SOLVERS))
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--delta", type=float, default=0.01)
    s.add_argument("--kappa", type=float)
    s.add_argument("--kappa-f", type=float)
    s.add_argument("--d", type=int)
    s.add_argument("--T", type=int)
    s.add_argument("--q", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    for name, func, helptext in (("sample", cmd_sample, "sample indices of x"),
                                 ("query", cmd_query, "query entries of x"),
                                 ("norm", cmd_norm, "estimate ||x||")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--desc", required=True, help="solution description JSON")
        c.add_argument("--matrix", help="override the matrix path in the description")
        if name == "query":
            c.add_argument("--index", type=int, nargs="+", required=True)
        else:
            c.add_argument("--phi-hat", type=float)
            c.add_argument("--delta", type=float, default=0.01)
            c.add_argument("--seed", type=int)
        if name == "sample":
            c.add_argument("--count", type=int, default=1)
        if name == "norm":
            c.add_argument("--eps", type=float, default=0.1)
        c.set_defaults(func=func)

    b = sub.add_parser("bench", help="run an experiment spec")
    b.add_argument("--spec", required=True)
    b.add_argument("--solver", choices=sorted(SOLVERS))
    b.add_argument("--eps", type=float)
    b.add_argument("--delta", type=float)
    b.add_argument("--trials", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out")
    b.add_argument("--format", choices=["csv", "json"])
    b.add_argument("--no-timing", action="store_true", help="report wall_time as 0")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except (SQError, OSError, ValueError, KeyError, IndexError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
