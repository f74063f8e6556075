import hashlib
import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from sqsolve import oracle
from sqsolve.bench import (
    REPORT_FIELDS,
    ExperimentSpec,
    GeneratorSpec,
    fit_loglog,
    generate_matrix,
    load_matrix_market,
    load_vector,
    run_convergence_experiment,
    run_scaling_experiment,
    save_matrix_market,
    save_report,
    save_vector,
    trial_seed,
)
from sqsolve.bench.report import format_report
from sqsolve.errors import GenerationError, ParseError, RejectedInputError

DATA = Path(__file__).parent / "data"
# written once by scipy.io.mmwrite (seed 20240601, 12x9, 32 stored entries)
REFERENCE_SHA256 = "9e2ccc2055440ec66490574413c1762f42b8416ea0f8a416355aa62189eb135f"
REFERENCE_FROBENIUS = 7.00262916722023


# --- generator -------------------------------------------------------------

def test_flat_profile():
    prob = generate_matrix(GeneratorSpec(m=12, n=5, profile="flat", seed=1))
    assert prob.summary.kappa == pytest.approx(1.0)
    assert prob.summary.kappa_f == pytest.approx(math.sqrt(5))


def test_two_by_two_explicit():
    prob = generate_matrix(GeneratorSpec(m=2, n=2, profile="explicit", singular_values=(1.0, 0.1)))
    assert prob.summary.kappa == pytest.approx(10.0)


@pytest.mark.parametrize("profile", ["linear", "geometric"])
def test_requested_kappa_dense(profile):
    prob = generate_matrix(GeneratorSpec(m=100, n=50, kappa=10.0, profile=profile, seed=2))
    assert abs(prob.summary.kappa - 10.0) <= 1e-6
    assert prob.summary.spectral_norm == pytest.approx(1.0)
    assert prob.summary.min_singular == pytest.approx(0.1)


def test_row_sparse_generator():
    prob = generate_matrix(GeneratorSpec(m=80, n=40, kappa=8.0, s=5, seed=3))
    assert sp.issparse(prob.A)
    assert prob.row_sparsity <= 5
    assert prob.summary.kappa == pytest.approx(8.0, rel=1e-5)
    assert prob.summary.spectral_norm == pytest.approx(1.0)


def test_spd_generators():
    dense = generate_matrix(GeneratorSpec(m=20, n=20, spd=True, kappa=5.0, seed=4))
    A = dense.A
    np.testing.assert_allclose(A, A.T, atol=1e-12)
    assert np.linalg.eigvalsh(A).min() > 0
    assert dense.summary.kappa == pytest.approx(5.0, rel=1e-6)
    dd = generate_matrix(GeneratorSpec(m=30, n=30, spd=True, diag_dominant=True, s=5, kappa=4.0, seed=5))
    B = dd.A.toarray()
    np.testing.assert_allclose(B, B.T, atol=1e-12)
    off = np.abs(B).sum(axis=1) - np.abs(np.diag(B))
    assert np.all(np.diag(B) > off)
    assert dd.row_sparsity <= 5
    assert dd.summary.kappa == pytest.approx(4.0, rel=1e-5)


def test_consistent_and_residual_instances():
    prob = generate_matrix(GeneratorSpec(m=30, n=10, kappa=3.0, seed=6))
    np.testing.assert_allclose(prob.A @ prob.x_star, prob.b, atol=1e-10)
    np.testing.assert_allclose(prob.x_star, prob.x_planted, atol=1e-10)
    assert np.linalg.norm(prob.x_planted) == pytest.approx(1.0)
    res = generate_matrix(GeneratorSpec(m=30, n=10, kappa=3.0, consistent=False, Z=0.5, seed=6))
    assert oracle.optimal_residual(res.A, res.b) == pytest.approx(0.5, rel=1e-8)
    np.testing.assert_allclose(res.x_star, res.x_planted, atol=1e-10)


def test_generator_errors():
    with pytest.raises(RejectedInputError):
        GeneratorSpec(m=3, n=4, spd=True)
    with pytest.raises(RejectedInputError):
        GeneratorSpec(m=3, n=3, kappa=0.5)
    with pytest.raises(RejectedInputError):
        GeneratorSpec.from_dict({"m": 3, "n": 3, "colour": "red"})
    with pytest.raises(GenerationError) as info:
        generate_matrix(GeneratorSpec(m=5, n=5, kappa=3.0, profile="flat"))
    assert info.value.achieved_kappa == 1.0
    with pytest.raises(GenerationError):
        generate_matrix(GeneratorSpec(m=5, n=5, kappa=2.0, consistent=False, Z=1.0))


def test_generator_deterministic_and_dict_round_trip():
    spec = GeneratorSpec(m=15, n=7, kappa=4.0, profile="geometric", seed=9)
    assert GeneratorSpec.from_dict(spec.to_dict()) == spec
    a, b = generate_matrix(spec), generate_matrix(spec)
    np.testing.assert_array_equal(a.A, b.A)
    np.testing.assert_array_equal(a.b, b.b)


# --- Matrix Market ---------------------------------------------------------

def test_dense_round_trip_bit_exact(tmp_path):
    A = np.random.default_rng(0).standard_normal((10, 10)) * 10.0 ** np.arange(-5, 5)
    path = tmp_path / "a.mtx"
    save_matrix_market(path, A)
    back = load_matrix_market(path)
    assert back.dtype == np.float64
    np.testing.assert_array_equal(back, A)


def test_sparse_round_trip_keeps_pattern(tmp_path):
    S = sp.random(20, 15, density=0.1, random_state=np.random.default_rng(1), format="csr")
    path = tmp_path / "s.mtx"
    save_matrix_market(path, S, comment="pattern check")
    back = load_matrix_market(path)
    assert sp.issparse(back)
    assert (back != S).nnz == 0
    np.testing.assert_array_equal(back.indptr, S.indptr)
    np.testing.assert_array_equal(back.indices, S.indices)


def test_coordinate_one_based(tmp_path):
    path = tmp_path / "c.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n% c\n2 3 2\n1 1 5.0\n2 3 -1.5\n")
    A = load_matrix_market(path).toarray()
    assert A[0, 0] == 5.0 and A[1, 2] == -1.5
    assert np.count_nonzero(A) == 2


def test_symmetric_and_pattern_storage(tmp_path):
    path = tmp_path / "sym.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n1 1 2\n3 1 -1\n3 3 4\n")
    np.testing.assert_array_equal(load_matrix_market(path).toarray(), [[2, 0, -1], [0, 0, 0], [-1, 0, 4]])
    pat = tmp_path / "p.mtx"
    pat.write_text("%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 2\n2 1\n")
    np.testing.assert_array_equal(load_matrix_market(pat).toarray(), [[0, 1], [1, 0]])


@pytest.mark.parametrize("text,line", [
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2\n", 2),
    ("%%MatrixMarket matrix coordinate real general\n% note\n2 2 2\n1 1 1.0\n", 4),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1\n", 3),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n", 3),
    ("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n5\n", 7),
    ("not a banner\n1 1 1\n1 1 1\n", 1),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n", 3),
])
def test_parse_errors_carry_line(tmp_path, text, line):
    path = tmp_path / "bad.mtx"
    path.write_text(text)
    with pytest.raises(ParseError) as info:
        load_matrix_market(path)
    assert info.value.line == line
    assert f":{line}:" in str(info.value)


def test_reference_fixture():
    path = DATA / "reference.mtx"
    assert hashlib.sha256(path.read_bytes()).hexdigest() == REFERENCE_SHA256
    A = load_matrix_market(path)
    assert A.shape == (12, 9) and A.nnz == 32
    assert sp.linalg.norm(A) == pytest.approx(REFERENCE_FROBENIUS, rel=1e-13)


def test_vector_io(tmp_path):
    v = np.random.default_rng(3).standard_normal(17)
    txt = tmp_path / "v.txt"
    save_vector(txt, v)
    np.testing.assert_array_equal(load_vector(txt), v)
    mtx = tmp_path / "v.mtx"
    save_matrix_market(mtx, v[:, None])
    np.testing.assert_array_equal(load_vector(mtx), v)


# --- experiments and reports ------------------------------------------------

def _spec(**kw):
    base = dict(generator=GeneratorSpec(m=20, n=10, kappa=3.0, seed=1), solver="dual-sampled",
                config={"epsilon": 0.3, "d": 200}, trials=4, seed=7)
    base.update(kw)
    return ExperimentSpec(**base)


def test_trial_seeds_distinct_and_stable():
    seeds = [trial_seed(7, t) for t in range(100)]
    assert len(set(seeds)) == 100
    assert seeds == [trial_seed(7, t) for t in range(100)]
    assert trial_seed(8, 0) != trial_seed(7, 0)


def test_report_schema_and_reproducibility(tmp_path):
    res = run_convergence_experiment(_spec(), timing=False)
    assert [r["trial"] for r in res.records] == [0, 1, 2, 3]
    for rec in res.records:
        assert set(REPORT_FIELDS) <= set(rec)
        assert rec["status"] == "ok" and rec["phi"] is not None
        assert rec["d"] == 200 and rec["T"] is not None
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_report(res.records, a)
    save_report(run_convergence_experiment(_spec(), timing=False).records, b)
    assert a.read_bytes() == b.read_bytes()
    c, d = tmp_path / "a.csv", tmp_path / "b.csv"
    save_report(res.records, c)
    save_report(run_convergence_experiment(_spec(), jobs=2, timing=False).records, d)
    assert c.read_bytes() == d.read_bytes()
    header = c.read_text().splitlines()[0].split(",")
    assert tuple(header) == REPORT_FIELDS
    assert json.loads(a.read_text())[0]["solver"] == "dual-sampled"


def test_failed_trials_are_recorded():
    spec = ExperimentSpec(generator=GeneratorSpec(m=5, n=5, profile="flat", seed=0),
                          solver="kaczmarz", config={"T": 5}, trials=2)
    res = run_convergence_experiment(spec, timing=False)
    assert all(r["status"] == "ok" for r in res.records)
    # a malformed right-hand side makes every trial fail without stopping the batch
    prob = res.problem
    prob.b = prob.b.copy()
    prob.b[0] = np.nan
    res = run_convergence_experiment(spec, problem=prob, timing=False)
    assert [r["status"] for r in res.records] == ["failed", "failed"]
    assert "RejectedInputError" in res.records[0]["error"]
    assert math.isnan(res.mean_of("final_error"))


def replace_config(spec, cfg):
    return replace(spec, config=cfg)


def test_spec_json_round_trip():
    spec = _spec(outputs=("r.csv",), grid=({"kappa": 2.0}, {"kappa": 4.0}))
    back = ExperimentSpec.from_json(json.dumps(spec.to_dict()))
    assert back.to_dict() == spec.to_dict()
    short = ExperimentSpec.from_dict({"generator": {"m": 4, "n": 4}, "solver": "kaczmarz"})
    assert short.trials == 1 and short.seed is None
    for bad in ({"generator": {"m": 4, "n": 4}, "solver": "nope"},
                {"generator": {"m": 4, "n": 4}, "trials": 0},
                {"generator": {"m": 4, "n": 4}, "config": {"gamma": 1}},
                {"generator": {"m": 4, "n": 5}, "solver": "cd"},
                {"solver": "kaczmarz"}):
        with pytest.raises(RejectedInputError):
            ExperimentSpec.from_dict(bad)
    with pytest.raises(RejectedInputError):
        ExperimentSpec.from_json("{not json")


def test_one_pass_regime_kappa_f_one():
    # a single row: kappa_F = 1, so one projection lands on x* exactly
    spec = ExperimentSpec(generator=GeneratorSpec(m=1, n=6, profile="flat", seed=3),
                          solver="kaczmarz", config={"epsilon": 0.1}, trials=5, seed=1)
    res = run_convergence_experiment(spec, timing=False)
    assert res.problem.summary.kappa_f == pytest.approx(1.0)
    T = math.ceil(math.log(2 / 0.01))
    res = run_convergence_experiment(replace_config(spec, {"epsilon": 0.1, "T": T}), timing=False)
    for rec in res.records:
        assert rec["final_error"] <= 1e-12
        assert rec["iterations"] == 1


def test_mean_curve_below_rate_envelope():
    spec = ExperimentSpec(generator=GeneratorSpec(m=30, n=10, kappa=10.0, seed=4),
                          solver="kaczmarz", trials=200, seed=2)
    prob = generate_matrix(spec.generator)
    kf = prob.summary.kappa_f
    T = int(2 * kf ** 2)
    res = run_convergence_experiment(replace_config(spec, {"T": T}), timing=False, problem=prob)
    curve = res.error_curves["mean"]
    envelope = (1 - kf ** -2) ** np.arange(1, T + 1)
    assert np.all(curve <= 3 * envelope)


def test_fit_loglog():
    slope, intercept = fit_loglog([1, 2, 4, 8], [3, 12, 48, 192])
    assert slope == pytest.approx(2.0)
    assert math.exp(intercept) == pytest.approx(3.0)
    with pytest.raises(RejectedInputError):
        fit_loglog([1], [1])


def test_scaling_experiment_runs_grid():
    spec = ExperimentSpec(generator=GeneratorSpec(m=40, n=20, kappa=2.0, profile="geometric", seed=0),
                          solver="kaczmarz", config={"epsilon": 0.3}, trials=3, seed=0)
    res = run_scaling_experiment(spec, grid=({"kappa": 2.0}, {"kappa": 4.0}), timing=False)
    assert len(res.records) == 6
    assert [p[0] for p in res.points] == pytest.approx([2.0, 4.0])
    assert res.slope > 0


def test_report_formats():
    recs = [{"solver": "kaczmarz", "trial": 0, "final_error": float("nan"), "wall_time": 0.25}]
    rows = json.loads(format_report(recs, "json"))
    assert rows[0]["final_error"] is None and list(rows[0]) == list(REPORT_FIELDS)
    csv_text = format_report(recs, "csv")
    assert csv_text.splitlines()[1].startswith("kaczmarz,0,")
    with pytest.raises(ValueError):
        format_report(recs, "xml")
