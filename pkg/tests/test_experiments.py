import csv
import json

import numpy as np
import pytest

from proxista.errors import SpecError
from proxista.experiments import (RNG_NAME, build_problem, default_spec, load_spec,
                                  plot_penalty_gallery, run_experiment, run_integer_blocks,
                                  run_sparse_deconv, validate_spec, verify_claims)
from proxista.penalty import make_firm, make_integer_lattice, make_zero


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=object)


# -- specs -------------------------------------------------------------------

@pytest.mark.parametrize("name", ["sparse-deconv", "integer-blocks", "firm-gallery"])
def test_bundled_specs_validate(name):
    spec = default_spec(name)
    assert spec["schema_version"] == 1
    assert validate_spec(spec) == spec


def test_unknown_bundled_spec():
    with pytest.raises(SpecError):
        default_spec("nope")


@pytest.mark.parametrize("patch", [
    {"schema_version": 2},
    {"experiment": "other"},
    {"penalty": {"family": "scad"}},
    {"noise": {"std": -1.0, "seed": 0}},
    {"solvers": ["ista-a2"]},
    {"unexpected": 1},
])
def test_schema_rejections(patch):
    spec = default_spec("sparse-deconv")
    spec.update(patch)
    with pytest.raises(SpecError):
        validate_spec(spec)


def test_load_spec_errors(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(SpecError):
        load_spec(tmp_path / "bad.json")
    with pytest.raises(SpecError):
        load_spec(tmp_path / "missing.json")


def test_random_signal_needs_seed():
    spec = default_spec("sparse-deconv")
    del spec["signal"]["seed"]
    with pytest.raises(SpecError):
        build_problem(spec)


# -- problem assembly --------------------------------------------------------

def test_exp1_instance(exp1_problem):
    p = exp1_problem
    assert p.H.shape == (60, 50)
    assert np.count_nonzero(p.x_true) == 10
    assert np.all((np.abs(p.x_true[p.x_true != 0]) >= 1) & (np.abs(p.x_true[p.x_true != 0]) <= 2))
    assert p.rho == p.bounds.sigma_m
    assert p.tau == pytest.approx(3 * p.rho * 0.1)
    assert p.alpha_ratio == pytest.approx(2 * p.bounds.sigma_M / (p.bounds.sigma_M + p.rho))


def test_exp2_instance(exp2_problem):
    p = exp2_problem
    assert p.H.shape == (70, 20)
    assert set(np.unique(p.x_true)) <= {0.0, 1.0, 2.0, 3.0, 4.0}
    assert p.tau == pytest.approx(p.bounds.sigma_m / 2)
    assert p.rho == pytest.approx(2 * p.tau)


def test_singular_gram_rejected():
    spec = {"schema_version": 1, "experiment": "custom",
            "operator": {"matrix": [[1.0, 0.0], [0.0, 0.0]]},
            "penalty": {"family": "l1", "weight": 0.1},
            "signal": {"values": [1.0, 0.0]}}
    with pytest.raises(SpecError, match="not invertible"):
        build_problem(spec)


def test_step_above_rho_bound_rejected():
    spec = default_spec("integer-blocks")
    spec["overrides"] = {"ista-a1": {"alpha": 1.0}}
    with pytest.raises(SpecError, match="alpha\\*rho < 1"):
        build_problem(spec)


def test_seeds_drive_signal_and_noise():
    a = build_problem(default_spec("sparse-deconv"))
    spec = default_spec("sparse-deconv")
    spec["noise"]["seed"] = 2
    b = build_problem(spec)
    assert np.array_equal(a.x_true, b.x_true) and not np.array_equal(a.noise, b.noise)


# -- runs --------------------------------------------------------------------

def test_zero_signal_zero_noise_stays_at_origin():
    spec = default_spec("sparse-deconv")
    spec["noise"]["std"] = 0.0
    spec["signal"]["support"] = 0
    spec["solvers"] = ["ista-a0", "ista-a1", "fista", "twist"]
    spec["overrides"] = {}
    res = run_experiment(spec, reference=False)
    for tr in res.traces.values():
        assert np.all(tr.x == 0) and tr.final_cost == 0.0


def test_integer_blocks_exact_recovery_at_low_noise():
    spec = default_spec("integer-blocks")
    spec["noise"]["std"] = 0.0
    spec["penalty"]["tau"] = 0.05
    res = run_integer_blocks(spec)
    assert res.manifest["recovery"]["estimate"]["rounded_equals_true"]


def test_identity_blocks_integer_data_one_prox():
    y = [0.0, 3.0, 1.0, 4.0, 2.0]
    spec = {"schema_version": 1, "experiment": "integer-blocks",
            "operator": {"blur": [1.0], "block_length": 1, "n_coeffs": 5},
            "penalty": {"family": "integer-lattice", "K": 4, "tau": 0.25},
            "signal": {"values": y}, "noise": {"std": 0.0, "seed": 0},
            "solvers": ["ista-a0"], "stop": {"max_iters": 5, "fp_tol": 0.0},
            "reference": {"iters": 0}}
    res = run_experiment(spec)
    tr = res.traces["ista-a0"]
    assert np.array_equal(tr.x, y)
    assert tr.fp_residual[1] == 0.0


def test_wrong_runner_tag():
    with pytest.raises(SpecError):
        run_integer_blocks(default_spec("sparse-deconv"))
    with pytest.raises(SpecError):
        run_sparse_deconv(default_spec("integer-blocks"))


@pytest.fixture(scope="module")
def exp1_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp1")
    return out, run_sparse_deconv(out=out)


def test_exp1_artifacts(exp1_run):
    out, res = exp1_run
    names = {p.name for p in out.iterdir()}
    for n in ("manifest.json", "signal.csv", "observation.csv", "cost.svg", "distance.svg",
              "signal.svg", "trace_ista-a0.csv", "trace_ista-a1.csv", "trace_fista.csv",
              "trace_twist.csv", "trace_fista-a1.csv"):
        assert n in names
    head, rows = read_csv(out / "trace_ista-a1.csv")
    assert head == ["iter", "cost", "fp_residual", "dist_to_ref", "elapsed_s"]
    assert all(r[4] == "" for r in rows) and all(r[3] != "" for r in rows)
    assert (out / "cost.svg").read_text().startswith("<svg")


def test_exp1_manifest(exp1_run):
    out, res = exp1_run
    m = json.loads((out / "manifest.json").read_text())
    inst = m["instance"]
    assert m["rng"] == RNG_NAME
    assert inst["alpha_ratio"] == pytest.approx(inst["alpha_ratio_formula"], rel=1e-14)
    assert inst["alpha_0"] == pytest.approx(1 / inst["sigma_M"])
    assert m["reference"]["certified"] and m["reference"]["fp_residual"] < 1e-8
    assert set(m["divergences"]) == {"fista-a1"}
    assert res.unexpected_divergence == []
    for name, entry in m["solvers"].items():
        head, rows = read_csv(out / f"trace_{name}.csv")
        assert float(rows[-1][1]) == entry["final_cost"]


def test_exp1_qualitative_orderings(exp1_run):
    _, res = exp1_run
    t0, t1 = res.traces["ista-a0"], res.traces["ista-a1"]
    assert t1.first_iter_below(1e-6) < t0.first_iter_below(1e-6)
    assert t1.cost[200] <= t0.cost[200] * (1 + 1e-12)


def test_manifest_replays_bit_identically(exp1_run, tmp_path):
    out, _ = exp1_run
    run_experiment(load_spec(out / "manifest.json"), tmp_path, fmt="csv")
    for f in out.glob("*.csv"):
        assert f.read_bytes() == (tmp_path / f.name).read_bytes()


def test_unexpected_divergence_is_reported():
    spec = default_spec("sparse-deconv")
    spec["solvers"] = ["fista-a1"]
    spec["overrides"] = {}
    spec["reference"]["iters"] = 0
    res = run_experiment(spec)
    assert res.unexpected_divergence == ["fista-a1"]


def test_integer_blocks_artifacts(tmp_path):
    res = run_integer_blocks(out=tmp_path)
    rec = json.loads((tmp_path / "recovery.json").read_text())
    assert rec["estimate"]["rounded_equals_true"]
    head, rows = read_csv(tmp_path / "signal.csv")
    assert {"x_true", "x_ref", "x_least_squares", "x_rounded"} <= set(head)
    assert res.manifest["recovery"] == rec


def test_format_switch(tmp_path):
    spec = default_spec("integer-blocks")
    run_experiment(spec, tmp_path / "svg", fmt="svg")
    names = {p.name for p in (tmp_path / "svg").iterdir()}
    assert not any(n.endswith(".csv") for n in names) and "cost.svg" in names


# -- gallery -----------------------------------------------------------------

def test_gallery_firm_shape(tmp_path):
    s, vals, thr = plot_penalty_gallery(make_firm(1.0, 0.5), alphas=[1.0], range_=(-3, 3),
                                        samples=601, out=tmp_path)
    T = thr[1.0]
    assert np.all(T[np.abs(s) <= 1] == 0)
    ramp = (s > 1.01) & (s < 1.99)
    assert np.allclose(np.diff(T[ramp]) / np.diff(s[ramp]), 2.0)
    beyond = np.abs(s) >= 2
    assert np.array_equal(T[beyond], s[beyond])
    head, rows = read_csv(tmp_path / "breakpoints.csv")
    marks = sorted(float(r[2]) for r in rows)
    assert marks == [-2.0, -1.0, 1.0, 2.0]
    for n in ("penalty.csv", "threshold.csv", "penalty.svg", "threshold.svg"):
        assert (tmp_path / n).exists()


def test_gallery_lattice_staircase():
    s, vals, thr = plot_penalty_gallery(make_integer_lattice(4), alphas=[0.25], range_=(-1, 5),
                                        samples=6001)
    T = thr[0.25]
    for n in range(5):
        plateau = (s >= n - 0.25 + 1e-9) & (s <= n + 0.25 - 1e-9) & (s >= 0) & (s <= 4)
        assert np.all(T[plateau] == n)
    assert np.all(np.isinf(vals[(s < 0) | (s > 4)]))


def test_gallery_zero_penalty_identity():
    s, _, thr = plot_penalty_gallery(make_zero(), alphas=[0.7], range_=(-2, 2), samples=11)
    assert np.array_equal(thr[0.7], s)


def test_gallery_rejects_large_step():
    with pytest.raises(SpecError, match="need alpha < 2"):
        plot_penalty_gallery(make_firm(1.0, 0.5), alphas=[2.0])


def test_gallery_from_experiment_spec(tmp_path):
    s, vals, thr = plot_penalty_gallery(default_spec("sparse-deconv"), out=tmp_path)
    assert len(thr) == 2


# -- verification ------------------------------------------------------------

def test_verify_default_passes(tmp_path):
    b = verify_claims(default_spec("sparse-deconv"), tmp_path)
    assert b.passed
    d = json.loads((tmp_path / "verify.json").read_text())
    assert d["passed"] and len(d["reports"]) >= 12


def test_verify_large_step_fails(tmp_path):
    spec = default_spec("sparse-deconv")
    spec["verify"] = {"alpha_scale": 1.5}
    b = verify_claims(spec, tmp_path)
    failed = {r.property for r in b.reports if not r.verdict}
    assert "monotone-descent" in failed
    assert not json.loads((tmp_path / "verify.json").read_text())["passed"]


def test_verify_convex_instance():
    spec = default_spec("sparse-deconv")
    spec["penalty"] = {"family": "l1", "weight": 0.2}
    b = verify_claims(spec)
    assert b.passed and "contraction" in {r.property for r in b.reports}


def test_verify_integer_blocks():
    assert verify_claims(default_spec("integer-blocks")).passed
