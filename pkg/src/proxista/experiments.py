"""Declarative reproduction runs: spec files, problem assembly, artifacts.

A spec is a JSON document (``schema_version`` 1) describing the operator,
penalty, noise, true signal, solver set and stop rule of a run. The two
bundled specs reproduce the sparse deconvolution and integer-block
experiments; ``experiment: custom`` accepts an explicit matrix or signal.

Every random draw comes from ``numpy.random.Philox`` keyed by an explicit seed,
so a run is fully determined by its resolved spec. The manifest written next
to the artifacts embeds that resolved spec and can be fed back as ``--spec``.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import platform
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .analysis import (OperatorProbe, PropertyReport, affine_averaged_interval,
                       certify_minimizer, check_averaged, cocoercivity_check,
                       composition_averaged_check, contraction_check, descent_lemma_check,
                       empirical_lipschitz, estimate_linear_rate, ista_sequence_check,
                       mm_majorization_check, monotone_descent_check, shifted_gradient_check,
                       surrogate_gap_check)
from .charts import line_chart
from .errors import DivergenceError, SpecError
from .linop import (LinearMap, SpectralBounds, compose, gram_spectral_bounds,
                    make_block_synthesis, make_convolution, make_dense)
from .penalty import (Penalty, make_firm, make_integer_lattice, make_l1, make_zero,
                      scale_penalty)
from .solver import (SolveTrace, StepPolicy, StopRule, contraction_rate, max_step_fb,
                     max_step_mm, quadratic_term, solve_fista, solve_ista, solve_twist,
                     twist_parameters)

__all__ = [
    "SPEC_SCHEMA",
    "RNG_NAME",
    "SOLVER_NAMES",
    "Problem",
    "RunResult",
    "VerifyBundle",
    "load_spec",
    "default_spec",
    "validate_spec",
    "build_problem",
    "run_experiment",
    "run_sparse_deconv",
    "run_integer_blocks",
    "plot_penalty_gallery",
    "verify_claims",
]

RNG_NAME = "numpy.random.Philox (Philox4x64-10, key = seed)"
SOLVER_NAMES = ("ista-a0", "ista-a1", "fista", "fista-a1", "twist")
SINGULAR_GRAM = 1e-12

_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 1}
_seed = {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1}

SPEC_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "experiment", "penalty"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "experiment": {"enum": ["sparse-deconv", "integer-blocks", "custom"]},
        "operator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "filter": _vec,
                "signal_length": {"type": "integer", "minimum": 1},
                "blur": _vec,
                "block_length": {"type": "integer", "minimum": 1},
                "n_coeffs": {"type": "integer", "minimum": 1},
                "matrix": {"type": "array", "items": _vec, "minItems": 1},
            },
        },
        "penalty": {
            "type": "object",
            "required": ["family"],
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["firm", "integer-lattice", "l1", "zero"]},
                "rho": {"oneOf": [{"const": "sigma_m"}, {"type": "number", "minimum": 0}]},
                "tau": {"oneOf": [{"enum": ["3*rho*std", "sigma_m/2"]},
                                  {"type": "number", "minimum": 0}]},
                "K": {"type": "integer", "minimum": 1},
                "weight": {"type": "number", "minimum": 0},
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "required": ["std", "seed"],
            "properties": {"std": {"type": "number", "minimum": 0}, "seed": _seed},
        },
        "signal": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "support": {"type": "integer", "minimum": 0},
                "amplitude": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "K": {"type": "integer", "minimum": 1},
                "seed": _seed,
                "values": _vec,
            },
        },
        "solvers": {"type": "array", "items": {"enum": list(SOLVER_NAMES)}, "uniqueItems": True},
        "overrides": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "alpha": {"type": "number", "exclusiveMinimum": 0},
                    "max_iters": {"type": "integer", "minimum": 0},
                    "expect_divergence": {"type": "boolean"},
                },
            },
        },
        "stop": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_iters": {"type": "integer", "minimum": 0},
                "fp_tol": {"type": "number", "minimum": 0},
            },
        },
        "reference": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "iters": {"type": "integer", "minimum": 0},
                "certify_tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "format": {"enum": ["csv", "svg", "both"]},
                "record_wall_time": {"type": "boolean"},
            },
        },
        "gallery": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alphas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                           "minItems": 1},
                "range": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "samples": {"type": "integer", "minimum": 2},
            },
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha_scale": {"type": "number", "exclusiveMinimum": 0},
                "trials": {"type": "integer", "minimum": 1},
                "probes": {"type": "integer", "minimum": 1},
                "iters": {"type": "integer", "minimum": 1},
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "seed": _seed,
            },
        },
    },
}

_DEFAULTS = {
    "noise": {"std": 0.0, "seed": 0},
    "solvers": ["ista-a0", "ista-a1", "fista", "twist"],
    "overrides": {},
    "stop": {"max_iters": 1000, "fp_tol": 1e-13},
    "reference": {"iters": 10_000, "certify_tol": 1e-8},
    "output": {"format": "both", "record_wall_time": False},
    "verify": {"alpha_scale": 0.999, "trials": 10_000, "probes": 1000, "iters": 300,
               "radius": 10.0, "seed": 0},
}


def default_spec(name: str) -> dict:
    """A bundled spec: ``"sparse-deconv"``, ``"integer-blocks"`` or ``"firm-gallery"``."""
    fname = name.replace("-", "_") + ".json"
    try:
        text = resources.files("proxista.specs").joinpath(fname).read_text()
    except FileNotFoundError:
        raise SpecError(f"no bundled spec named {name!r}") from None
    return validate_spec(json.loads(text))


def validate_spec(spec: dict) -> dict:
    """Check ``spec`` against the schema and fill defaults. Returns a new dict.

    A run manifest is accepted too; its embedded spec is used.
    """
    if isinstance(spec, dict) and "manifest_version" in spec:
        spec = spec.get("spec")
    try:
        jsonschema.validate(spec, SPEC_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise SpecError(f"invalid spec at {where}: {e.message}") from None
    out = copy.deepcopy(spec)
    for key, val in _DEFAULTS.items():
        if isinstance(val, dict):
            out[key] = {**copy.deepcopy(val), **out.get(key, {})}
        else:
            out.setdefault(key, copy.deepcopy(val))
    return out


def load_spec(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise SpecError(f"cannot read spec {path}: {e}") from None
    return validate_spec(raw)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


# -- problem assembly --------------------------------------------------------

@dataclass
class Problem:
    """A resolved instance: operator, data, penalty and step sizes."""

    spec: dict
    H: LinearMap
    y: np.ndarray
    x_true: np.ndarray
    noise: np.ndarray
    bounds: SpectralBounds
    penalty: Penalty
    rho: float
    tau: float | None
    alphas: dict = field(default_factory=dict)

    @property
    def f(self):
        return quadratic_term(self.H, self.y, self.bounds)

    @property
    def n(self):
        return self.H.in_dim

    @property
    def alpha_ratio(self):
        return self.alphas["ista-a1"] / self.alphas["ista-a0"]


def _build_operator(spec) -> LinearMap:
    op = spec.get("operator", {})
    exp = spec["experiment"]
    if "matrix" in op:
        return make_dense(np.array(op["matrix"], dtype=float))
    if exp == "integer-blocks" or "blur" in op:
        for key in ("blur", "block_length", "n_coeffs"):
            if key not in op:
                raise SpecError(f"integer-blocks operator needs '{key}'")
        B, K = op["block_length"], op["n_coeffs"]
        F = make_convolution(np.array(op["blur"], dtype=float), B * K)
        return compose(F, make_block_synthesis(B, K))
    if "filter" in op and "signal_length" in op:
        return make_convolution(np.array(op["filter"], dtype=float), op["signal_length"])
    raise SpecError("operator needs 'matrix', 'filter'+'signal_length' or "
                    "'blur'+'block_length'+'n_coeffs'")


def _build_signal(spec, n) -> np.ndarray:
    sig = spec.get("signal", {})
    if "values" in sig:
        x = np.array(sig["values"], dtype=float)
        if x.size != n:
            raise SpecError(f"signal has {x.size} values, operator expects {n}")
        return x
    if "seed" not in sig:
        raise SpecError("a random signal needs an explicit 'seed'")
    rng = _rng(sig["seed"])
    if spec["experiment"] == "integer-blocks" or "K" in sig:
        return rng.integers(0, sig.get("K", 4) + 1, n).astype(float)
    k = sig.get("support", 10)
    if k > n:
        raise SpecError(f"support {k} exceeds signal length {n}")
    lo, hi = sig.get("amplitude", [1.0, 2.0])
    x = np.zeros(n)
    idx = rng.choice(n, k, replace=False)
    x[idx] = rng.choice([-1.0, 1.0], k) * rng.uniform(lo, hi, k)
    return x


def _resolve_penalty(pspec, bounds, std):
    fam = pspec["family"]
    rho_rule = pspec.get("rho", "sigma_m")
    rho = bounds.sigma_m if rho_rule == "sigma_m" else float(rho_rule)
    tau_rule = pspec.get("tau")
    if tau_rule == "3*rho*std":
        tau = 3.0 * rho * std
    elif tau_rule == "sigma_m/2":
        tau = 0.5 * bounds.sigma_m
    elif tau_rule is None:
        tau = None
    else:
        tau = float(tau_rule)
    if fam == "zero":
        return make_zero(), 0.0, None
    if fam == "l1":
        w = pspec.get("weight", tau if tau is not None else 1.0)
        return make_l1(w), 0.0, w
    if fam == "firm":
        if tau is None:
            raise SpecError("firm penalty needs a 'tau' rule")
        if rho <= 0:
            raise SpecError(f"firm penalty needs rho > 0, got {rho}")
        if tau == 0:
            # the firm penalty vanishes identically as tau -> 0
            return make_zero(), 0.0, 0.0
        p = make_firm(tau, rho)
        return p, p.rho, tau
    # integer lattice, weighted by tau (rho_eff = 2 tau)
    base = make_integer_lattice(pspec.get("K", 4))
    t = 1.0 if tau is None else tau
    if t <= 0:
        raise SpecError("integer-lattice weight tau must be positive")
    p = scale_penalty(base, t)
    return p, p.rho, t


def build_problem(spec: dict) -> Problem:
    """Assemble the instance described by a validated spec.

    Raises :class:`SpecError` for a (numerically) singular Gram matrix or when a
    requested step violates ``alpha * rho < 1``.
    """
    spec = validate_spec(spec)
    H = _build_operator(spec)
    bounds = gram_spectral_bounds(H)
    if bounds.sigma_m <= SINGULAR_GRAM:
        raise SpecError(f"Gram matrix is not invertible: sigma_m = {bounds.sigma_m:.3e} "
                        f"<= {SINGULAR_GRAM:g}")
    x_true = _build_signal(spec, H.in_dim)
    std = spec["noise"]["std"]
    u = std * _rng(spec["noise"]["seed"]).standard_normal(H.out_dim)
    y = H.apply(x_true) + u
    p, rho, tau = _resolve_penalty(spec["penalty"], bounds, std)
    alphas = {
        "ista-a0": max_step_mm(bounds),
        "ista-a1": max_step_fb(bounds.sigma_M, rho),
        "fista": max_step_mm(bounds),
        "fista-a1": max_step_fb(bounds.sigma_M, rho),
        "twist": max_step_mm(bounds),
    }
    for name, ov in spec["overrides"].items():
        if name not in SOLVER_NAMES:
            raise SpecError(f"override for unknown solver {name!r}")
        if "alpha" in ov:
            alphas[name] = float(ov["alpha"])
    for name in spec["solvers"]:
        a = alphas[name]
        if a * rho >= 1:
            raise SpecError(
                f"step for {name} violates alpha*rho < 1: alpha = {a:.6g}, rho = {rho:.6g}, "
                f"alpha*rho = {a * rho:.6g}; need alpha < 1/rho = {1 / rho:.6g}")
    return Problem(spec, H, y, x_true, u, bounds, p, rho, tau, alphas)


# -- running solvers ---------------------------------------------------------

def _stop_for(spec, name, x_ref, record=False):
    st = spec["stop"]
    ov = spec["overrides"].get(name, {})
    return StopRule(max_iters=ov.get("max_iters", st["max_iters"]), fp_tol=st["fp_tol"],
                    stall_window=None, x_ref=x_ref, record_iterates=record)


def run_solver(problem: Problem, name: str, x_ref=None, stop: StopRule | None = None) -> SolveTrace:
    """Run one named solver from ``x0 = 0``."""
    f, p = problem.f, problem.penalty
    x0 = np.zeros(problem.n)
    stop = stop or _stop_for(problem.spec, name, x_ref)
    alpha = problem.alphas[name]
    if name.startswith("ista"):
        policy = StepPolicy.explicit(alpha) if name in problem.spec["overrides"] and \
            "alpha" in problem.spec["overrides"][name] else (
                StepPolicy.mm(problem.bounds) if name == "ista-a0"
                else StepPolicy.fb(problem.bounds.sigma_M, problem.rho))
        tr = solve_ista(f, p, x0, policy, stop)
    elif name.startswith("fista"):
        tr = solve_fista(f, p, x0, alpha, stop)
    else:
        params = twist_parameters(problem.bounds)
        params = type(params)(params.a, params.b, params.kappa, alpha)
        tr = solve_twist(f, p, x0, params, stop)
    tr.solver = name
    return tr


def compute_reference(problem: Problem):
    """Reference minimizer from a fixed number of ISTA iterations at ``alpha_0``.

    Returns ``(x, fp_residual, certified)``; certification means the
    fixed-point residual is below the spec's ``certify_tol``.
    """
    ref = problem.spec["reference"]
    tr = solve_ista(problem.f, problem.penalty, np.zeros(problem.n),
                    StepPolicy.mm(problem.bounds),
                    StopRule(max_iters=ref["iters"], fp_tol=0.0, stall_window=None))
    r = tr.fp_residual[-1]
    return tr.x, r, bool(r < ref["certify_tol"])


@dataclass
class RunResult:
    """What a run produced: traces, reference, manifest and written files."""

    problem: Problem
    traces: dict
    diverged: dict
    x_ref: np.ndarray | None
    manifest: dict
    files: list

    @property
    def unexpected_divergence(self):
        ov = self.problem.spec["overrides"]
        return [k for k in self.diverged if not ov.get(k, {}).get("expect_divergence", False)]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _r(v):
    return repr(float(v))


def _charts(out, problem, traces, x_ref, files, extra_signals):
    xs = {k: (np.arange(len(t.cost)), np.asarray(t.cost)) for k, t in traces.items()}
    files.append(_save(out / "cost.svg", line_chart(
        xs, title="Cost", xlabel="iteration", ylabel="cost", logy=True)))
    if x_ref is not None:
        ds = {k: (np.arange(len(t.dist_to_ref)), np.asarray(t.dist_to_ref, dtype=float))
              for k, t in traces.items()}
        files.append(_save(out / "distance.svg", line_chart(
            ds, title="Distance to reference", xlabel="iteration", ylabel="|x - x_ref|",
            logy=True)))
    idx = np.arange(problem.n)
    sig = {"true": (idx, problem.x_true)}
    if x_ref is not None:
        sig["estimate"] = (idx, x_ref)
    for k, v in extra_signals.items():
        sig[k] = (idx, v)
    files.append(_save(out / "signal.svg", line_chart(
        sig, title="Signal and estimate", xlabel="index", ylabel="value", markers=True)))


def _save(path, text):
    Path(path).write_text(text)
    return Path(path).name


def run_experiment(spec: dict, out=None, fmt: str | None = None, reference: bool = True) -> RunResult:
    """Build the instance, run the solver set and write artifacts into ``out``.

    Solvers flagged ``expect_divergence`` are run to their divergence; their
    partial traces are kept. Any other divergence is recorded and reported
    through :attr:`RunResult.unexpected_divergence`.
    """
    t_start = time.perf_counter()
    problem = build_problem(spec)
    spec = problem.spec
    fmt = fmt or spec["output"]["format"]
    wall = spec["output"]["record_wall_time"]
    timing = {}

    x_ref, ref_res, certified = None, None, None
    if reference and spec["reference"]["iters"] > 0:
        t0 = time.perf_counter()
        x_ref, ref_res, certified = compute_reference(problem)
        timing["reference_s"] = time.perf_counter() - t0

    traces, diverged = {}, {}
    for name in spec["solvers"]:
        t0 = time.perf_counter()
        try:
            traces[name] = run_solver(problem, name, x_ref)
        except DivergenceError as e:
            traces[name] = e.trace
            e.trace.solver = name
            diverged[name] = {"completed_iterations": e.trace.n_iters, "message": str(e)}
        timing[f"{name}_s"] = time.perf_counter() - t0

    files = []
    extra = {}
    recovery = None
    if spec["experiment"] == "integer-blocks":
        recovery, extra = _integer_report(problem, x_ref)

    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        if fmt in ("csv", "both"):
            for name, tr in traces.items():
                tr.write_csv(out / f"trace_{name}.csv", wall_time=wall)
                files.append(f"trace_{name}.csv")
            cols = {"x_true": problem.x_true}
            if x_ref is not None:
                cols["x_ref"] = x_ref
            for name, tr in traces.items():
                if name not in diverged:
                    cols[f"x_{name}"] = tr.x
            cols.update(extra)
            _write_csv(out / "signal.csv", ["index", *cols],
                       [[i, *(_r(c[i]) for c in cols.values())] for i in range(problem.n)])
            _write_csv(out / "observation.csv", ["index", "y", "noise"],
                       [[i, _r(problem.y[i]), _r(problem.noise[i])] for i in range(problem.H.out_dim)])
            files += ["signal.csv", "observation.csv"]
        if fmt in ("svg", "both"):
            _charts(out, problem, traces, x_ref, files, extra)
        if recovery is not None:
            (out / "recovery.json").write_text(json.dumps(recovery, indent=2) + "\n")
            files.append("recovery.json")

    timing["total_s"] = time.perf_counter() - t_start
    manifest = _manifest(problem, traces, diverged, x_ref, ref_res, certified, timing, files,
                         recovery)
    if out is not None:
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        files.append("manifest.json")
    return RunResult(problem, traces, diverged, x_ref, manifest, files)


def _integer_report(problem, x_ref):
    """Least-squares baseline and rounded-coefficient recovery."""
    A = problem.H.to_dense()
    x_ls = np.linalg.lstsq(A, problem.y, rcond=None)[0]
    extra = {"x_least_squares": x_ls}
    c = problem.x_true
    rep = {
        "least_squares": {
            "max_abs_error": float(np.max(np.abs(x_ls - c))),
            "rounded_errors": int(np.sum(np.round(x_ls) != c)),
        },
    }
    if x_ref is not None:
        rounded = np.round(x_ref)
        extra["x_rounded"] = rounded
        rep["estimate"] = {
            "max_abs_error": float(np.max(np.abs(x_ref - c))),
            "rounded_errors": int(np.sum(rounded != c)),
            "rounded_equals_true": bool(np.array_equal(rounded, c)),
        }
    return rep, extra


def _manifest(problem, traces, diverged, x_ref, ref_res, certified, timing, files, recovery):
    b = problem.bounds
    solvers = {}
    for name, tr in traces.items():
        entry = {
            "alpha": problem.alphas[name],
            "iterations": tr.n_iters,
            "stop_reason": tr.stop_reason,
            "final_cost": float(tr.cost[-1]),
        }
        if x_ref is not None and tr.dist_to_ref:
            entry["first_iter_dist_le_1e-6"] = tr.first_iter_below(1e-6)
        if name == "twist":
            tp = twist_parameters(b)
            entry["twist"] = {"a": tp.a, "b": tp.b, "kappa": tp.kappa}
        solvers[name] = entry
    m = {
        "manifest_version": 1,
        "software": {"proxista": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "rng": RNG_NAME,
        "seeds": {"noise": problem.spec["noise"]["seed"],
                  "signal": problem.spec.get("signal", {}).get("seed")},
        "instance": {
            "shape": list(problem.H.shape),
            "sigma_m": b.sigma_m,
            "sigma_M": b.sigma_M,
            "spectral_method": b.method,
            "rho": problem.rho,
            "tau": problem.tau,
            "penalty": repr(problem.penalty),
            "alpha": {k: problem.alphas[k] for k in problem.spec["solvers"]},
            "alpha_0": problem.alphas["ista-a0"],
            "alpha_1": problem.alphas["ista-a1"],
            "alpha_ratio": problem.alpha_ratio,
            "alpha_ratio_formula": 2 * b.sigma_M / (b.sigma_M + problem.rho),
        },
        "reference": None if x_ref is None else {
            "iters": problem.spec["reference"]["iters"],
            "fp_residual": ref_res,
            "certified": certified,
            "final_cost": float(problem.f.eval(x_ref) + problem.penalty.eval(x_ref).sum()),
        },
        "solvers": solvers,
        "divergences": diverged,
        "timing": timing,
        "files": sorted(files),
        "spec": problem.spec,
    }
    if recovery is not None:
        m["recovery"] = recovery
    return m


def run_sparse_deconv(spec: dict | None = None, out=None, fmt=None) -> RunResult:
    spec = validate_spec(spec or default_spec("sparse-deconv"))
    if spec["experiment"] != "sparse-deconv":
        raise SpecError(f"expected a sparse-deconv spec, got {spec['experiment']!r}")
    return run_experiment(spec, out, fmt)


def run_integer_blocks(spec: dict | None = None, out=None, fmt=None) -> RunResult:
    spec = validate_spec(spec or default_spec("integer-blocks"))
    if spec["experiment"] != "integer-blocks":
        raise SpecError(f"expected an integer-blocks spec, got {spec['experiment']!r}")
    return run_experiment(spec, out, fmt)


# -- penalty gallery ---------------------------------------------------------

def _gallery_penalty(spec):
    """The scalar penalty of a spec; rule-based parameters need the instance."""
    pspec = spec["penalty"]
    rules = [pspec.get("rho"), pspec.get("tau")]
    if any(isinstance(r, str) for r in rules) or (pspec["family"] == "firm" and "rho" not in pspec):
        prob = build_problem(spec)
        return prob.penalty, [prob.alphas["ista-a0"], prob.alphas["ista-a1"]]
    p, _, _ = _resolve_penalty(pspec, SpectralBounds(1.0, 1.0, "n/a", 0.0), 0.0)
    return p, None


def plot_penalty_gallery(spec_or_penalty, alphas=None, range_=None, samples=None, out=None,
                         fmt: str = "both"):
    """Tabulate ``P(s)`` and ``T_alpha(s)`` and chart them with breakpoint marks.

    ``spec_or_penalty`` is a spec dict or a scalar :class:`Penalty`. Returns
    ``(s, values, thresholds)`` with ``thresholds[alpha]`` an array. Any
    ``alpha`` with ``alpha * rho >= 1`` is rejected with the bound stated.
    """
    if isinstance(spec_or_penalty, Penalty):
        p, spec_alphas, g = spec_or_penalty, None, {}
    else:
        spec = validate_spec(spec_or_penalty)
        p, spec_alphas = _gallery_penalty(spec)
        g = spec.get("gallery", {})
    if p.size is not None:
        raise SpecError("the gallery needs a scalar penalty")
    alphas = list(alphas or g.get("alphas") or spec_alphas or [0.5])
    for a in alphas:
        if a <= 0 or a * p.rho >= 1:
            raise SpecError(f"alpha = {a:g} violates alpha*rho < 1 (rho = {p.rho:g}); "
                            f"need alpha < {1 / p.rho if p.rho else math.inf:g}")
    if range_ is None:
        range_ = g.get("range")
    if range_ is None:
        lo, hi = p.anchor_range()
        span = max(hi - lo, 1.0)
        range_ = (lo - 0.5 * span, hi + 0.5 * span)
    samples = samples or g.get("samples", 1201)
    s = np.linspace(range_[0], range_[1], samples)
    vals = np.asarray(p.value(s), dtype=float)
    thr = {a: np.asarray(p.prox(s, a), dtype=float) for a in alphas}
    marks = _gallery_marks(p, alphas)

    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        if fmt in ("csv", "both"):
            _write_csv(out / "penalty.csv", ["s", "P"], [[_r(a), _r(b)] for a, b in zip(s, vals)])
            _write_csv(out / "threshold.csv", ["s", *(f"T_{a:g}" for a in alphas)],
                       [[_r(s[i]), *(_r(thr[a][i]) for a in alphas)] for i in range(s.size)])
            _write_csv(out / "breakpoints.csv", ["alpha", "kind", "s"],
                       [[_r(a), k, _r(v)] for a, k, v in marks])
        if fmt in ("svg", "both"):
            fin = np.isfinite(vals)
            pen_marks = [(float(v), f"{v:g}") for v in p.breakpoints()
                         if range_[0] <= v <= range_[1]]
            _save(out / "penalty.svg", line_chart(
                {repr(p): (s[fin], vals[fin])}, title="Penalty", xlabel="s", ylabel="P(s)",
                vlines=pen_marks))
            thr_marks = [(float(v), f"{k}") for a, k, v in marks
                         if range_[0] <= v <= range_[1] and a == alphas[0]]
            series = {f"alpha={a:.4g}": (s, thr[a]) for a in alphas}
            _save(out / "threshold.svg", line_chart(
                series, title="Threshold", xlabel="s", ylabel="T(s)", vlines=thr_marks))
    return s, vals, thr


def _gallery_marks(p, alphas):
    """Breakpoints of the threshold: deadzone edges and, for firm, the knee."""
    from .penalty import FirmPenalty, IntegerLatticePenalty, L1Penalty, ScaledPenalty

    base, t = p, 1.0
    if isinstance(p, ScaledPenalty):
        base, t = p.base, p.t
    marks = []
    for a in alphas:
        ta = t * a
        if isinstance(base, FirmPenalty):
            marks += [(a, "deadzone", -ta * base.tau), (a, "deadzone", ta * base.tau),
                      (a, "knee", -base.knee), (a, "knee", base.knee)]
        elif isinstance(base, L1Penalty):
            marks += [(a, "deadzone", -ta * base.weight), (a, "deadzone", ta * base.weight)]
        elif isinstance(base, IntegerLatticePenalty):
            for n in range(base.K + 1):
                marks += [(a, "plateau", n - ta), (a, "plateau", n + ta)]
    return marks


# -- claim verification ------------------------------------------------------

@dataclass
class VerifyBundle:
    reports: list
    alpha: float
    skipped: dict

    @property
    def passed(self):
        return all(r.verdict for r in self.reports)

    def to_dict(self):
        return {"passed": self.passed, "alpha": self.alpha, "skipped": self.skipped,
                "reports": [r.to_dict() for r in self.reports]}


def _scalar(p):
    return getattr(p, "scalar", p)


def _fail_report(prop, why, detail=None):
    return PropertyReport(prop, 0, 0, math.inf, [], [], False, 0.0, {"reason": why, **(detail or {})})


def verify_claims(spec: dict, out=None) -> VerifyBundle:
    """Run the operator-property suite on the instance a spec describes.

    The step under test is ``alpha = alpha_scale * 2/(sigma_M + rho)``. Every
    check is reported, including those that are expected to fail for a step
    beyond the bound. Writes ``verify.json`` into ``out`` if given.
    """
    problem = build_problem(spec)
    v = problem.spec["verify"]
    f, p, b, rho = problem.f, problem.penalty, problem.bounds, problem.rho
    ps = _scalar(p)
    n, seed, trials, probes, R = problem.n, v["seed"], v["trials"], v["probes"], v["radius"]
    alpha = v["alpha_scale"] * max_step_fb(b.sigma_M, rho)
    reports, skipped = [], {}
    if alpha * rho >= 1:
        raise SpecError(f"alpha*rho = {alpha * rho:.6g} >= 1; the threshold is not single-valued")

    x0 = np.zeros(n)
    tr = solve_ista(f, p, x0, alpha, StopRule(max_iters=v["iters"], fp_tol=0.0, stall_window=None,
                                              record_iterates=True))
    reports.append(monotone_descent_check(tr))

    prox_probe = OperatorProbe(lambda Z: ps.prox(Z, alpha), n, R, vectorized=True, name="T")
    rep = empirical_lipschitz(prox_probe, trials, seed, bound=1.0 / (1.0 - alpha * rho))
    rep.property = "prox-lipschitz"
    reports.append(rep)

    S = OperatorProbe(lambda Z: ps.prox((1.0 - alpha * rho) * Z, alpha), n, R, vectorized=True)
    rep = check_averaged(S, 0.5, trials, seed)
    rep.property = "scaled-prox-half-averaged"
    reports.append(rep)

    A = f.H.to_dense()
    G = A.T @ A
    V = (np.eye(n) - alpha * G) / (1.0 - alpha * rho)
    av = affine_averaged_interval(V)
    reports.append(PropertyReport("affine-V-averaged", 1, 0, av.eig_min, [av.eig_min], [av.eig_max],
                                  av.averaged, 1e-12, {"eig_min": av.eig_min, "eig_max": av.eig_max}))

    U = OperatorProbe(lambda X: X - alpha * (X @ G - A.T @ problem.y), n, R, vectorized=True)
    reports.append(composition_averaged_check(prox_probe, U, trials, seed))

    beta = alpha * (b.sigma_M + rho) / 2
    if 0 < beta < 1:
        Vp = OperatorProbe(lambda X: (X - alpha * (X @ G - A.T @ problem.y)) / (1 - alpha * rho),
                           n, R, vectorized=True)
        rep = check_averaged(Vp, beta, trials, seed)
        rep.property = "V-beta-averaged"
        reports.append(rep)
    else:
        reports.append(_fail_report("V-beta-averaged", f"beta = {beta:.6g} is not in (0, 1)",
                                    {"beta": beta}))

    reports.append(cocoercivity_check(f, n, probes, seed))
    if rho <= b.sigma_m * (1 + 1e-12):
        reports.append(shifted_gradient_check(f, min(rho, b.sigma_m), n, probes, seed))
    else:
        skipped["shifted-gradient-lipschitz"] = "rho exceeds sigma_m"
    reports.append(descent_lemma_check(f, n, probes, seed))
    reports.append(ista_sequence_check(tr, f, p, alpha))

    a_mm = 0.999 / b.sigma_M
    reports.append(mm_majorization_check(f, p, a_mm, n, probes, seed))
    tr_mm = solve_ista(f, p, x0, a_mm, StopRule(max_iters=min(v["iters"], 100), fp_tol=0.0,
                                                stall_window=None, record_iterates=True))
    reports.append(surrogate_gap_check(tr_mm, f, p, a_mm, seed=seed))

    x_ref, res, certified = compute_reference(problem)
    try:
        cert = certify_minimizer(f, p, x_ref, max_step_mm(b), problem.spec["reference"]["certify_tol"])
        reports.append(PropertyReport("fixed-point-certificate", 1, 0, cert.residual, x_ref.tolist(),
                                      x_ref.tolist(), cert.passed, cert.tol))
    except ValueError as e:
        reports.append(_fail_report("fixed-point-certificate", str(e)))

    if rho < b.sigma_m:
        q = contraction_rate(b, rho, alpha)
        trc = solve_ista(f, p, x0, alpha, StopRule(max_iters=v["iters"], fp_tol=0.0,
                                                   stall_window=None, x_ref=x_ref))
        rep = contraction_check(trc.dist_to_ref, q)
        est = estimate_linear_rate(trc.dist_to_ref)
        rep.detail["estimated_rate"] = est.rate
        reports.append(rep)
    else:
        skipped["contraction"] = "needs rho < sigma_m"

    bundle = VerifyBundle(reports, alpha, skipped)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.json").write_text(json.dumps(bundle.to_dict(), indent=2) + "\n")
    return bundle
