"""Sampled certification of operator properties.

Everything here is falsification by sampling: a failing report carries a
witness pair that reproduces the violation, a passing report only says no
violation was found among the seeded samples.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .errors import ShapeError
from .solver import SmoothTerm, fixed_point_residual

__all__ = [
    "OperatorProbe",
    "PropertyReport",
    "RateEstimate",
    "MinimizerCertificate",
    "AffineVerdict",
    "empirical_lipschitz",
    "check_averaged",
    "affine_averaged_interval",
    "certify_minimizer",
    "estimate_linear_rate",
    "composition_averaged_check",
    "sample_pairs",
    "BETA_GRID",
    "cocoercivity_check",
    "shifted_gradient_check",
    "descent_lemma_check",
    "monotone_descent_check",
    "ista_sequence_check",
    "ista_step_check",
    "mm_majorization_check",
    "surrogate_gap_check",
    "contraction_check",
]

DEFAULT_TOL = 1e-9
BETA_GRID = tuple(np.round(np.arange(0.05, 0.951, 0.05), 2))


@dataclass(frozen=True)
class OperatorProbe:
    """A deterministic map on ``R^dim`` with a sampling box ``[-radius, radius]^dim``.

    With ``vectorized=True`` the map accepts a ``(trials, dim)`` array and
    maps each row; scalar thresholds are naturally vectorized this way.
    """

    map: Callable
    dim: int
    radius: float = 10.0
    vectorized: bool = False
    name: str = "operator"

    def apply_many(self, X):
        if self.vectorized:
            return np.asarray(self.map(X), dtype=float).reshape(X.shape)
        return np.array([np.asarray(self.map(x), dtype=float).reshape(self.dim) for x in X])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.apply_many(x.reshape(1, self.dim))[0]


@dataclass
class PropertyReport:
    property: str
    trials: int
    seed: int
    worst: float
    witness_a: list
    witness_b: list
    verdict: bool
    tolerance: float
    detail: dict | None = None

    def to_dict(self):
        d = asdict(self)
        if d["detail"] is None:
            d.pop("detail")
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def sample_pairs(probe: OperatorProbe, trials: int, seed: int):
    """Seeded uniform sample pairs from the probe's box."""
    rng = np.random.Generator(np.random.Philox(seed))
    X = rng.uniform(-probe.radius, probe.radius, (trials, probe.dim))
    Z = rng.uniform(-probe.radius, probe.radius, (trials, probe.dim))
    return X, Z


def _ratios(X, Z, SX, SZ):
    din = np.linalg.norm(X - Z, axis=1)
    dout = np.linalg.norm(SX - SZ, axis=1)
    ok = din >= 1e-12
    r = np.full(len(X), -np.inf)
    r[ok] = dout[ok] / din[ok]
    return r


def _report(prop, ratios, X, Z, trials, seed, bound, tol, detail=None):
    i = int(np.argmax(ratios))
    worst = float(ratios[i])
    return PropertyReport(prop, trials, seed, worst, X[i].tolist(), Z[i].tolist(),
                          bool(worst <= bound + tol), tol, detail)


def empirical_lipschitz(probe: OperatorProbe, trials: int = 10_000, seed: int = 0,
                        bound: float = 1.0, tol: float = DEFAULT_TOL, pairs=None) -> PropertyReport:
    """Largest ``|S(x) - S(z)| / |x - z|`` over sampled pairs.

    The verdict compares the ratio against ``bound`` (non-expansiveness by
    default). ``pairs`` overrides the sampler with explicit ``(X, Z)`` rows.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    X, Z = pairs if pairs is not None else sample_pairs(probe, trials, seed)
    r = _ratios(X, Z, probe.apply_many(X), probe.apply_many(Z))
    return _report(f"lipschitz<={bound:g}", r, X, Z, len(X), seed, bound, tol)


def _averaged_ratios(X, Z, SX, SZ, beta):
    QX = (SX - (1 - beta) * X) / beta
    QZ = (SZ - (1 - beta) * Z) / beta
    return _ratios(X, Z, QX, QZ)


def check_averaged(probe: OperatorProbe, beta: float, trials: int = 10_000, seed: int = 0,
                   tol: float = DEFAULT_TOL, pairs=None) -> PropertyReport:
    """Test ``beta``-averagedness: ``(S - (1 - beta) I) / beta`` must be non-expansive."""
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    X, Z = pairs if pairs is not None else sample_pairs(probe, trials, seed)
    r = _averaged_ratios(X, Z, probe.apply_many(X), probe.apply_many(Z), beta)
    return _report(f"averaged(beta={beta:g})", r, X, Z, len(X), seed, 1.0, tol, {"beta": beta})


def composition_averaged_check(outer: OperatorProbe, inner: OperatorProbe, trials: int = 10_000,
                               seed: int = 0, tol: float = DEFAULT_TOL,
                               betas=BETA_GRID) -> PropertyReport:
    """Find the smallest ``beta`` on a grid for which ``outer o inner`` passes.

    Averagedness with ``beta`` implies it for every larger ``beta``, so the
    smallest passing grid value is the strongest statement available. On
    failure the report describes the largest grid value.
    """
    if outer.dim != inner.dim:
        raise ShapeError(f"probe dimensions differ: {outer.dim} vs {inner.dim}")
    X, Z = sample_pairs(inner, trials, seed)
    SX = outer.apply_many(inner.apply_many(X))
    SZ = outer.apply_many(inner.apply_many(Z))
    last = None
    for beta in betas:
        r = _averaged_ratios(X, Z, SX, SZ, beta)
        last = _report("composition-averaged", r, X, Z, trials, seed, 1.0, tol, {"beta": float(beta)})
        if last.verdict:
            return last
    last.detail["beta"] = None
    return last


@dataclass(frozen=True)
class AffineVerdict:
    eig_min: float
    eig_max: float
    averaged: bool


def affine_averaged_interval(M, slack: float = 1e-12) -> AffineVerdict:
    """Averagedness of ``x -> M x + u`` for symmetric ``M``.

    Averaged for some ``beta`` iff the spectrum lies in ``(-1, 1]``. The closed
    end gets ``slack``; the open end must be cleared by ``slack``, since an
    eigenvalue within rounding of ``-1`` cannot be told apart from ``-1``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    lo, hi = float(w[0]), float(w[-1])
    return AffineVerdict(lo, hi, bool(lo > -1.0 + slack and hi <= 1.0 + slack))


@dataclass(frozen=True)
class MinimizerCertificate:
    passed: bool
    residual: float
    alpha: float
    tol: float


def certify_minimizer(f: SmoothTerm, p, x, alpha: float, tol: float = 1e-10) -> MinimizerCertificate:
    """``x`` minimizes ``f + P`` iff it is a fixed point of the ISTA step."""
    r = fixed_point_residual(f, p, alpha, x)
    return MinimizerCertificate(r <= tol, r, alpha, tol)


@dataclass(frozen=True)
class RateEstimate:
    rate: float | None
    window: tuple
    converged_flat: bool


def estimate_linear_rate(distances, tail_fraction: float = 0.5, floor: float = 1e-13,
                         min_points: int = 10) -> RateEstimate:
    """Geometric rate from a least-squares fit of ``log d_k`` on the tail.

    Uses the last ``tail_fraction`` of the iterations whose distance exceeds
    ``floor``. Too few such points means the run already sits at machine
    precision; then ``converged_flat`` is set and ``rate`` is ``None``.
    """
    d = np.asarray(distances, dtype=float)
    idx = np.flatnonzero(d > floor)
    if idx.size == 0:
        return RateEstimate(None, (0, 0), True)
    last = int(idx[-1]) + 1
    start = int(np.floor(last * (1 - tail_fraction)))
    k = np.arange(start, last)
    k = k[d[k] > floor]
    if k.size < min_points:
        return RateEstimate(None, (start, last), True)
    slope = np.polyfit(k.astype(float), np.log(d[k]), 1)[0]
    return RateEstimate(float(np.exp(slope)), (start, last), False)


# -- inequality checks on smooth terms and traced runs -----------------------

def _violation_report(prop, viol, A, B, seed, tol, detail=None):
    viol = np.asarray(viol, dtype=float)
    i = int(np.argmax(viol))
    worst = float(viol[i])
    return PropertyReport(prop, len(viol), seed, worst, np.asarray(A[i]).tolist(),
                          np.asarray(B[i]).tolist(), bool(worst <= tol), tol, detail)


def _random_points(dim, trials, seed, radius):
    rng = np.random.Generator(np.random.Philox(seed))
    return (rng.uniform(-radius, radius, (trials, dim)),
            rng.uniform(-radius, radius, (trials, dim)))


def cocoercivity_check(f: SmoothTerm, dim: int, trials: int = 1000, seed: int = 0,
                       radius: float = 1.0, tol: float = DEFAULT_TOL) -> PropertyReport:
    """``<grad f(x) - grad f(z), x - z> >= |grad f(x) - grad f(z)|^2 / sigma``."""
    X, Z = _random_points(dim, trials, seed, radius)
    viol = []
    for x, z in zip(X, Z):
        dg = f.grad(x) - f.grad(z)
        viol.append(float(dg @ dg) / f.lipschitz - float(dg @ (x - z)))
    return _violation_report("cocoercivity", viol, X, Z, seed, tol)


def shifted_gradient_check(f: SmoothTerm, rho: float, dim: int, trials: int = 1000,
                           seed: int = 0, radius: float = 1.0,
                           tol: float = DEFAULT_TOL) -> PropertyReport:
    """``grad f - rho I`` is ``(sigma - rho)``-Lipschitz when ``rho <= mu``."""
    X, Z = _random_points(dim, trials, seed, radius)
    viol = []
    for x, z in zip(X, Z):
        d = x - z
        dG = f.grad(x) - f.grad(z) - rho * d
        viol.append(float(np.linalg.norm(dG)) - (f.lipschitz - rho) * float(np.linalg.norm(d)))
    return _violation_report("shifted-gradient-lipschitz", viol, X, Z, seed, tol, {"rho": rho})


def descent_lemma_check(f: SmoothTerm, dim: int, trials: int = 1000, seed: int = 0,
                        radius: float = 1.0, tol: float = DEFAULT_TOL) -> PropertyReport:
    """``f(x) <= f(z) + <grad f(z), x - z> + (sigma/2)|x - z|^2``."""
    X, Z = _random_points(dim, trials, seed, radius)
    viol = []
    for x, z in zip(X, Z):
        d = x - z
        viol.append(f.eval(x) - f.eval(z) - float(f.grad(z) @ d) - 0.5 * f.lipschitz * float(d @ d))
    return _violation_report("descent-lemma", viol, X, Z, seed, tol)


def _iterates(trace):
    if not trace.iterates:
        raise ValueError("the trace has no stored iterates; run with StopRule(record_iterates=True)")
    return trace.iterates


def monotone_descent_check(trace, rel_tol: float = 1e-10) -> PropertyReport:
    """Cost must not increase between consecutive iterates (relative tolerance)."""
    c = np.asarray(trace.cost, dtype=float)
    if c.size < 2:
        return PropertyReport("monotone-descent", 0, 0, 0.0, [], [], True, rel_tol)
    rel = (c[1:] - c[:-1]) / np.maximum(np.abs(c[:-1]), 1e-300)
    k = int(np.argmax(rel))
    worst = float(rel[k])
    if trace.iterates:
        a, b = trace.iterates[k].tolist(), trace.iterates[k + 1].tolist()
    else:
        a, b = [k], [k + 1]
    return PropertyReport("monotone-descent", int(rel.size), 0, worst, a, b, bool(worst <= rel_tol),
                          rel_tol, {"iteration": k})


def _step_inequality(f, p, alpha, x, xn):
    d = xn - x
    lhs = float(np.sum(p.eval(xn)) - np.sum(p.eval(x))) + float(f.grad(x) @ d)
    return lhs - (0.5 * p.rho - 1.0 / alpha) * float(d @ d)


def ista_sequence_check(trace, f: SmoothTerm, p, alpha: float,
                        tol: float = DEFAULT_TOL) -> PropertyReport:
    """Along an ISTA run:
    ``P(x+) - P(x) + <grad f(x), x+ - x> <= (rho/2 - 1/alpha)|x - x+|^2``.
    """
    xs = _iterates(trace)
    if len(xs) < 2:
        return PropertyReport("ista-sequence-inequality", 0, 0, -np.inf, [], [], True, tol)
    viol = [_step_inequality(f, p, alpha, x, xn) for x, xn in zip(xs[:-1], xs[1:])]
    return _violation_report("ista-sequence-inequality", viol, xs[:-1], xs[1:], 0, tol)


def ista_step_check(f: SmoothTerm, p, alpha: float, dim: int, trials: int = 1000, seed: int = 0,
                    radius: float = 1.0, tol: float = DEFAULT_TOL) -> PropertyReport:
    """The same inequality for one ISTA step from each of ``trials`` random points."""
    from .solver import ista_step

    X, _ = _random_points(dim, trials, seed, radius)
    lo, hi = p.domain()
    X = np.clip(X, lo, hi)
    Xn = [ista_step(f, p, x, alpha) for x in X]
    viol = [_step_inequality(f, p, alpha, x, xn) for x, xn in zip(X, Xn)]
    return _violation_report("ista-step-inequality", viol, X, Xn, seed, tol)


def mm_majorization_check(f: SmoothTerm, p, alpha: float, dim: int, trials: int = 1000,
                          seed: int = 0, radius: float = 1.0,
                          tol: float = 1e-12) -> PropertyReport:
    """``M(x, xk) >= C(x)`` and ``M(xk, xk) = C(xk)`` on random pairs.

    The reported violation per pair is ``max(C(x) - M(x, xk), |M(xk, xk) - C(xk)|)``;
    points are clipped onto the penalty's domain so that costs stay finite.
    """
    from .solver import cost, mm_surrogate

    X, Z = _random_points(dim, trials, seed, radius)
    lo, hi = p.domain()
    if np.isfinite(lo) or np.isfinite(hi):
        X, Z = np.clip(X, lo, hi), np.clip(Z, lo, hi)
    viol = []
    for x, xk in zip(X, Z):
        M, _ = mm_surrogate(f, p, alpha, x, xk)
        Mk, _ = mm_surrogate(f, p, alpha, xk, xk)
        viol.append(max(cost(f, p, x) - M, abs(Mk - cost(f, p, xk))))
    return _violation_report("mm-majorization", viol, X, Z, seed, tol, {"alpha": alpha})


def surrogate_gap_check(trace, f: SmoothTerm, p, alpha: float, per_step: int = 5,
                        seed: int = 0, radius: float = 1.0,
                        tol: float = DEFAULT_TOL) -> PropertyReport:
    """``M(x, xk) - M(x+, xk) >= (1/(2 alpha) - rho/2)|x - x+|^2`` along a run."""
    from .solver import mm_surrogate

    xs = _iterates(trace)
    rng = np.random.Generator(np.random.Philox(seed))
    lo, hi = p.domain()
    A, B, viol = [], [], []
    for xk, xn in zip(xs[:-1], xs[1:]):
        M1, _ = mm_surrogate(f, p, alpha, xn, xk)
        for _ in range(per_step):
            x = np.clip(xn + rng.uniform(-radius, radius, xn.size), lo, hi)
            M0, _ = mm_surrogate(f, p, alpha, x, xk)
            d = x - xn
            viol.append((0.5 / alpha - 0.5 * p.rho) * float(d @ d) - (M0 - M1))
            A.append(x)
            B.append(xk)
    return _violation_report("surrogate-gap", viol, A, B, seed, tol, {"alpha": alpha})


def contraction_check(distances, rate: float, floor: float = 1e-8,
                      tol: float = 1e-6) -> PropertyReport:
    """Per-step ratios ``d_{k+1} / d_k`` against a contraction rate.

    Steps starting below ``floor`` are skipped; there the reference point's
    own error dominates the ratio.
    """
    d = np.asarray(distances, dtype=float)
    ok = d[:-1] > floor
    ratios = np.where(ok, d[1:] / np.where(ok, d[:-1], 1.0), -np.inf)
    if not ok.any():
        return PropertyReport("contraction", 0, 0, -np.inf, [], [], True, tol, {"rate": rate})
    k = int(np.argmax(ratios))
    worst = float(ratios[k])
    return PropertyReport("contraction", int(ok.sum()), 0, worst, [k], [k + 1],
                          bool(worst <= rate + tol), tol, {"rate": rate})
