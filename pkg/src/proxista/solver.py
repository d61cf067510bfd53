"""ISTA (forward-backward splitting) and the FISTA/TwIST comparison solvers.

All solvers minimize ``D(x) = f(x) + P(x)`` where ``f`` is a
:class:`SmoothTerm` and ``P`` a penalty from :mod:`proxista.penalty`. They
return a :class:`SolveTrace` holding, per iterate ``x^k``, the cost, the
fixed-point residual ``|x^k - T_alpha(x^k - alpha grad f(x^k))|``, the
distance to an optional reference point and the elapsed wall time.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DivergenceError, ShapeError, StepTooLargeError
from .linop import LinearMap, SpectralBounds, gram_spectral_bounds
from .penalty import Penalty, separable_lift

__all__ = [
    "SmoothTerm",
    "quadratic_term",
    "StepPolicy",
    "StopRule",
    "SolveTrace",
    "TwistParams",
    "twist_parameters",
    "fista_t_next",
    "as_vector_penalty",
    "cost",
    "ista_step",
    "fixed_point_residual",
    "mm_surrogate",
    "max_step_mm",
    "max_step_fb",
    "contraction_rate",
    "solve_ista",
    "solve_fista",
    "solve_twist",
    "TRACE_HEADER",
]

TRACE_HEADER = ("iter", "cost", "fp_residual", "dist_to_ref", "elapsed_s")
DIVERGENCE_FACTOR = 1e12


class SmoothTerm:
    """Differentiable data term ``f`` with a ``lipschitz``-Lipschitz gradient.

    ``strong_convexity`` is the largest ``mu`` with ``f - (mu/2)|x|^2``
    convex. Quadratic terms built by :func:`quadratic_term` also carry ``H``,
    ``y`` and the Gram spectral bounds.
    """

    def __init__(self, fun: Callable, grad: Callable, lipschitz: float,
                 strong_convexity: float = 0.0, H: LinearMap | None = None,
                 y=None, bounds: SpectralBounds | None = None):
        if lipschitz <= 0:
            raise ValueError("lipschitz constant must be positive")
        self._fun = fun
        self._grad = grad
        self.lipschitz = float(lipschitz)
        self.strong_convexity = float(strong_convexity)
        self.H = H
        self.y = None if y is None else np.asarray(y, dtype=float)
        self.bounds = bounds

    @property
    def is_quadratic(self) -> bool:
        return self.H is not None

    @property
    def dim(self):
        return None if self.H is None else self.H.in_dim

    def eval(self, x) -> float:
        return float(self._fun(np.asarray(x, dtype=float)))

    __call__ = eval

    def grad(self, x) -> np.ndarray:
        return self._grad(np.asarray(x, dtype=float))


def quadratic_term(H: LinearMap, y, bounds: SpectralBounds | None = None) -> SmoothTerm:
    """``f(x) = |y - Hx|^2 / 2`` with ``grad f(x) = H^T (Hx - y)``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (H.out_dim,):
        raise ShapeError(f"data has shape {y.shape}, operator output is ({H.out_dim},)")
    if bounds is None:
        bounds = gram_spectral_bounds(H)

    def fun(x):
        r = y - H.apply(x)
        return 0.5 * float(r @ r)

    def grad(x):
        return H.adjoint(H.apply(x) - y)

    return SmoothTerm(fun, grad, bounds.sigma_M, bounds.sigma_m, H=H, y=y, bounds=bounds)


def max_step_mm(bounds: SpectralBounds) -> float:
    """Largest step of the majorization-minimization view, ``1/sigma_M``."""
    if bounds.sigma_M <= 0:
        raise ValueError("sigma_M must be positive")
    return 1.0 / bounds.sigma_M


def max_step_fb(sigma: float, rho: float) -> float:
    """Forward-backward step bound ``2/(sigma + rho)``."""
    if sigma + rho <= 0:
        raise ValueError("sigma + rho must be positive")
    return 2.0 / (sigma + rho)


def contraction_rate(bounds: SpectralBounds, rho: float, alpha: float) -> float:
    """Lipschitz bound ``max(|1 - a sM|, |1 - a sm|) / (1 - a rho)`` of one ISTA step.

    The iteration is a contraction exactly when ``rho < sigma_m`` and
    ``alpha < 2/(sigma_M + rho)``.
    """
    if alpha * rho >= 1:
        raise StepTooLargeError(f"alpha * rho = {alpha * rho} >= 1")
    num = max(abs(1 - alpha * bounds.sigma_M), abs(1 - alpha * bounds.sigma_m))
    return num / (1 - alpha * rho)


@dataclass(frozen=True)
class StepPolicy:
    """A step size together with the rule that produced it.

    ``safety`` scales the policy bound; ``1.0`` sits exactly on the bound,
    values below 1 keep the strict inequality some convergence results ask
    for.
    """

    kind: str
    alpha: float
    safety: float = 1.0

    @classmethod
    def mm(cls, bounds: SpectralBounds, safety: float = 1.0):
        return cls("mm", safety * max_step_mm(bounds), safety)

    @classmethod
    def fb(cls, sigma: float, rho: float, safety: float = 1.0):
        return cls("fb", safety * max_step_fb(sigma, rho), safety)

    @classmethod
    def contraction(cls, bounds: SpectralBounds, rho: float, safety: float = 0.999):
        if rho >= bounds.sigma_m:
            raise StepTooLargeError(
                f"contraction policy needs rho < sigma_m (rho={rho}, sigma_m={bounds.sigma_m})")
        return cls("contraction", safety * max_step_fb(bounds.sigma_M, rho), safety)

    @classmethod
    def explicit(cls, alpha: float):
        return cls("explicit", float(alpha), 1.0)

    def validate(self, f: SmoothTerm, p: Penalty):
        if not 0 < self.safety <= 1:
            raise ValueError(f"safety must lie in (0, 1], got {self.safety}")
        p.check_step(self.alpha)
        slack = 1 + 1e-12
        if self.kind == "mm" and self.alpha > slack / f.lipschitz:
            raise StepTooLargeError(f"mm policy needs alpha <= 1/sigma = {1 / f.lipschitz}")
        if self.kind in ("fb", "contraction") and self.alpha > slack * max_step_fb(f.lipschitz, p.rho):
            raise StepTooLargeError(
                f"{self.kind} policy needs alpha <= 2/(sigma + rho) = {max_step_fb(f.lipschitz, p.rho)}")


@dataclass
class StopRule:
    max_iters: int = 10_000
    fp_tol: float = 1e-10
    stall_tol: float = 1e-14
    stall_window: int | None = 50
    x_ref: np.ndarray | None = None
    record_iterates: bool = False


@dataclass
class SolveTrace:
    """Per-iterate record of a solver run; entry ``k`` describes ``x^k``."""

    solver: str
    alpha: float
    cost: list = field(default_factory=list)
    fp_residual: list = field(default_factory=list)
    dist_to_ref: list = field(default_factory=list)
    elapsed: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    x: np.ndarray | None = None
    stop_reason: str | None = None

    def __len__(self):
        return len(self.cost)

    @property
    def n_iters(self):
        return len(self.cost) - 1

    @property
    def final_cost(self):
        return self.cost[-1]

    def first_iter_below(self, threshold: float, what: str = "dist_to_ref"):
        """Index of the first iterate whose ``what`` is at or below ``threshold``."""
        vals = getattr(self, what)
        for k, v in enumerate(vals):
            if v is not None and v <= threshold:
                return k
        return None

    def write_csv(self, path, wall_time: bool = True):
        """Write ``iter,cost,fp_residual,dist_to_ref,elapsed_s``.

        ``dist_to_ref`` is left empty without a reference point; with
        ``wall_time=False`` so is ``elapsed_s``, making the file reproducible
        byte for byte.
        """
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for k in range(len(self.cost)):
                d = self.dist_to_ref[k] if self.dist_to_ref else None
                w.writerow([
                    k,
                    repr(float(self.cost[k])),
                    repr(float(self.fp_residual[k])),
                    "" if d is None else repr(float(d)),
                    repr(float(self.elapsed[k])) if wall_time else "",
                ])
        return path


def as_vector_penalty(p: Penalty, n: int) -> Penalty:
    """Lift a scalar penalty to ``R^n``; check the size of a lifted one."""
    if p.size is None:
        return separable_lift(p, n)
    if p.size != n:
        raise ShapeError(f"penalty acts on R^{p.size}, iterate lives in R^{n}")
    return p


def cost(f: SmoothTerm, p: Penalty, x) -> float:
    x = np.asarray(x, dtype=float)
    return f.eval(x) + as_vector_penalty(p, x.size).eval(x)


def ista_step(f: SmoothTerm, p: Penalty, x, alpha: float) -> np.ndarray:
    """One forward-backward step ``T_alpha(x - alpha grad f(x))``."""
    x = np.asarray(x, dtype=float)
    p = as_vector_penalty(p, x.size)
    p.check_step(alpha)
    return np.asarray(p.prox(x - alpha * f.grad(x), alpha))


def fixed_point_residual(f: SmoothTerm, p: Penalty, alpha: float, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x - ista_step(f, p, x, alpha)))


def mm_surrogate(f: SmoothTerm, p: Penalty, alpha: float, x, xk):
    """Majorizer ``M(x, xk) = C(x) + g(x, xk)``; returns ``(M, g)``.

    ``g = <d, (I/alpha - H^T H) d>/2`` with ``d = x - xk``. It is nonnegative,
    so ``M`` majorizes ``C``, as long as ``alpha <= 1/sigma_M``.
    """
    if not f.is_quadratic:
        raise ValueError("the surrogate needs a quadratic data term")
    d = np.asarray(x, dtype=float) - np.asarray(xk, dtype=float)
    Hd = f.H.apply(d)
    g = 0.5 * (float(d @ d) / alpha - float(Hd @ Hd))
    return cost(f, p, x) + g, g


class _Recorder:
    def __init__(self, trace: SolveTrace, stop: StopRule):
        self.trace = trace
        self.stop = stop
        self.t0 = time.perf_counter()
        self.stall = 0

    def record(self, x, c, r):
        tr, st = self.trace, self.stop
        tr.cost.append(c)
        tr.fp_residual.append(r)
        if st.x_ref is not None:
            tr.dist_to_ref.append(float(np.linalg.norm(x - st.x_ref)))
        tr.elapsed.append(time.perf_counter() - self.t0)
        if st.record_iterates:
            tr.iterates.append(x.copy())

    def should_stop(self, k):
        """Stop reason after recording iterate ``k``, or ``None``."""
        tr, st = self.trace, self.stop
        if tr.fp_residual[-1] <= st.fp_tol:
            return "fp-residual"
        if k >= 1 and st.stall_window:
            prev, cur = tr.cost[-2], tr.cost[-1]
            if abs(cur - prev) <= st.stall_tol * max(abs(prev), 1e-300):
                self.stall += 1
            else:
                self.stall = 0
            if self.stall >= st.stall_window:
                return "cost-stall"
        if k >= st.max_iters:
            return "max-iters"
        return None


def _resolve_alpha(f, p, policy):
    if isinstance(policy, StepPolicy):
        policy.validate(f, p)
        return policy.alpha
    alpha = float(policy)
    p.check_step(alpha)
    return alpha


def solve_ista(f: SmoothTerm, p: Penalty, x0, policy, stop: StopRule | None = None) -> SolveTrace:
    """Iterate ``x^{k+1} = T_alpha(x^k - alpha grad f(x^k))``.

    ``policy`` is a :class:`StepPolicy` or a bare step size. Raises
    :class:`DivergenceError` if the cost stops being finite.
    """
    stop = stop or StopRule()
    x = np.array(x0, dtype=float)
    p = as_vector_penalty(p, x.size)
    alpha = _resolve_alpha(f, p, policy)
    trace = SolveTrace("ista", alpha)
    rec = _Recorder(trace, stop)
    k = 0
    while True:
        c = f.eval(x) + p.eval(x)
        x_next = np.asarray(p.prox(x - alpha * f.grad(x), alpha))
        r = float(np.linalg.norm(x - x_next))
        rec.record(x, c, r)
        if not math.isfinite(c):
            trace.x, trace.stop_reason = x, "diverged"
            raise DivergenceError(f"ISTA cost became non-finite at iteration {k}", trace)
        reason = rec.should_stop(k)
        if reason:
            trace.x, trace.stop_reason = x, reason
            return trace
        x = x_next
        k += 1


def fista_t_next(t: float) -> float:
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))


def _check_blowup(trace, c, c0, k, name):
    if not math.isfinite(c) or c > DIVERGENCE_FACTOR * max(abs(c0), 1.0):
        trace.stop_reason = "diverged"
        raise DivergenceError(
            f"{name} diverged at iteration {k}: cost {c:.3e} vs initial {c0:.3e}", trace)


def solve_fista(f: SmoothTerm, p: Penalty, x0, alpha: float,
                stop: StopRule | None = None) -> SolveTrace:
    """Constant-step FISTA.

    ``y^1 = x^0``, ``t_1 = 1``; ``x^k = T_alpha(y^k - alpha grad f(y^k))``,
    ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2))/2`` and
    ``y^{k+1} = x^k + (t_k - 1)/t_{k+1} (x^k - x^{k-1})``.

    Nothing guarantees convergence for a nonconvex penalty; a cost exceeding
    ``1e12`` times the initial cost raises :class:`DivergenceError`.
    """
    stop = stop or StopRule()
    x = np.array(x0, dtype=float)
    p = as_vector_penalty(p, x.size)
    alpha = _resolve_alpha(f, p, alpha)
    trace = SolveTrace("fista", alpha)
    rec = _Recorder(trace, stop)

    def step(v):
        return np.asarray(p.prox(v - alpha * f.grad(v), alpha))

    c0 = f.eval(x) + p.eval(x)
    yk = x
    t = 1.0
    k = 0
    while True:
        c = c0 if k == 0 else f.eval(x) + p.eval(x)
        _check_blowup(trace, c, c0, k, "FISTA")
        rec.record(x, c, float(np.linalg.norm(x - step(x))))
        reason = rec.should_stop(k)
        if reason:
            trace.x, trace.stop_reason = x, reason
            return trace
        x_new = step(yk)
        t_new = fista_t_next(t)
        yk = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        k += 1


@dataclass(frozen=True)
class TwistParams:
    """Two-step coefficients for :func:`solve_twist`.

    ``x^{k+1} = (1 - a) x^{k-1} + (a - b) x^k + b Gamma(x^k)`` where
    ``Gamma`` is an ISTA step of size ``step``.
    """

    a: float
    b: float
    kappa: float
    step: float


def twist_parameters(bounds: SpectralBounds, kappa: float | None = None) -> TwistParams:
    """Standard TwIST constants for a spectrum normalized to ``[kappa, 1]``.

    With the operator scaled so that ``sigma_M = 1`` (equivalently, an ISTA
    step of ``1/sigma_M``) and ``kappa = sigma_m / sigma_M``:

    ============  ==========================================
    ``rho_bar``   ``(1 - sqrt(kappa)) / (1 + sqrt(kappa))``
    ``a``         ``1 + rho_bar**2``
    ``b``         ``2 a / (1 + kappa)``
    ============  ==========================================
    """
    if kappa is None:
        kappa = bounds.sigma_m / bounds.sigma_M
    if not 0 < kappa <= 1:
        raise ValueError(f"kappa must lie in (0, 1], got {kappa}")
    rbar = (1 - math.sqrt(kappa)) / (1 + math.sqrt(kappa))
    a = 1 + rbar * rbar
    b = 2 * a / (1 + kappa)
    return TwistParams(a, b, kappa, 1.0 / bounds.sigma_M)


def solve_twist(f: SmoothTerm, p: Penalty, x0, params: TwistParams | None = None,
                stop: StopRule | None = None) -> SolveTrace:
    """Two-step iterative shrinkage/thresholding.

    The first iteration has no history and takes a plain ISTA step. The
    two-step combination is an extrapolation and can leave the domain of a
    constrained penalty (where the cost is ``+inf``); it is clipped back onto
    that domain, which leaves unconstrained penalties untouched. The recorded
    fixed-point residual uses the ISTA step of size ``params.step``.
    """
    if not f.is_quadratic:
        raise ValueError("TwIST needs a quadratic data term (for its spectral bounds)")
    stop = stop or StopRule()
    x = np.array(x0, dtype=float)
    p = as_vector_penalty(p, x.size)
    params = params or twist_parameters(f.bounds)
    alpha = params.step
    p.check_step(alpha)
    trace = SolveTrace("twist", alpha)
    rec = _Recorder(trace, stop)

    def gamma(v):
        return np.asarray(p.prox(v - alpha * f.grad(v), alpha))

    c0 = f.eval(x) + p.eval(x)
    x_prev = None
    k = 0
    while True:
        c = c0 if k == 0 else f.eval(x) + p.eval(x)
        _check_blowup(trace, c, c0, k, "TwIST")
        gx = gamma(x)
        rec.record(x, c, float(np.linalg.norm(x - gx)))
        reason = rec.should_stop(k)
        if reason:
            trace.x, trace.stop_reason = x, reason
            return trace
        if x_prev is None:
            x_new = gx
        else:
            x_new = (1 - params.a) * x_prev + (params.a - params.b) * x + params.b * gx
            x_new = p.project_domain(x_new)
        x_prev, x = x, x_new
        k += 1
