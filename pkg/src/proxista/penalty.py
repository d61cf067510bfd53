"""Weakly convex penalties and their thresholding (proximity) operators.

A penalty ``P`` is ``rho``-weakly convex when ``P + (rho/2)|.|^2`` is convex.
For such a penalty the threshold

    T_alpha(z) = argmin_x  |x - z|^2 / (2 alpha) + P(x)

is single valued whenever ``alpha * rho < 1``; calling ``prox`` with a larger
step raises :class:`~proxista.errors.StepTooLargeError`.

Scalar penalties act elementwise on arrays (``value`` returns the per-element
values). :func:`separable_lift` turns one into a penalty on ``R^n`` whose
value is the sum over components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, StepTooLargeError

__all__ = [
    "Penalty",
    "ZeroPenalty",
    "L1Penalty",
    "FirmPenalty",
    "IntegerLatticePenalty",
    "ScaledPenalty",
    "SeparablePenalty",
    "ScalarProxResult",
    "ConvexityCertificate",
    "make_zero",
    "make_l1",
    "make_firm",
    "make_integer_lattice",
    "scale_penalty",
    "separable_lift",
    "eval_penalty",
    "prox_oracle_grid",
    "weak_convexity_certificate",
    "subgradient_inequality_check",
]


class Penalty:
    """Base class for separable penalties.

    Subclasses implement ``value`` (elementwise, may return ``inf``) and
    ``_prox`` (elementwise). ``size`` is ``None`` for a scalar penalty and the
    vector length for a lifted one.
    """

    rho: float = 0.0
    size: int | None = None
    has_closed_form_prox: bool = True
    name: str = "penalty"

    def value(self, x):
        raise NotImplementedError

    def _prox(self, z, alpha):
        raise NotImplementedError

    def eval(self, x):
        """Penalty value: elementwise for scalar penalties, summed for lifted ones."""
        v = self.value(np.asarray(x, dtype=float))
        if self.size is None:
            return v if np.ndim(v) else float(v)
        return float(np.sum(v))

    __call__ = eval

    def check_step(self, alpha):
        if alpha <= 0:
            raise StepTooLargeError(f"step must be positive, got {alpha}")
        if alpha * self.rho >= 1.0:
            raise StepTooLargeError(
                f"alpha * rho = {alpha * self.rho:.6g} >= 1 (alpha={alpha:.6g}, rho={self.rho:.6g}); "
                f"the threshold is only defined for alpha < {1.0 / self.rho:.6g}"
            )

    def prox(self, z, alpha):
        """Threshold ``T_alpha(z)``; elementwise."""
        self.check_step(alpha)
        z = np.asarray(z, dtype=float)
        out = self._prox(z, float(alpha))
        return out if np.ndim(out) else float(out)

    # hints for the grid oracle and samplers
    def breakpoints(self):
        """Points where the penalty changes its formula."""
        return np.zeros(0)

    def domain(self):
        """Closed interval on which the penalty is finite."""
        return (-np.inf, np.inf)

    def anchor_range(self):
        """Interval holding all the interesting structure of the penalty."""
        return (0.0, 0.0)

    def project_domain(self, x):
        """Clip ``x`` onto the (interval) domain where the penalty is finite."""
        lo, hi = self.domain()
        if np.isinf(lo) and np.isinf(hi):
            return x
        return np.clip(x, lo, hi)


class ZeroPenalty(Penalty):
    name = "zero"

    def value(self, x):
        return np.zeros_like(x, dtype=float)

    def _prox(self, z, alpha):
        return z.copy()

    def __repr__(self):
        return "ZeroPenalty()"


class L1Penalty(Penalty):
    name = "l1"

    def __init__(self, weight: float = 1.0):
        if weight < 0:
            raise ValueError(f"l1 weight must be nonnegative, got {weight}")
        self.weight = float(weight)
        self.rho = 0.0

    def value(self, x):
        return self.weight * np.abs(x)

    def _prox(self, z, alpha):
        return np.sign(z) * np.maximum(np.abs(z) - alpha * self.weight, 0.0)

    def breakpoints(self):
        return np.zeros(1)

    def __repr__(self):
        return f"L1Penalty(weight={self.weight})"


class FirmPenalty(Penalty):
    """Minimax-concave penalty whose threshold is the firm threshold.

    ``P(s) = tau |s| - rho s^2 / 2`` for ``|s| < tau/rho`` and ``tau^2/(2 rho)``
    beyond. Its threshold has a deadzone ``|z| <= alpha tau``, a ramp of slope
    ``1/(1 - alpha rho)`` and is the identity for ``|z| >= tau/rho``.
    """

    name = "firm"

    def __init__(self, tau: float, rho: float):
        if tau <= 0 or rho <= 0:
            raise ValueError(f"firm penalty needs tau > 0 and rho > 0, got tau={tau}, rho={rho}")
        self.tau = float(tau)
        self.rho = float(rho)

    @property
    def knee(self):
        return self.tau / self.rho

    def value(self, x):
        a = np.abs(x)
        inner = self.tau * a - 0.5 * self.rho * a * a
        return np.where(a < self.knee, inner, self.tau ** 2 / (2.0 * self.rho))

    def _prox(self, z, alpha):
        a = np.abs(z)
        ramp = np.sign(z) * (a - alpha * self.tau) / (1.0 - alpha * self.rho)
        return np.where(a <= alpha * self.tau, 0.0, np.where(a < self.knee, ramp, z))

    def breakpoints(self):
        return np.array([-self.knee, 0.0, self.knee])

    def anchor_range(self):
        return (-self.knee, self.knee)

    def __repr__(self):
        return f"FirmPenalty(tau={self.tau}, rho={self.rho})"


class IntegerLatticePenalty(Penalty):
    """Penalty favoring integers in ``[0, K]``; ``+inf`` outside that range.

    On ``[0, K]`` it is ``(s - floor s)(ceil s - s)``, which is 2-weakly convex.
    """

    name = "integer-lattice"

    def __init__(self, K: int = 4):
        if int(K) != K or K < 1:
            raise ValueError(f"K must be an integer >= 1, got {K}")
        self.K = int(K)
        self.rho = 2.0

    def value(self, x):
        inside = (x >= 0) & (x <= self.K)
        xc = np.clip(x, 0, self.K)
        v = (xc - np.floor(xc)) * (np.ceil(xc) - xc)
        return np.where(inside, v, np.inf)

    def _prox(self, z, alpha):
        s = np.clip(z, 0.0, self.K)
        n = np.floor(s)
        u = s - n
        ramp = n + (u - alpha) / (1.0 - 2.0 * alpha)
        return np.where(u <= alpha, n, np.where(u >= 1.0 - alpha, n + 1.0, ramp))

    def breakpoints(self):
        return np.arange(self.K + 1, dtype=float)

    def domain(self):
        return (0.0, float(self.K))

    def anchor_range(self):
        return (0.0, float(self.K))

    def __repr__(self):
        return f"IntegerLatticePenalty(K={self.K})"


class ScaledPenalty(Penalty):
    """``t * P``; its threshold at step ``alpha`` is that of ``P`` at ``t * alpha``."""

    def __init__(self, base: Penalty, t: float):
        if t <= 0:
            raise ValueError(f"scale must be positive, got {t}")
        self.base = base
        self.t = float(t)
        self.rho = self.t * base.rho
        self.size = base.size
        self.has_closed_form_prox = base.has_closed_form_prox
        self.name = f"{self.t:g}*{base.name}"

    def value(self, x):
        return self.t * self.base.value(x)

    def _prox(self, z, alpha):
        return self.base._prox(z, self.t * alpha)

    def breakpoints(self):
        return self.base.breakpoints()

    def domain(self):
        return self.base.domain()

    def anchor_range(self):
        return self.base.anchor_range()

    def __repr__(self):
        return f"ScaledPenalty({self.base!r}, t={self.t})"


class SeparablePenalty(Penalty):
    """Sum of a scalar penalty over the ``n`` components of a vector."""

    def __init__(self, base: Penalty, n: int):
        if base.size is not None:
            raise ValueError("separable_lift expects a scalar penalty")
        if n < 1:
            raise ValueError("n must be >= 1")
        self.base = base
        self.size = int(n)
        self.rho = base.rho
        self.has_closed_form_prox = base.has_closed_form_prox
        self.name = base.name

    @property
    def scalar(self) -> Penalty:
        return self.base

    def value(self, x):
        return self.base.value(x)

    def _prox(self, z, alpha):
        if z.shape != (self.size,):
            raise ShapeError(f"expected shape ({self.size},), got {z.shape}")
        return self.base._prox(z, alpha)

    def breakpoints(self):
        return self.base.breakpoints()

    def domain(self):
        return self.base.domain()

    def anchor_range(self):
        return self.base.anchor_range()

    def __repr__(self):
        return f"SeparablePenalty({self.base!r}, n={self.size})"


def make_zero() -> Penalty:
    return ZeroPenalty()


def make_l1(weight: float = 1.0) -> Penalty:
    return L1Penalty(weight)


def make_firm(tau: float, rho: float) -> Penalty:
    return FirmPenalty(tau, rho)


def make_integer_lattice(K: int = 4) -> Penalty:
    return IntegerLatticePenalty(K)


def scale_penalty(p: Penalty, t: float) -> Penalty:
    return ScaledPenalty(p, t)


def separable_lift(p: Penalty, n: int) -> Penalty:
    return SeparablePenalty(p, n)


def eval_penalty(p: Penalty, x):
    """Evaluate ``p`` at a point of its own dimension."""
    x = np.asarray(x, dtype=float)
    expected = () if p.size is None else (p.size,)
    if x.shape != expected:
        raise ShapeError(f"penalty expects shape {expected}, got {x.shape}")
    return p.eval(x)


@dataclass(frozen=True)
class ScalarProxResult:
    minimizer: float
    objective_value: float


def _prox_objective(p, z, alpha, x):
    with np.errstate(invalid="ignore"):
        return (x - z) ** 2 / (2.0 * alpha) + p.value(x)


def prox_oracle_grid(p: Penalty, z: float, alpha: float, lo=None, hi=None,
                     step: float = 1e-4) -> ScalarProxResult:
    """Minimize the threshold objective by exhaustive evaluation on a grid.

    The grid is augmented with ``z``, the penalty's breakpoints and the
    interval ends, since a uniform grid is least accurate there.
    """
    if p.size is not None:
        raise ValueError("the grid oracle works on scalar penalties")
    p.check_step(alpha)
    z = float(z)
    a_lo, a_hi = p.anchor_range()
    if lo is None:
        lo = min(z, a_lo) - 1.0
    if hi is None:
        hi = max(z, a_hi) + 1.0
    if not (lo < hi) or step <= 0:
        raise ValueError(f"empty grid: lo={lo}, hi={hi}, step={step}")
    grid = np.arange(lo, hi + 0.5 * step, step)
    extra = np.concatenate([[z, lo, hi], p.breakpoints()])
    extra = extra[(extra >= lo) & (extra <= hi)]
    xs = np.concatenate([grid, extra])
    obj = _prox_objective(p, z, alpha, xs)
    i = int(np.argmin(obj))
    if not np.isfinite(obj[i]):
        raise ValueError("no feasible grid point")
    return ScalarProxResult(float(xs[i]), float(obj[i]))


@dataclass(frozen=True)
class ConvexityCertificate:
    passed: bool
    worst_violation: float
    witness: tuple
    samples: int
    seed: int


def weak_convexity_certificate(p: Penalty, rho_claim: float, samples: int = 10_000,
                               seed: int = 0, radius: float | None = None,
                               tol: float = 1e-9) -> ConvexityCertificate:
    """Sample midpoint-convexity of ``p + (rho_claim/2) s^2``.

    Points are drawn from the effective domain intersected with
    ``[-radius, radius]``. A sampled test can refute the claim but never
    prove it.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    base = p.base if isinstance(p, SeparablePenalty) else p
    if radius is None:
        a_lo, a_hi = base.anchor_range()
        radius = 2.0 * max(abs(a_lo), abs(a_hi), 1.0)
    d_lo, d_hi = base.domain()
    lo, hi = max(d_lo, -radius), min(d_hi, radius)
    rng = np.random.Generator(np.random.Philox(seed))
    a = rng.uniform(lo, hi, samples)
    b = rng.uniform(lo, hi, samples)
    th = rng.uniform(0.0, 1.0, samples)

    def h(s):
        return base.value(s) + 0.5 * rho_claim * s * s

    m = th * a + (1 - th) * b
    viol = h(m) - th * h(a) - (1 - th) * h(b)
    i = int(np.argmax(viol))
    worst = float(viol[i])
    return ConvexityCertificate(worst <= tol, worst, (float(a[i]), float(b[i]), float(th[i])),
                                samples, seed)


def subgradient_inequality_check(p: Penalty, z, alpha: float, x):
    """Slack in the prox subgradient inequality at ``xhat = T_alpha(z)``.

    Returns ``P(x) - P(xhat) + (rho/2)|x - xhat|^2 + <xhat - z, x - xhat>/alpha``,
    which is nonnegative for a ``rho``-weakly convex ``P``. Scalar penalties
    with array arguments give elementwise residuals.
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    xh = np.asarray(p.prox(z, alpha))
    d = x - xh
    if p.size is None:
        return p.value(x) - p.value(xh) + 0.5 * p.rho * d * d + (xh - z) * d / alpha
    return (p.eval(x) - p.eval(xh) + 0.5 * p.rho * float(d @ d)
            + float((xh - z) @ d) / alpha)
