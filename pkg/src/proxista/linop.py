"""Linear operators and Gram spectral bounds.

A :class:`LinearMap` is an immutable apply/adjoint pair. The factories below
cover the operators needed for deconvolution problems: dense matrices, full
linear convolution, block synthesis (replicating each coefficient over a block
of samples) and composition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConvergenceError, ShapeError

__all__ = [
    "LinearMap",
    "SpectralBounds",
    "make_dense",
    "make_identity",
    "make_convolution",
    "make_block_synthesis",
    "compose",
    "gram_matrix",
    "gram_spectral_bounds",
    "adjoint_consistency_check",
    "load_csv_matrix",
    "load_csv_filter",
]


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Linear map ``R^in_dim -> R^out_dim`` with its adjoint.

    Instances are immutable; ``apply`` and ``adjoint`` are pure functions of
    their argument. ``matrix`` is kept for dense maps so that Gram assembly
    can skip the basis-vector sweep.
    """

    in_dim: int
    out_dim: int
    _apply: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    _adjoint: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    kind: str = "dense"
    matrix: np.ndarray | None = field(default=None, repr=False)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.in_dim,):
            raise ShapeError(f"expected input of shape ({self.in_dim},), got {x.shape}")
        return self._apply(x)

    def adjoint(self, r):
        r = np.asarray(r, dtype=float)
        if r.shape != (self.out_dim,):
            raise ShapeError(f"expected input of shape ({self.out_dim},), got {r.shape}")
        return self._adjoint(r)

    def __call__(self, x):
        return self.apply(x)

    @property
    def shape(self):
        return (self.out_dim, self.in_dim)

    @property
    def T(self) -> "LinearMap":
        return LinearMap(
            self.out_dim,
            self.in_dim,
            self._adjoint,
            self._apply,
            kind=f"adjoint({self.kind})",
            matrix=None if self.matrix is None else self.matrix.T,
        )

    def to_dense(self) -> np.ndarray:
        """Assemble the matrix by applying the map to the standard basis."""
        if self.matrix is not None:
            return self.matrix.copy()
        cols = [self._apply(e) for e in np.eye(self.in_dim)]
        return np.column_stack(cols)


@dataclass(frozen=True)
class SpectralBounds:
    """Least and greatest eigenvalue of ``H^T H``."""

    sigma_m: float
    sigma_M: float
    method: str = "exact-eig"
    tolerance: float = 0.0

    @property
    def condition(self) -> float:
        return self.sigma_m / self.sigma_M


def make_dense(entries, rows=None, cols=None) -> LinearMap:
    """Wrap a matrix as a :class:`LinearMap`.

    ``entries`` may be a 2-D array, or a flat sequence of ``rows*cols`` values
    in row-major order.
    """
    a = np.asarray(entries, dtype=float)
    if a.ndim == 1:
        if rows is None or cols is None:
            raise ShapeError("flat entries need explicit rows and cols")
        if a.size != rows * cols:
            raise ShapeError(f"{a.size} entries supplied for a {rows}x{cols} matrix")
        a = a.reshape(rows, cols)
    elif a.ndim == 2:
        if (rows is not None and a.shape[0] != rows) or (cols is not None and a.shape[1] != cols):
            raise ShapeError(f"matrix has shape {a.shape}, expected ({rows}, {cols})")
    else:
        raise ShapeError(f"matrix entries must be 1-D or 2-D, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError("matrix must have positive dimensions")
    a = a.copy()
    a.setflags(write=False)
    return LinearMap(a.shape[1], a.shape[0], a.dot, a.T.dot, kind="dense", matrix=a)


def make_identity(n: int) -> LinearMap:
    return make_dense(np.eye(n))


def make_convolution(filt, signal_len: int) -> LinearMap:
    """Full linear convolution with ``filt``; output length ``n + L - 1``.

    The adjoint is the correlation with the same filter, restricted to the
    ``n`` lags where the filter fully overlaps.
    """
    h = np.array(filt, dtype=float).ravel()
    if h.size == 0:
        raise ValueError("convolution filter must be nonempty")
    n = int(signal_len)
    if n < 1:
        raise ValueError("signal length must be >= 1")
    h.setflags(write=False)

    def apply(x):
        return np.convolve(h, x, mode="full")

    def adjoint(r):
        return np.correlate(r, h, mode="valid")

    return LinearMap(n, n + h.size - 1, apply, adjoint, kind="convolution")


def make_block_synthesis(block_len: int, num_coeffs: int) -> LinearMap:
    """Replicate coefficient ``c[k]`` over samples ``B*k .. B*k + B - 1``."""
    B, K = int(block_len), int(num_coeffs)
    if B < 1 or K < 1:
        raise ValueError("block length and number of coefficients must be >= 1")

    def apply(c):
        return np.repeat(c, B)

    def adjoint(r):
        return r.reshape(K, B).sum(axis=1)

    return LinearMap(K, B * K, apply, adjoint, kind="block-synthesis")


def compose(outer: LinearMap, inner: LinearMap) -> LinearMap:
    """Return ``outer @ inner``."""
    if inner.out_dim != outer.in_dim:
        raise ShapeError(
            f"cannot compose: inner maps to R^{inner.out_dim}, outer expects R^{outer.in_dim}"
        )

    def apply(x):
        return outer._apply(inner._apply(x))

    def adjoint(r):
        return inner._adjoint(outer._adjoint(r))

    matrix = None
    if outer.matrix is not None and inner.matrix is not None:
        matrix = outer.matrix @ inner.matrix
        matrix.setflags(write=False)
    return LinearMap(inner.in_dim, outer.out_dim, apply, adjoint, kind="composition", matrix=matrix)


def gram_matrix(H: LinearMap) -> np.ndarray:
    A = H.to_dense()
    G = A.T @ A
    return 0.5 * (G + G.T)


def _power_iteration(op, n, tol, max_iters, rng):
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(1, max_iters + 1):
        w = op(v)
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, it, True
        v = w / nw
        if it > 1 and abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return lam_new, it, True
        lam = lam_new
    return lam, max_iters, False


def gram_spectral_bounds(H: LinearMap, tol: float = 1e-10, method: str = "auto",
                         max_iters: int = 100_000, seed: int = 0) -> SpectralBounds:
    """Extreme eigenvalues ``(sigma_m, sigma_M)`` of ``H^T H``.

    ``method="exact-eig"`` assembles the Gram matrix and uses a symmetric
    eigendecomposition; ``"power-iteration"`` estimates ``sigma_M`` by power
    iteration and ``sigma_m`` by power iteration on ``sigma_M I - H^T H``.
    ``"auto"`` picks the dense route for ``in_dim <= 2000``.

    The shifted iteration converges slowly when the bottom of the spectrum is
    clustered; its estimates are meant for large problems and are certified
    against the dense route in the tests.
    """
    if method == "auto":
        method = "exact-eig" if H.in_dim <= 2000 else "power-iteration"
    if method == "exact-eig":
        w = np.linalg.eigvalsh(gram_matrix(H))
        return SpectralBounds(max(float(w[0]), 0.0), float(w[-1]), "exact-eig", 0.0)
    if method != "power-iteration":
        raise ValueError(f"unknown method {method!r}")

    rng = np.random.Generator(np.random.Philox(seed))

    def gram(v):
        return H._adjoint(H._apply(v))

    sM, _, ok_M = _power_iteration(gram, H.in_dim, tol, max_iters, rng)
    if not ok_M:
        raise ConvergenceError("power iteration for sigma_M did not converge",
                               estimates=(None, sM))
    shifted, _, ok_m = _power_iteration(lambda v: sM * v - gram(v), H.in_dim, tol, max_iters, rng)
    sm = max(sM - shifted, 0.0)
    if not ok_m:
        raise ConvergenceError("shifted power iteration for sigma_m did not converge",
                               estimates=(sm, sM))
    return SpectralBounds(sm, sM, "power-iteration", tol)


def adjoint_consistency_check(H: LinearMap, trials: int = 100, seed: int = 0) -> float:
    """Worst ``|<Hx, r> - <x, H^T r>| / (1 + |<Hx, r>|)`` over random probes."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(H.in_dim)
        r = rng.standard_normal(H.out_dim)
        lhs = float(H.apply(x) @ r)
        rhs = float(x @ H.adjoint(r))
        worst = max(worst, abs(lhs - rhs) / (1.0 + abs(lhs)))
    return worst


def load_csv_matrix(path) -> LinearMap:
    """Dense map from a row-major, comma-separated file without header."""
    a = np.loadtxt(Path(path), delimiter=",", ndmin=2)
    return make_dense(a)


def load_csv_filter(path) -> np.ndarray:
    return np.loadtxt(Path(path), delimiter=",", ndmin=1).ravel()
