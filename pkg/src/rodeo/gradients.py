"""Bandwidth-gradient statistics that drive the selection loop.

For a linear smoother the derivative of the fitted value with respect
to one bandwidth is again a linear functional of the responses, so it
has an exact conditional standard deviation ``sigma * ||g||`` where
``g`` is its weight vector.  Both the local linear smoother and plain
kernel (locally constant) smoothing are supported; the latter reacts to
linear trends through design asymmetry, which the effective kernel of
the local linear fit cancels by construction.
"""

from __future__ import annotations

import math

import numpy as np

from .dataset import Dataset
from .kernels import KernelSpec
from .smoother import InsufficientSupport, _FitContext, weight_vector

LOCAL_LINEAR = "local_linear"
KERNEL = "kernel"
SMOOTHERS = (LOCAL_LINEAR, KERNEL)


def log_kernel_derivative_diag(
    kernel: KernelSpec, data: Dataset, x, h, j: int
) -> np.ndarray:
    """Per-observation derivative of the log kernel factor for variable ``j``.

    Multiplying the product-kernel weights by this vector gives the
    derivative of the weights with respect to ``h_j``.
    """
    h = np.asarray(h, dtype=float)
    hj = float(h[j])
    if not hj > 0:
        raise ValueError("bandwidth must be positive")
    delta = data.X[:, j] - float(np.asarray(x, dtype=float)[j])
    if kernel.family == "gaussian":
        return delta * delta / hj**3
    u2 = (delta / hj) ** 2
    inside = np.abs(delta) <= kernel.support_radius * hj
    out = np.zeros(data.n)
    with np.errstate(divide="ignore"):
        out[inside] = (2.0 * delta[inside] ** 2 / hj**3) / (5.0 - u2[inside])
    return out


def _weighted_log_derivative_matrix(kernel, data, x, h, w) -> np.ndarray:
    """Columnwise ``w * dlogK/dh_j`` for every variable at once.

    Rows with zero weight are zeroed first, which also removes the
    Epanechnikov pole at the support edge (the weight vanishes there).
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    delta = data.X - x
    if kernel.family == "gaussian":
        ell = delta * delta / h**3
    else:
        u2 = (delta / h) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            ell = np.where(
                np.abs(delta) <= kernel.support_radius * h,
                (2.0 * delta * delta / h**3) / (5.0 - u2),
                0.0,
            )
        ell[w == 0.0, :] = 0.0
    return w[:, None] * ell


class LocalLinearStats:
    """Derivative statistics of the local linear fit at one ``(x, h)``."""

    def __init__(self, data: Dataset, x, h, kernel: KernelSpec):
        self._ctx = _FitContext(data, x, h, kernel)

    @property
    def estimate(self) -> float:
        return self._ctx.mhat

    def _weighted_log_derivative(self, j: int) -> np.ndarray:
        ctx = self._ctx
        ell = log_kernel_derivative_diag(ctx.kernel, ctx.data, ctx.x, ctx.h, j)
        # The weight already carries the kernel factor that cancels the
        # pole of the Epanechnikov log-derivative at the support edge;
        # multiply only where the weight is nonzero to avoid 0 * inf.
        out = np.zeros(ctx.data.n)
        mask = ctx.w != 0.0
        out[mask] = ctx.w[mask] * ell[mask]
        return out

    def gradient(self, j: int) -> float:
        """Derivative of the fitted value with respect to ``h_j``.

        Computed through the residual of the local fit, without
        materializing the weight vector.
        """
        ctx = self._ctx
        v = self._weighted_log_derivative(j) * ctx.residual
        return float(ctx.u1 @ (ctx.design.T @ v))

    def gradient_weights(self, j: int) -> np.ndarray:
        """Weight vector ``g`` such that ``gradient(j) == g @ Y``."""
        ctx = self._ctx
        c = self._weighted_log_derivative(j) * ctx.p
        back = ctx.design @ ctx.solve(ctx.design.T @ c)
        return c - ctx.w * back

    def gradient_matrix(self, variables) -> np.ndarray:
        """Columns of gradient weight vectors for several variables.

        Equivalent to stacking :meth:`gradient_weights` but with the
        normal-matrix solves batched across variables.
        """
        ctx = self._ctx
        wl = _weighted_log_derivative_matrix(
            ctx.kernel, ctx.data, ctx.x, ctx.h, ctx.w
        )[:, list(variables)]
        c = wl * ctx.p[:, None]
        back = ctx.design @ ctx.solve(ctx.design.T @ c)
        return c - ctx.w[:, None] * back


class KernelSmootherStats:
    """Derivative statistics of a locally constant kernel smoother."""

    def __init__(self, data: Dataset, x, h, kernel: KernelSpec):
        self.data = data
        self.x = np.asarray(x, dtype=float)
        self.h = np.asarray(h, dtype=float)
        self.kernel = kernel
        self.w = weight_vector(data, x, h, kernel)
        self.total = float(self.w.sum())
        if not self.total > 0:
            raise InsufficientSupport(0, 1)

    @property
    def estimate(self) -> float:
        return float(self.w @ self.data.Y) / self.total

    def gradient_weights(self, j: int) -> np.ndarray:
        ell = log_kernel_derivative_diag(self.kernel, self.data, self.x, self.h, j)
        wl = np.zeros(self.data.n)
        mask = self.w != 0.0
        wl[mask] = self.w[mask] * ell[mask]
        return wl / self.total - self.w * (wl.sum() / self.total**2)

    def gradient(self, j: int) -> float:
        return float(self.gradient_weights(j) @ self.data.Y)

    def gradient_matrix(self, variables) -> np.ndarray:
        wl = _weighted_log_derivative_matrix(
            self.kernel, self.data, self.x, self.h, self.w
        )[:, list(variables)]
        return wl / self.total - np.outer(self.w, wl.sum(axis=0)) / self.total**2


def fit_stats(data: Dataset, x, h, kernel: KernelSpec, smoother: str = LOCAL_LINEAR):
    """Statistic provider for one query point and bandwidth vector."""
    if smoother == LOCAL_LINEAR:
        return LocalLinearStats(data, x, h, kernel)
    if smoother == KERNEL:
        return KernelSmootherStats(data, x, h, kernel)
    raise ValueError(f"unknown smoother: {smoother!r}")


def bandwidth_gradient(data: Dataset, x, h, kernel: KernelSpec, j: int) -> float:
    """Derivative of the local linear fit at ``x`` with respect to ``h_j``."""
    return LocalLinearStats(data, x, h, kernel).gradient(j)


def gradient_weight_vector(
    data: Dataset, x, h, kernel: KernelSpec, j: int
) -> np.ndarray:
    """The vector ``g`` representing the gradient as ``g @ Y``."""
    return LocalLinearStats(data, x, h, kernel).gradient_weights(j)


def gradient_sd(
    data: Dataset, x, h, kernel: KernelSpec, j: int, sigma: float
) -> float:
    """Exact conditional standard deviation of the bandwidth gradient."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    g = gradient_weight_vector(data, x, h, kernel, j)
    return sigma * float(np.linalg.norm(g))


def threshold_hard(s: float, n: int, c_n: float) -> float:
    """Noise-level threshold ``s * sqrt(2 log(n c_n))``."""
    if not n * c_n > 1:
        raise ValueError("n * c_n must exceed 1")
    return s * math.sqrt(2.0 * math.log(n * c_n))


def threshold_modified(
    s: float, n: int, c_n: float, rho_n: float, t: int, beta: float
) -> float:
    """Hard threshold plus the decaying term ``rho_n * beta**(3 t)``."""
    if rho_n < 0:
        raise ValueError("rho_n must be nonnegative")
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    if t < 1:
        raise ValueError("step index must be at least 1")
    return rho_n * beta ** (3 * t) + threshold_hard(s, n, c_n)
