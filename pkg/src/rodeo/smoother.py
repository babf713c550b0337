"""Local linear smoothing with a product kernel.

The fit at a query point solves the weighted least squares problem
whose intercept is the estimate; the row of the smoothing matrix at the
query point (the effective kernel) is exposed because every derivative
statistic downstream is a linear functional of the responses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .dataset import Dataset
from .kernels import KernelSpec, kernel_value

RIDGE_FACTOR = 1e-10

WELL_POSED = "well_posed"
RIDGE_STABILIZED = "ridge_stabilized"


class FitError(Exception):
    """Local fit could not be computed."""


class InsufficientSupport(FitError):
    def __init__(self, nonzero, needed):
        super().__init__(
            f"only {nonzero} observations carry weight; need at least {needed}"
        )


class SingularNormalMatrix(FitError):
    def __init__(self):
        super().__init__("normal matrix is singular even after ridge stabilization")


@dataclass(frozen=True)
class FitResult:
    """Outcome of one local linear fit.

    ``effective_weights`` reproduces the estimate as a dot product with
    the responses; it sums to one and is orthogonal to the centered
    design (constant and linear reproduction).
    """

    mhat: float
    alpha_hat: np.ndarray
    effective_weights: np.ndarray
    condition_flag: str


def _check_bandwidths(h, d):
    h = np.asarray(h, dtype=float)
    if h.shape != (d,):
        raise ValueError(f"bandwidth vector must have shape ({d},), got {h.shape}")
    if not np.all(h > 0):
        raise ValueError("all bandwidths must be positive")
    return h


def _check_point(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise ValueError(f"query point must have shape ({d},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("query point must be finite")
    return x


def weight_vector(data: Dataset, x, h, kernel: KernelSpec) -> np.ndarray:
    """Unnormalized product-kernel weights of every observation at ``x``."""
    x = _check_point(x, data.d)
    h = _check_bandwidths(h, data.d)
    u = (data.X - x) / h
    return np.prod(kernel_value(kernel, u), axis=1)


class _FitContext:
    """Factored weighted-least-squares state at one ``(x, h)``.

    Shared by the fit itself and by the per-variable derivative
    statistics, which reuse the Cholesky factor of the normal matrix.
    """

    def __init__(self, data: Dataset, x, h, kernel: KernelSpec):
        self.data = data
        self.x = _check_point(x, data.d)
        self.h = _check_bandwidths(h, data.d)
        self.kernel = kernel
        self.w = weight_vector(data, x, h, kernel)

        n, d = data.X.shape
        needed = d + 1
        nonzero = int(np.count_nonzero(self.w))
        if nonzero < needed:
            raise InsufficientSupport(nonzero, needed)

        design = np.empty((n, d + 1))
        design[:, 0] = 1.0
        design[:, 1:] = data.X - self.x
        self.design = design

        weighted = design * self.w[:, None]
        normal = design.T @ weighted
        self.condition_flag = WELL_POSED
        try:
            self._cho = linalg.cho_factor(normal, lower=True)
        except linalg.LinAlgError:
            ridge = RIDGE_FACTOR * np.trace(normal) / (d + 1)
            try:
                self._cho = linalg.cho_factor(
                    normal + ridge * np.eye(d + 1), lower=True
                )
            except linalg.LinAlgError:
                raise SingularNormalMatrix() from None
            self.condition_flag = RIDGE_STABILIZED

        self.alpha = linalg.cho_solve(self._cho, weighted.T @ data.Y)
        e1 = np.zeros(d + 1)
        e1[0] = 1.0
        # u1 = M^{-1} e1; its image under the design gives the smoother row.
        self.u1 = linalg.cho_solve(self._cho, e1)
        self.p = design @ self.u1
        self.residual = data.Y - design @ self.alpha

    def solve(self, b):
        return linalg.cho_solve(self._cho, b)

    @property
    def mhat(self) -> float:
        return float(self.alpha[0])

    @property
    def effective_weights(self) -> np.ndarray:
        return self.w * self.p


def local_linear_fit(data: Dataset, x, h, kernel: KernelSpec) -> FitResult:
    """Fit a weighted linear model at ``x`` with per-coordinate bandwidths ``h``.

    Raises :class:`InsufficientSupport` when fewer than ``d + 1``
    observations carry nonzero weight and :class:`SingularNormalMatrix`
    when the normal matrix stays rank-deficient after a single ridge
    retry (in which case a successful fit is flagged
    ``ridge_stabilized``).
    """
    ctx = _FitContext(data, x, h, kernel)
    return FitResult(
        mhat=ctx.mhat,
        alpha_hat=ctx.alpha.copy(),
        effective_weights=ctx.effective_weights,
        condition_flag=ctx.condition_flag,
    )
