"""Product-kernel primitives for multivariate local smoothing.

Kernel values are kept unnormalized: every weighted-least-squares
quantity built from them is invariant to rescaling the kernel by a
positive constant, so the normalizing factor is dropped throughout.
The stored ``nu2`` is the second moment of the *normalized* kernel,
which is the constant that enters bias expansions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

EPANECHNIKOV_RADIUS = math.sqrt(5.0)


@dataclass(frozen=True)
class KernelSpec:
    """A univariate kernel applied coordinatewise as a product kernel.

    Parameters
    ----------
    family : str
        Either ``"gaussian"`` or ``"epanechnikov"``.
    support_radius : float
        Half-width of the support (``inf`` for the Gaussian).
    nu2 : float
        Second moment of the normalized kernel.
    scale : float
        Positive multiplier on raw kernel values.  Smoothing estimates
        are invariant to it; it exists so that invariance can be
        exercised directly.
    """

    family: str
    support_radius: float
    nu2: float
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in ("gaussian", "epanechnikov"):
            raise ValueError(f"unknown kernel family: {self.family!r}")
        if not self.nu2 > 0:
            raise ValueError("nu2 must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")


GAUSSIAN = KernelSpec(family="gaussian", support_radius=math.inf, nu2=1.0)
EPANECHNIKOV = KernelSpec(
    family="epanechnikov", support_radius=EPANECHNIKOV_RADIUS, nu2=1.0
)

_BY_NAME = {"gaussian": GAUSSIAN, "epanechnikov": EPANECHNIKOV}


def kernel_by_name(name: str) -> KernelSpec:
    try:
        return _BY_NAME[name.lower()]
    except KeyError:
        raise ValueError(f"unknown kernel family: {name!r}") from None


def kernel_value(kernel: KernelSpec, u):
    """Evaluate the (unnormalized) kernel at ``u``, elementwise."""
    u = np.asarray(u, dtype=float)
    if kernel.family == "gaussian":
        out = np.exp(-0.5 * u * u)
    else:
        # max() guards the float representation of the support edge,
        # where 5 - u*u can round to a tiny negative number.
        out = np.where(
            np.abs(u) <= kernel.support_radius, np.maximum(5.0 - u * u, 0.0), 0.0
        )
    return kernel.scale * out


def kernel_mass(kernel: KernelSpec) -> float:
    """Integral of the raw kernel, i.e. its normalizing constant."""
    lo = -kernel.support_radius
    hi = kernel.support_radius
    val, _ = integrate.quad(lambda u: float(kernel_value(kernel, u)), lo, hi)
    return val


def kernel_second_moment(kernel: KernelSpec) -> float:
    """Second moment of the normalized kernel, by adaptive quadrature."""
    mass = kernel_mass(kernel)
    lo = -kernel.support_radius
    hi = kernel.support_radius
    val, _ = integrate.quad(
        lambda u: u * u * float(kernel_value(kernel, u)) / mass, lo, hi
    )
    return val


def kernel_squared_norm(kernel: KernelSpec) -> float:
    """Integral of the squared normalized kernel, by adaptive quadrature."""
    mass = kernel_mass(kernel)
    lo = -kernel.support_radius
    hi = kernel.support_radius
    val, _ = integrate.quad(
        lambda u: (float(kernel_value(kernel, u)) / mass) ** 2, lo, hi
    )
    return val
