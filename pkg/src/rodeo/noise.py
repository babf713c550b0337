"""Noise level estimation from nearest-neighbor response differences.

When two covariate vectors are close, the difference of their responses
is dominated by noise, so the smallest pairwise distances yield nearly
model-free estimates of sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import norm

from .dataset import Dataset

MEAN_BASED = "mean_based"
MEDIAN_CONSISTENT = "median_consistent"
MEDIAN_AS_VARIANCE = "median_as_variance"
MEDIAN_VARIANTS = (MEAN_BASED, MEDIAN_CONSISTENT, MEDIAN_AS_VARIANCE)

_NORMAL_UPPER_QUARTILE = float(norm.ppf(0.75))


@dataclass(frozen=True)
class PairSet:
    """The ``J`` closest observation pairs, ascending by distance.

    Ties are broken by the lexicographic order of the index pairs
    ``(i, l)`` with ``i < l`` (0-based).
    """

    first: np.ndarray
    second: np.ndarray
    distance: np.ndarray

    @property
    def J(self) -> int:
        return len(self.distance)


def default_pair_count(n: int) -> int:
    """Default number of pairs: n/10 capped at 50, floored at 5."""
    return min(max(5, min(n // 10, 50)), n * (n - 1) // 2)


def nearest_pairs(data: Dataset, J: int) -> PairSet:
    """Return the ``J`` pairs with the smallest Euclidean distances."""
    n = data.n
    total = n * (n - 1) // 2
    if not 1 <= J <= total:
        raise ValueError(f"J must lie in [1, {total}], got {J}")
    dists = pdist(data.X)
    # pdist's condensed order enumerates (i, l) with i < l
    # lexicographically, so a stable sort gives the tie rule for free.
    order = np.argsort(dists, kind="stable")[:J]
    ii, ll = np.triu_indices(n, k=1)
    return PairSet(first=ii[order], second=ll[order], distance=dists[order])


def _response_differences(data: Dataset, J: int) -> np.ndarray:
    pairs = nearest_pairs(data, J)
    return data.Y[pairs.first] - data.Y[pairs.second]


def sigma_rice(data: Dataset, J: int) -> float:
    """Square root of half the mean squared nearest-pair difference."""
    diff = _response_differences(data, J)
    return math.sqrt(float(np.mean(diff * diff)) / 2.0)


def sigma_median(data: Dataset, J: int, variant: str = MEAN_BASED) -> float:
    """Robust sigma estimates from absolute nearest-pair differences.

    ``mean_based`` applies the constant ``sqrt(pi)/2`` to the mean
    absolute difference (the constant a folded-normal mean supports).
    ``median_consistent`` rescales the median by the folded-normal
    median, which is the Fisher-consistent choice.  ``median_as_variance``
    applies ``sqrt(pi)/2`` to the median, reads the result as a variance
    and takes its square root; the form is dimensionally inconsistent
    and not a consistent sigma estimator, but it is kept so the three
    readings can be compared on equal footing.
    """
    if variant not in MEDIAN_VARIANTS:
        raise ValueError(f"unknown variant: {variant!r}")
    abs_diff = np.abs(_response_differences(data, J))
    half_sqrt_pi = math.sqrt(math.pi) / 2.0
    if variant == MEAN_BASED:
        return half_sqrt_pi * float(np.mean(abs_diff))
    med = float(np.median(abs_diff))
    if variant == MEDIAN_CONSISTENT:
        return med / (math.sqrt(2.0) * _NORMAL_UPPER_QUARTILE)
    return math.sqrt(half_sqrt_pi * med)
