"""Scikit-learn style wrappers around the selection engines."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dataset import Dataset
from .engines import RodeoConfig, SigmaSpec, rodeo_global, rodeo_hard, rodeo_soft
from .kernels import kernel_by_name


def _build_config(est, sigma_spec=None) -> RodeoConfig:
    return RodeoConfig(
        beta=est.beta,
        h0=est.h0,
        c_n=est.c_n,
        sigma=sigma_spec if sigma_spec is not None else SigmaSpec.parse(est.sigma),
        kernel=kernel_by_name(est.kernel),
        max_steps=est.max_steps,
        threshold=est.threshold,
        rho=est.rho,
        min_bandwidth_floor=est.min_bandwidth_floor,
        smoother=est.smoother,
    )


class RodeoRegressor(RegressorMixin, BaseEstimator):
    """Local linear regression with per-query greedy bandwidth selection.

    Fitting stores the training data and resolves the noise level once;
    each prediction runs the selection loop at that query point, so
    irrelevant covariates keep large bandwidths and are effectively
    averaged out.

    Parameters
    ----------
    beta : float
        Bandwidth shrink factor per accepted test, in (0, 1).
    h0 : float
        Initial bandwidth for all covariates.
    c_n : float
        Threshold sequence constant.
    kernel : str
        "gaussian" or "epanechnikov".
    sigma : str or float
        Noise handling: a number, "known:VALUE", "rice", "median" or
        "median_as_variance".
    variant : str
        "hard" for keep-or-kill selection, "soft" for soft thresholding.
    threshold : str
        "hard" or "modified" (adds a decaying drift guard).
    rho, max_steps, min_bandwidth_floor : optional
        Overrides for the data-driven defaults.
    smoother : str
        "local_linear" or "kernel" (locally constant).
    """

    def __init__(
        self,
        beta=0.9,
        h0=1.0,
        c_n=1.0,
        kernel="gaussian",
        sigma="rice",
        variant="hard",
        threshold="hard",
        rho=None,
        max_steps=None,
        min_bandwidth_floor=None,
        smoother="local_linear",
    ):
        self.beta = beta
        self.h0 = h0
        self.c_n = c_n
        self.kernel = kernel
        self.sigma = sigma
        self.variant = variant
        self.threshold = threshold
        self.rho = rho
        self.max_steps = max_steps
        self.min_bandwidth_floor = min_bandwidth_floor
        self.smoother = smoother

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.variant not in ("hard", "soft"):
            raise ValueError(f"unknown variant: {self.variant!r}")
        self.dataset_ = Dataset(X=X, Y=y)
        self.n_features_in_ = X.shape[1]
        self.sigma_ = _build_config(self).sigma.resolve(self.dataset_)
        return self

    def _run(self, x):
        config = _build_config(self, sigma_spec=SigmaSpec.known(self.sigma_))
        engine = rodeo_hard if self.variant == "hard" else rodeo_soft
        return engine(self.dataset_, x, config)

    def predict(self, X):
        check_is_fitted(self, "dataset_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("feature count differs from fit")
        return np.array([self._run(x).estimate for x in X])

    def select_bandwidths(self, X):
        """Final per-coordinate bandwidths for each query row."""
        check_is_fitted(self, "dataset_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("feature count differs from fit")
        return np.vstack([self._run(x).h_star for x in X])


class RodeoFeatureSelector(SelectorMixin, BaseEstimator):
    """Variable selection by shared greedy bandwidth shrinkage.

    Runs the pooled multi-point engine on evaluation points subsampled
    from the training rows; a feature is selected when its bandwidth was
    shrunk at least once.
    """

    def __init__(
        self,
        k=20,
        seed=0,
        beta=0.9,
        h0=1.0,
        c_n=1.0,
        kernel="gaussian",
        sigma="rice",
        threshold="hard",
        rho=None,
        max_steps=None,
        min_bandwidth_floor=None,
        smoother="local_linear",
    ):
        self.k = k
        self.seed = seed
        self.beta = beta
        self.h0 = h0
        self.c_n = c_n
        self.kernel = kernel
        self.sigma = sigma
        self.threshold = threshold
        self.rho = rho
        self.max_steps = max_steps
        self.min_bandwidth_floor = min_bandwidth_floor
        self.smoother = smoother

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        data = Dataset(X=X, Y=y)
        rng = np.random.default_rng(self.seed)
        k = min(self.k, data.n)
        rows = rng.choice(data.n, size=k, replace=False)
        config = _build_config(self)
        result = rodeo_global(data, data.X[rows], config)
        self.n_features_in_ = data.d
        self.bandwidths_ = result.h_star
        # Shrunk at least once means strictly below the midpoint
        # between the initial bandwidth and its first shrink.
        cutoff = config.h0 * (1.0 + config.beta) / 2.0
        self.support_mask_ = result.h_star < cutoff
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_mask_")
        return self.support_mask_
