"""Greedy bandwidth-selection engines.

All engines share the same skeleton: start every coordinate at a large
bandwidth, test the bandwidth gradient of the fit against a noise
threshold, shrink the bandwidths that pass, and freeze the rest.  They
differ in how the gradient evidence is aggregated (single point,
averaged over evaluation points, squared and pooled) and in whether the
threshold is applied as a keep-or-kill test or as soft shrinkage of the
correction term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .gradients import (
    LOCAL_LINEAR,
    SMOOTHERS,
    fit_stats,
    threshold_hard,
    threshold_modified,
)
from .kernels import GAUSSIAN, KernelSpec
from .noise import (
    MEAN_BASED,
    MEDIAN_AS_VARIANCE,
    default_pair_count,
    sigma_median,
    sigma_rice,
)
from .smoother import FitError

HARD = "hard"
MODIFIED = "modified"

MAX_STEPS_LOG_FACTOR = 10.0
BANDWIDTH_FLOOR_FRACTION = 1e-3
DEFAULT_RHO_FRACTION = 0.1


class ConfigError(ValueError):
    """Invalid engine configuration."""


class FitFailure(Exception):
    """A local fit failed mid-run; the partial trace is attached."""

    def __init__(self, step, trace):
        self.step = step
        self.trace = trace
        super().__init__(f"local fit failed at step {step}")


@dataclass(frozen=True)
class SigmaSpec:
    """How the noise level entering the thresholds is obtained.

    ``known`` uses a fixed value; the estimator methods defer to the
    nearest-pair estimators with ``pairs`` neighbors (default
    ``default_pair_count``).
    """

    method: str
    value: float | None = None
    pairs: int | None = None

    def __post_init__(self):
        if self.method not in ("known", "rice", "median", "median_as_variance"):
            raise ConfigError(f"unknown sigma method: {self.method!r}")
        if self.method == "known":
            if self.value is None or not self.value >= 0:
                raise ConfigError("known sigma requires a nonnegative value")
        elif self.value is not None:
            raise ConfigError("only known sigma takes a value")
        if self.pairs is not None and self.pairs < 1:
            raise ConfigError("pairs must be positive")

    @classmethod
    def known(cls, value: float) -> "SigmaSpec":
        return cls(method="known", value=float(value))

    @classmethod
    def rice(cls, pairs: int | None = None) -> "SigmaSpec":
        return cls(method="rice", pairs=pairs)

    @classmethod
    def median(cls, pairs: int | None = None) -> "SigmaSpec":
        return cls(method="median", pairs=pairs)

    @classmethod
    def median_as_variance(cls, pairs: int | None = None) -> "SigmaSpec":
        return cls(method="median_as_variance", pairs=pairs)

    @classmethod
    def parse(cls, text) -> "SigmaSpec":
        """Parse ``known:VALUE``, ``rice``, ``median`` or ``median_as_variance``."""
        if isinstance(text, SigmaSpec):
            return text
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            return cls.known(float(text))
        text = str(text).strip()
        if text.startswith("known:"):
            try:
                return cls.known(float(text.split(":", 1)[1]))
            except ValueError:
                raise ConfigError(f"bad sigma value in {text!r}") from None
        if text in ("rice", "median", "median_as_variance"):
            return cls(method=text)
        raise ConfigError(f"cannot parse sigma spec {text!r}")

    def resolve(self, data: Dataset) -> float:
        """The sigma actually used, estimating it if necessary."""
        if self.method == "known":
            return float(self.value)
        J = self.pairs if self.pairs is not None else default_pair_count(data.n)
        if self.method == "rice":
            return sigma_rice(data, J)
        if self.method == "median":
            return sigma_median(data, J, MEAN_BASED)
        return sigma_median(data, J, MEDIAN_AS_VARIANCE)

    def describe(self) -> str:
        if self.method == "known":
            return f"known:{self.value}"
        return self.method


@dataclass(frozen=True)
class RodeoConfig:
    """Tuning knobs shared by all engines.

    ``None`` for ``max_steps``, ``min_bandwidth_floor`` or ``rho``
    selects data-dependent defaults: ``ceil(10 log n)`` steps, a floor
    of ``1e-3 * h0``, and ``0.1 * h0**2`` for the modified threshold.
    """

    beta: float = 0.9
    h0: float = 1.0
    c_n: float = 1.0
    sigma: SigmaSpec = field(default_factory=SigmaSpec.rice)
    kernel: KernelSpec = GAUSSIAN
    max_steps: int | None = None
    threshold: str = HARD
    rho: float | None = None
    min_bandwidth_floor: float | None = None
    smoother: str = LOCAL_LINEAR

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ConfigError("beta must lie in (0, 1)")
        if not self.h0 > 0:
            raise ConfigError("h0 must be positive")
        if not self.c_n > 0:
            raise ConfigError("c_n must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")
        if self.threshold not in (HARD, MODIFIED):
            raise ConfigError(f"unknown threshold mode: {self.threshold!r}")
        if self.rho is not None and self.rho < 0:
            raise ConfigError("rho must be nonnegative")
        if self.min_bandwidth_floor is not None and not self.min_bandwidth_floor > 0:
            raise ConfigError("min_bandwidth_floor must be positive")
        if self.smoother not in SMOOTHERS:
            raise ConfigError(f"unknown smoother: {self.smoother!r}")
        if not isinstance(self.sigma, SigmaSpec):
            raise ConfigError("sigma must be a SigmaSpec")

    def resolved_max_steps(self, n: int) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return math.ceil(MAX_STEPS_LOG_FACTOR * math.log(n))

    def resolved_floor(self) -> float:
        if self.min_bandwidth_floor is not None:
            return self.min_bandwidth_floor
        return BANDWIDTH_FLOOR_FRACTION * self.h0

    def resolved_rho(self) -> float:
        if self.rho is not None:
            return self.rho
        return DEFAULT_RHO_FRACTION * self.h0**2

    def local_threshold(self, s: float, n: int, t: int) -> float:
        if self.threshold == HARD:
            return threshold_hard(s, n, self.c_n)
        return threshold_modified(s, n, self.c_n, self.resolved_rho(), t, self.beta)


def default_parameters(n: int, c0: float, alpha: float) -> tuple[float, float]:
    """Sample-size driven shrink factor and initial bandwidth.

    Returns ``beta = n**(-alpha / log(n)**3)`` and
    ``h0 = c0 / log(log(n))`` (natural logs).
    """
    if n < 3:
        raise ConfigError("need n >= 3 so that log(log(n)) is positive")
    if not 0 < alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    beta = math.exp(-alpha / math.log(n) ** 2)
    h0 = c0 / math.log(math.log(n))
    return beta, h0


@dataclass
class BandwidthState:
    """Per-variable bandwidths on the discrete path ``h0 * beta**k``.

    Bandwidths are derived from integer shrink counts so the path
    structure is exact and replayable bit for bit.
    """

    h0: float
    beta: float
    counts: np.ndarray
    active: set[int]
    t: int = 1

    @classmethod
    def initial(cls, d: int, config: RodeoConfig) -> "BandwidthState":
        return cls(
            h0=config.h0,
            beta=config.beta,
            counts=np.zeros(d, dtype=int),
            active=set(range(d)),
        )

    @property
    def h(self) -> np.ndarray:
        return self.h0 * self.beta ** self.counts.astype(float)

    def bandwidth(self, j: int) -> float:
        return self.h0 * self.beta ** float(self.counts[j])

    def shrink(self, j: int) -> None:
        self.counts[j] += 1

    def deactivate(self, j: int) -> None:
        self.active.discard(j)


@dataclass(frozen=True)
class TraceRecord:
    """One per-variable decision inside one sweep."""

    t: int
    j: int
    z: float
    s: float
    lam: float
    h_before: float
    h_after: float
    active_after: bool


@dataclass(frozen=True)
class RodeoResult:
    h_star: np.ndarray
    estimate: float
    trace: list[TraceRecord]
    steps_taken: int
    sigma_used: float
    soft_correction: float = 0.0


@dataclass(frozen=True)
class GlobalStat:
    """Pooled squared-gradient statistic for one variable at one sweep."""

    j: int
    T: float
    lam: float
    trace_P: float
    trace_PP: float

    def __post_init__(self):
        if self.T < 0 or self.trace_P < 0 or self.trace_PP < 0:
            raise ValueError("statistics must be nonnegative")
        if self.trace_PP > self.trace_P**2 * (1 + 1e-9) + 1e-12:
            raise ValueError("trace(P P) cannot exceed trace(P)^2")


@dataclass(frozen=True)
class GlobalTraceRecord:
    t: int
    stat: GlobalStat
    h_before: float
    h_after: float
    active_after: bool


@dataclass(frozen=True)
class GlobalRodeoResult:
    h_star: np.ndarray
    estimates: np.ndarray
    trace: list[GlobalTraceRecord]
    steps_taken: int
    sigma_used: float


@dataclass(frozen=True)
class GreedyStepRecord:
    t: int
    j: int
    score: float
    h_before: float
    h_after: float


@dataclass(frozen=True)
class GreedyResult:
    selection_order: list[int]
    steps: list[GreedyStepRecord]
    trace: list[TraceRecord]
    h_star: np.ndarray
    sigma_used: float


def _check_eval_points(points, d: int) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ConfigError(f"evaluation points must be k x {d}")
    if pts.shape[0] < 1:
        raise ConfigError("need at least one evaluation point")
    if not np.all(np.isfinite(pts)):
        raise ConfigError("evaluation points must be finite")
    return pts


def _sweep_statistics(data, x, state, config, sigma, trace):
    """Gradient, sd and threshold for every active variable at the
    current bandwidths.  Raises FitFailure with the partial trace."""
    try:
        stats = fit_stats(data, x, state.h, config.kernel, config.smoother)
        active = sorted(state.active)
        G = stats.gradient_matrix(active)
        zs = G.T @ data.Y
        sds = sigma * np.linalg.norm(G, axis=0)
        rows = []
        for pos, j in enumerate(active):
            lam = config.local_threshold(float(sds[pos]), data.n, state.t)
            rows.append((j, float(zs[pos]), float(sds[pos]), lam))
    except FitError as exc:
        raise FitFailure(state.t, list(trace)) from exc
    return stats, rows


def _apply_hard_decisions(state, rows, floor, trace):
    """Shrink or deactivate each variable; returns the shrunk set."""
    shrunk = []
    for j, z, s, lam in rows:
        h_before = state.bandwidth(j)
        passes = abs(z) > lam
        if passes and h_before * state.beta >= floor:
            state.shrink(j)
            h_after = state.bandwidth(j)
            active_after = True
            shrunk.append((j, z, lam, h_before))
        else:
            state.deactivate(j)
            h_after = h_before
            active_after = False
        trace.append(
            TraceRecord(
                t=state.t,
                j=j,
                z=z,
                s=s,
                lam=lam,
                h_before=h_before,
                h_after=h_after,
                active_after=active_after,
            )
        )
    return shrunk


def _final_estimate(data, x, state, config, trace):
    try:
        return fit_stats(data, x, state.h, config.kernel, config.smoother).estimate
    except FitError as exc:
        raise FitFailure(state.t, list(trace)) from exc


def rodeo_hard(data: Dataset, x, config: RodeoConfig = RodeoConfig()) -> RodeoResult:
    """Keep-or-kill bandwidth selection at a single query point.

    Every active variable whose gradient exceeds its threshold has its
    bandwidth multiplied by ``beta``; the rest are frozen for good.  The
    estimate is the smoother refit at the final bandwidths.
    """
    x = np.asarray(x, dtype=float)
    sigma = config.sigma.resolve(data)
    state = BandwidthState.initial(data.d, config)
    max_steps = config.resolved_max_steps(data.n)
    floor = config.resolved_floor()
    trace: list[TraceRecord] = []
    while state.active and state.t <= max_steps:
        _, rows = _sweep_statistics(data, x, state, config, sigma, trace)
        _apply_hard_decisions(state, rows, floor, trace)
        state.t += 1
    estimate = _final_estimate(data, x, state, config, trace)
    return RodeoResult(
        h_star=state.h,
        estimate=estimate,
        trace=trace,
        steps_taken=state.t - 1,
        sigma_used=sigma,
    )


def rodeo_soft(data: Dataset, x, config: RodeoConfig = RodeoConfig()) -> RodeoResult:
    """Soft-thresholding variant.

    Follows the same bandwidth path as the hard version but estimates
    the integrated correction explicitly: at every sweep the shrunk
    variables contribute ``sign(z) (|z| - lam)_+ * (1 - beta) * h_j``
    and the output subtracts the accumulated correction from the fit at
    the initial bandwidths.
    """
    x = np.asarray(x, dtype=float)
    sigma = config.sigma.resolve(data)
    state = BandwidthState.initial(data.d, config)
    max_steps = config.resolved_max_steps(data.n)
    floor = config.resolved_floor()
    trace: list[TraceRecord] = []
    base_estimate = None
    correction = 0.0
    while state.active and state.t <= max_steps:
        stats, rows = _sweep_statistics(data, x, state, config, sigma, trace)
        if base_estimate is None:
            base_estimate = stats.estimate
        shrunk = _apply_hard_decisions(state, rows, floor, trace)
        for j, z, lam, h_before in shrunk:
            soft = math.copysign(max(abs(z) - lam, 0.0), z)
            correction += soft * (1.0 - state.beta) * h_before
        state.t += 1
    if base_estimate is None:
        base_estimate = _final_estimate(data, x, state, config, trace)
    return RodeoResult(
        h_star=state.h,
        estimate=base_estimate - correction,
        trace=trace,
        steps_taken=state.t - 1,
        sigma_used=sigma,
        soft_correction=correction,
    )


def rodeo_global(
    data: Dataset, eval_points, config: RodeoConfig = RodeoConfig()
) -> GlobalRodeoResult:
    """One shared bandwidth vector selected from pooled evidence.

    At every sweep the per-point gradient weight vectors for variable
    ``j`` form an ``n x k`` matrix; its squared column norms average to
    the test statistic, and the threshold uses the exact first two
    moments of that quadratic form under pure noise.
    """
    pts = _check_eval_points(eval_points, data.d)
    sigma = config.sigma.resolve(data)
    k = pts.shape[0]
    state = BandwidthState.initial(data.d, config)
    max_steps = config.resolved_max_steps(data.n)
    floor = config.resolved_floor()
    log_term = math.log(config.c_n * data.n)
    if not log_term > 0:
        raise ConfigError("n * c_n must exceed 1")
    trace: list[GlobalTraceRecord] = []
    while state.active and state.t <= max_steps:
        try:
            active = sorted(state.active)
            per_point = [
                fit_stats(
                    data, p, state.h, config.kernel, config.smoother
                ).gradient_matrix(active)
                for p in pts
            ]
            decisions = []
            for pos, j in enumerate(active):
                G = np.column_stack([M[:, pos] for M in per_point])
                T = float(np.sum((G.T @ data.Y) ** 2)) / k
                trace_P = float(np.sum(G * G))
                trace_PP = float(np.sum((G.T @ G) ** 2))
                lam = (sigma**2 / k) * trace_P + 2.0 * (sigma**2 / k) * math.sqrt(
                    trace_PP * log_term
                )
                decisions.append(GlobalStat(j, T, lam, trace_P, trace_PP))
        except FitError as exc:
            raise FitFailure(state.t, list(trace)) from exc
        for stat in decisions:
            j = stat.j
            h_before = state.bandwidth(j)
            if stat.T > stat.lam and h_before * state.beta >= floor:
                state.shrink(j)
                h_after = state.bandwidth(j)
                active_after = True
            else:
                state.deactivate(j)
                h_after = h_before
                active_after = False
            trace.append(
                GlobalTraceRecord(state.t, stat, h_before, h_after, active_after)
            )
        state.t += 1
    try:
        estimates = np.array(
            [
                fit_stats(data, p, state.h, config.kernel, config.smoother).estimate
                for p in pts
            ]
        )
    except FitError as exc:
        raise FitFailure(state.t, list(trace)) from exc
    return GlobalRodeoResult(
        h_star=state.h,
        estimates=estimates,
        trace=trace,
        steps_taken=state.t - 1,
        sigma_used=sigma,
    )


def rodeo_greedy(
    data: Dataset,
    eval_points,
    config: RodeoConfig = RodeoConfig(),
    n_steps: int = 1,
) -> GreedyResult:
    """Stagewise variant: shrink one bandwidth per sweep.

    The winner maximizes the gradient-to-threshold ratio averaged over
    the evaluation points (ties go to the lowest index); the noise level
    cancels from the ratio, so none needs to be estimated.  Returns the
    order in which variables were first shrunk.
    """
    if n_steps < 1:
        raise ConfigError("n_steps must be at least 1")
    pts = _check_eval_points(eval_points, data.d)
    sigma = config.sigma.resolve(data)
    # The ratio |z| / lam is invariant to sigma; keep it positive so the
    # recorded thresholds stay meaningful.
    ratio_sigma = sigma if sigma > 0 else 1.0
    sqrt_log = math.sqrt(2.0 * math.log(config.c_n * data.n))
    if not config.c_n * data.n > 1:
        raise ConfigError("n * c_n must exceed 1")
    state = BandwidthState.initial(data.d, config)
    floor = config.resolved_floor()
    selection_order: list[int] = []
    steps: list[GreedyStepRecord] = []
    trace: list[TraceRecord] = []
    for t in range(1, n_steps + 1):
        state.t = t
        h = state.h
        candidates = [j for j in range(data.d) if h[j] * config.beta >= floor]
        if not candidates:
            break
        try:
            per_point = [
                fit_stats(
                    data, p, h, config.kernel, config.smoother
                ).gradient_matrix(candidates)
                for p in pts
            ]
        except FitError as exc:
            raise FitFailure(t, list(trace)) from exc
        abs_z = np.array([np.abs(M.T @ data.Y) for M in per_point])
        lam = np.array(
            [ratio_sigma * np.linalg.norm(M, axis=0) * sqrt_log for M in per_point]
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(
                lam > 0, abs_z / lam, np.where(abs_z > 0, np.inf, 0.0)
            )
        scores = np.full(data.d, -np.inf)
        summaries = {}
        for pos, j in enumerate(candidates):
            scores[j] = float(np.mean(ratio[:, pos]))
            summaries[j] = (
                float(np.mean(abs_z[:, pos])),
                float(np.mean(lam[:, pos])),
            )
        winner = int(np.argmax(scores))
        h_before = state.bandwidth(winner)
        state.shrink(winner)
        h_after = state.bandwidth(winner)
        if winner not in selection_order:
            selection_order.append(winner)
        steps.append(
            GreedyStepRecord(t, winner, float(scores[winner]), h_before, h_after)
        )
        for j in candidates:
            mean_z, mean_lam = summaries[j]
            trace.append(
                TraceRecord(
                    t=t,
                    j=j,
                    z=mean_z,
                    s=mean_lam / sqrt_log if sqrt_log > 0 else 0.0,
                    lam=mean_lam,
                    h_before=h[j],
                    h_after=h_after if j == winner else h[j],
                    active_after=True,
                )
            )
    return GreedyResult(
        selection_order=selection_order,
        steps=steps,
        trace=trace,
        h_star=state.h,
        sigma_used=sigma,
    )


def pseudo_covariates(
    data: Dataset, x, h, h_prime=None, kernel: KernelSpec = GAUSSIAN
) -> np.ndarray:
    """Gradient weight vectors as columns of an ``n x d`` matrix.

    Column ``j`` dotted with the responses gives the bandwidth gradient
    for variable ``j``.  With ``h_prime`` the columns are differences of
    the representations at the two bandwidth vectors, the discrete
    analogue of shrinking a bandwidth by one step.
    """
    stats = fit_stats(data, x, h, kernel)
    cols = np.column_stack([stats.gradient_weights(j) for j in range(data.d)])
    if h_prime is None:
        return cols
    stats_prime = fit_stats(data, x, h_prime, kernel)
    cols_prime = np.column_stack(
        [stats_prime.gradient_weights(j) for j in range(data.d)]
    )
    return cols_prime - cols


class PrefitError(Exception):
    """Linear prefit could not be computed."""


def _lasso_cd(Xc, yc, lam, gap_tol=1e-8, max_sweeps=100_000):
    """Cyclic coordinate descent for 1/(2n) ||y - Xb||^2 + lam ||b||_1.

    Stops when the duality gap falls below ``gap_tol``.
    """
    n, d = Xc.shape
    col_norms = np.einsum("ij,ij->j", Xc, Xc)
    b = np.zeros(d)
    resid = yc.copy()
    thresh = n * lam
    for _ in range(max_sweeps):
        for j in range(d):
            if col_norms[j] == 0.0:
                continue
            old = b[j]
            rho = Xc[:, j] @ resid + col_norms[j] * old
            new = math.copysign(max(abs(rho) - thresh, 0.0), rho) / col_norms[j]
            if new != old:
                resid += Xc[:, j] * (old - new)
                b[j] = new
        primal = 0.5 * float(resid @ resid) / n + lam * float(np.abs(b).sum())
        corr = float(np.max(np.abs(Xc.T @ resid))) if d else 0.0
        scale = min(1.0 / n, lam / corr) if corr > 0 else 1.0 / n
        theta = scale * resid
        dual = float(theta @ yc) - 0.5 * n * float(theta @ theta)
        if primal - dual < gap_tol:
            return b
    raise PrefitError(f"coordinate descent did not reach gap {gap_tol}")


def linear_prefit(
    data: Dataset, method: str = "ols", l1: float | None = None
) -> tuple[np.ndarray, Dataset]:
    """Fit a linear model and return its coefficients and residual data.

    The residual dataset keeps the covariates and replaces the response
    by the residuals, ready for a second-stage engine run.  ``l1`` is
    the lasso penalty; ``l1 = 0`` reduces to ordinary least squares.
    """
    if method not in ("ols", "lasso"):
        raise ConfigError(f"unknown prefit method: {method!r}")
    n, d = data.X.shape
    if method == "ols" or (method == "lasso" and l1 == 0):
        if n <= d + 1:
            raise PrefitError("need n > d + 1 observations for least squares")
        design = np.column_stack([np.ones(n), data.X])
        normal = design.T @ design
        try:
            coef = np.linalg.solve(normal, design.T @ data.Y)
        except np.linalg.LinAlgError:
            raise PrefitError("singular design") from None
        fitted = design @ coef
    else:
        if l1 is None or l1 < 0:
            raise ConfigError("lasso requires a nonnegative l1 penalty")
        x_mean = data.X.mean(axis=0)
        y_mean = float(data.Y.mean())
        slopes = _lasso_cd(data.X - x_mean, data.Y - y_mean, l1)
        coef = np.concatenate([[y_mean - x_mean @ slopes], slopes])
        fitted = coef[0] + data.X @ slopes
    residual = Dataset(X=data.X, Y=data.Y - fitted)
    return coef, residual
