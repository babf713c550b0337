"""Acceptance gate: one test per release criterion, each printing a
pass/fail line with its measured runtime (run with ``pytest -v -s``).

Tolerances are pinned here and nowhere else.  Statistical criteria use
frozen seeds, so reruns are exact.
"""

import math
import time

import numpy as np
import pytest

from rodeo.dataset import Dataset, load_dataset, save_dataset
from rodeo.engines import (
    RodeoConfig,
    SigmaSpec,
    rodeo_greedy,
    rodeo_hard,
)
from rodeo.experiments import (
    bias_check,
    center_point,
    derived_rng,
    example_spec,
    generate,
    hard_engine,
    loocv_engine,
    pointwise_risk,
    scaling_check,
    variance_check,
)
from rodeo.gradients import (
    bandwidth_gradient,
    gradient_sd,
)
from rodeo.kernels import EPANECHNIKOV, GAUSSIAN
from rodeo.noise import sigma_median, sigma_rice
from rodeo.smoother import local_linear_fit


class Stopwatch:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def report(num, name, ok, watch, detail):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] criterion {num:>2} {name}: {detail} [{watch.elapsed:.1f}s]")


def test_criterion_01_linear_reproduction():
    limit = 1.0
    with Stopwatch() as watch:
        rng = np.random.default_rng(101)
        X = rng.uniform(0, 1, (120, 4))
        slopes = np.array([2.0, -1.0, 0.5, 3.0])
        data = Dataset(X, 0.25 + X @ slopes)
        x = np.array([0.4, 0.6, 0.5, 0.3])
        h = np.full(4, 1.0)

        fit = local_linear_fit(data, x, h, GAUSSIAN)
        fit_err = abs(fit.mhat - (0.25 + x @ slopes))
        z_max = max(
            abs(bandwidth_gradient(data, x, h, GAUSSIAN, j)) for j in range(4)
        )
        res = rodeo_hard(data, x, RodeoConfig(beta=0.8, sigma=SigmaSpec.rice()))
        frozen = bool(np.array_equal(res.h_star, h) and res.steps_taken == 1)
        ok = fit_err <= 1e-8 and z_max <= 1e-8 and frozen
    report(
        1,
        "linear reproduction",
        ok and watch.elapsed < limit,
        watch,
        f"fit err {fit_err:.1e}, max |gradient| {z_max:.1e}, frozen={frozen}",
    )
    assert fit_err <= 1e-8
    assert z_max <= 1e-8
    assert frozen
    assert watch.elapsed < limit


def test_criterion_02_gradient_matches_finite_differences():
    limit = 30.0
    with Stopwatch() as watch:
        rng = np.random.default_rng(202)
        worst = 0.0
        for trial in range(100):
            kernel = GAUSSIAN if trial % 2 == 0 else EPANECHNIKOV
            X = rng.uniform(0, 1, (50, 3))
            Y = 3.0 * X[:, 0] ** 2 + rng.standard_normal(50)
            data = Dataset(X, Y)
            x = rng.uniform(0.25, 0.75, 3)
            h = rng.uniform(0.6, 1.4, 3)
            for j in range(3):
                z = bandwidth_gradient(data, x, h, kernel, j)
                delta = 1e-5 * h[j]
                hp, hm = h.copy(), h.copy()
                hp[j] += delta
                hm[j] -= delta
                fd = (
                    local_linear_fit(data, x, hp, kernel).mhat
                    - local_linear_fit(data, x, hm, kernel).mhat
                ) / (2 * delta)
                tol = max(1e-6, 1e-4 * abs(z))
                worst = max(worst, abs(z - fd) / tol)
        ok = worst <= 1.0
    report(
        2,
        "gradient vs finite differences",
        ok and watch.elapsed < limit,
        watch,
        f"100 configs x 3 vars x both kernels, worst err/tol {worst:.3f}",
    )
    assert ok
    assert watch.elapsed < limit


def test_criterion_03_exact_conditional_sd():
    limit = 120.0
    with Stopwatch() as watch:
        rng = np.random.default_rng(303)
        worst_gap = 0.0
        for trial in range(50):
            kernel = GAUSSIAN if trial % 2 == 0 else EPANECHNIKOV
            n = int(rng.integers(20, 45))
            d = int(rng.integers(1, 4))
            data = Dataset(rng.uniform(0, 1, (n, d)), rng.standard_normal(n))
            x = rng.uniform(0.3, 0.7, d)
            h = rng.uniform(0.6, 1.4, d)
            j = int(rng.integers(0, d))
            sigma = float(rng.uniform(0.5, 2.0))
            probe = np.empty(n)
            for i in range(n):
                e = np.zeros(n)
                e[i] = 1.0
                probe[i] = bandwidth_gradient(Dataset(data.X, e), x, h, kernel, j)
            direct = gradient_sd(data, x, h, kernel, j, sigma)
            worst_gap = max(worst_gap, abs(sigma * np.linalg.norm(probe) - direct))
        probes_ok = worst_gap <= 1e-10

        spec = example_spec("quad1", n=2000, sigma=1.0, seed=42)
        chk = variance_check([0.5, 0.5], [0.5, 0.5], spec, replicates=200)
        mc_gap = abs(chk.empirical_sd - chk.exact_sd) / chk.exact_sd
        mc_ok = mc_gap <= 0.15
        ok = probes_ok and mc_ok
    report(
        3,
        "exact conditional sd",
        ok and watch.elapsed < limit,
        watch,
        f"probe gap {worst_gap:.1e}, MC sd within {mc_gap:.1%} of exact",
    )
    assert probes_ok
    assert mc_ok
    assert watch.elapsed < limit


def test_criterion_04_asymptotic_variance_constant():
    limit = 60.0
    with Stopwatch() as watch:
        spec = example_spec("quad1", n=5000, sigma=1.0, seed=42)
        chk = variance_check([0.5, 0.5], [0.4, 0.4], spec, replicates=5)
        ratio = chk.exact_sd / chk.asymptotic_sd
        ok = 0.7 <= ratio <= 1.3
    report(
        4,
        "asymptotic variance constant",
        ok and watch.elapsed < limit,
        watch,
        f"exact/asymptotic sd ratio {ratio:.3f} in [0.7, 1.3]",
    )
    assert ok
    assert watch.elapsed < limit


def test_criterion_05_bias_expansion_constant():
    limit = 120.0
    with Stopwatch() as watch:
        spec = example_spec("quad1", n=10000, seed=42)
        x = [0.5, 0.5]
        h = [0.3, 0.3]
        rel = bias_check(spec, x, h, j=0, replicates=80)
        rel_err = abs(rel.empirical - rel.predicted) / abs(rel.predicted)
        irrel = bias_check(spec, x, h, j=1, replicates=80)
        irrel_ok = abs(irrel.empirical) <= 3.0 * irrel.standard_error
        ok = rel.predicted == pytest.approx(0.6, abs=1e-9) and rel_err <= 0.2 and irrel_ok
    report(
        5,
        "bias expansion constant",
        ok and watch.elapsed < limit,
        watch,
        f"relevant {rel.empirical:.4f} vs {rel.predicted:.4f} ({rel_err:.1%}); "
        f"irrelevant {irrel.empirical:+.5f} within 3se={3 * irrel.standard_error:.5f}",
    )
    assert rel_err <= 0.2
    assert irrel_ok
    assert watch.elapsed < limit


def test_criterion_06_sparsity_recovery():
    limit = 300.0
    beta, h0 = 0.8, 1.0
    with Stopwatch() as watch:
        spec = example_spec("quad2", seed=20260810)  # n=500, d=10, sigma=0.5
        cfg = RodeoConfig(beta=beta, h0=h0, sigma=SigmaSpec.known(0.5))
        x0 = center_point(spec)
        finals = np.array(
            [
                rodeo_hard(generate(spec, replicate=r)[0], x0, cfg).h_star
                for r in range(50)
            ]
        )
        mean_relevant = finals[:, :2].mean(axis=0)
        relevant_ok = bool(np.all(mean_relevant <= beta**3 * h0))
        frac_clean = float(np.mean(finals[:, 2:].min(axis=1) >= beta * h0))
        irrelevant_ok = frac_clean >= 0.8
        ok = relevant_ok and irrelevant_ok
    report(
        6,
        "sparsity recovery",
        ok and watch.elapsed < limit,
        watch,
        f"mean relevant bw {np.round(mean_relevant, 3)} <= {beta ** 3:.3f}; "
        f"irrelevant clean in {frac_clean:.0%} of 50 runs",
    )
    assert relevant_ok
    assert irrelevant_ok
    assert watch.elapsed < limit


def test_criterion_07_bandwidth_scaling_exponent():
    limit = 600.0
    with Stopwatch() as watch:
        spec = example_spec("quad1", sigma=0.5, seed=11)
        cfg = RodeoConfig(beta=0.9, h0=1.0, sigma=SigmaSpec.known(0.5))
        chk = scaling_check(spec, [500, 2000, 8000], replicates=20, config=cfg)
        ok = -0.3 <= chk.slope <= -0.1
    report(
        7,
        "bandwidth scaling exponent",
        ok and watch.elapsed < limit,
        watch,
        f"slope {chk.slope:.3f} in [-0.3, -0.1] "
        f"(mean log h {np.round(chk.mean_log_bandwidth, 2)})",
    )
    assert ok
    assert watch.elapsed < limit


def test_criterion_08_beats_single_bandwidth_baseline():
    limit = 600.0
    with Stopwatch() as watch:
        spec = example_spec("quad2", seed=5)  # n=500, d=10, sigma=0.5
        cfg = RodeoConfig(beta=0.8, h0=1.0, sigma=SigmaSpec.known(0.5))
        x0 = center_point(spec)[None, :]
        grid = np.geomspace(0.05, 2.0, 30)
        ours = pointwise_risk(hard_engine(cfg), spec, x0, replicates=30)
        base = pointwise_risk(loocv_engine(grid), spec, x0, replicates=30)
        ok = ours.median <= base.median
    report(
        8,
        "baseline comparison",
        ok and watch.elapsed < limit,
        watch,
        f"median squared error {ours.median:.4f} vs single-bandwidth "
        f"{base.median:.4f}",
    )
    assert ok
    assert watch.elapsed < limit


def test_criterion_09_greedy_selection_order():
    limit = 600.0
    with Stopwatch() as watch:
        spec = example_spec("turlach", seed=3)  # n=500, d=10, sigma=0.05
        cfg = RodeoConfig(
            beta=0.9, h0=1.0, sigma=SigmaSpec.known(0.05), smoother="kernel"
        )
        linear_first = 0
        x1_early = 0
        runs = 50
        for r in range(runs):
            data, _ = generate(spec, replicate=r)
            rng = derived_rng(spec.seed, 9, r)
            pts = data.X[rng.choice(data.n, size=100, replace=False)]
            res = rodeo_greedy(data, pts, cfg, n_steps=150)
            pos = {j: i for i, j in enumerate(res.selection_order)}
            linear_pos = [pos.get(j, 10**6) for j in (1, 2, 3, 4)]
            irrelevant_pos = [pos.get(j, 10**6) for j in range(5, 10)]
            if max(linear_pos) < min(irrelevant_pos):
                linear_first += 1
            if pos.get(0, 10**6) < 5:
                x1_early += 1
        linear_ok = linear_first == runs
        x1_ok = x1_early / runs >= 0.6
        ok = linear_ok and x1_ok
    report(
        9,
        "greedy selection order",
        ok and watch.elapsed < limit,
        watch,
        f"linear effects first in {linear_first}/{runs} runs; "
        f"curved variable in top 5 in {x1_early}/{runs}",
    )
    assert linear_ok
    assert x1_ok
    assert watch.elapsed < limit


def test_criterion_10_noise_level_recovery():
    limit = 60.0
    with Stopwatch() as watch:
        rice_vals = []
        median_vals = []
        for r in range(50):
            rng = derived_rng(515, 0, r)
            X = rng.uniform(0, 1, (500, 2))
            data = Dataset(X, rng.standard_normal(500))
            rice_vals.append(sigma_rice(data, 20))
            median_vals.append(sigma_median(data, 20, "mean_based"))
        rice_mean = float(np.mean(rice_vals))
        median_mean = float(np.mean(median_vals))
        ok = 0.75 <= rice_mean <= 1.25 and 0.75 <= median_mean <= 1.25
    report(
        10,
        "noise level recovery",
        ok and watch.elapsed < limit,
        watch,
        f"pair-difference mean {rice_mean:.3f}, robust mean {median_mean:.3f} "
        f"(truth 1.0)",
    )
    assert ok
    assert watch.elapsed < limit


def test_criterion_11_determinism_and_round_trip(tmp_path):
    with Stopwatch() as watch:
        spec = example_spec("quad2", n=200, d=5, seed=77)
        data, _ = generate(spec)
        cfg = RodeoConfig(beta=0.8, sigma=SigmaSpec.rice())
        x = center_point(spec)
        first = rodeo_hard(data, x, cfg)
        second = rodeo_hard(data, x, cfg)
        traces_equal = first.trace == second.trace and np.array_equal(
            first.h_star, second.h_star
        )
        regenerated, _ = generate(spec)
        regen_equal = np.array_equal(data.X, regenerated.X) and np.array_equal(
            data.Y, regenerated.Y
        )
        path = tmp_path / "round.csv"
        save_dataset(data, path)
        back = load_dataset(path)
        round_trip = np.array_equal(data.X, back.X) and np.array_equal(
            data.Y, back.Y
        )
        ok = traces_equal and regen_equal and round_trip
    report(
        11,
        "determinism and round trip",
        ok,
        watch,
        f"traces identical={traces_equal}, regeneration identical={regen_equal}, "
        f"csv round trip exact={round_trip}",
    )
    assert traces_equal
    assert regen_equal
    assert round_trip
