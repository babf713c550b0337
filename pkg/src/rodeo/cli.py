"""Command-line interface.

Exit codes: 0 on success, 2 for configuration problems (bad flags,
malformed config file, invalid parameter ranges), 3 for runtime
failures (unreadable or malformed data, failed fits).

Every run writes a result JSON that echoes the fully resolved
configuration, and optionally a long-format trace CSV with one decision
per row, ordered by (step, variable).  Output files carry no timestamps
so reruns with identical inputs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .dataset import Dataset, DatasetError, load_dataset
from .engines import (
    ConfigError,
    FitFailure,
    PrefitError,
    RodeoConfig,
    SigmaSpec,
    rodeo_global,
    rodeo_greedy,
    rodeo_hard,
    rodeo_soft,
)
from .experiments import (
    center_point,
    example_spec,
    hard_engine,
    pointwise_risk,
    scaling_check,
    soft_engine,
)
from .kernels import kernel_by_name
from .smoother import FitError

TRACE_HEADER = ["t", "j", "Z", "s", "lambda", "h_before", "h_after", "active_after"]
GLOBAL_TRACE_HEADER = [
    "t",
    "j",
    "T",
    "lambda",
    "trace_P",
    "trace_PP",
    "h_before",
    "h_after",
    "active_after",
]

ENGINE_KEYS = (
    "beta",
    "h0",
    "c_n",
    "sigma",
    "kernel",
    "threshold",
    "rho",
    "max_steps",
    "min_bandwidth_floor",
    "smoother",
)
RUN_KEYS = (
    "engine",
    "point",
    "k",
    "steps",
    "seed",
    "replicates",
    "out_trace",
    "out_result",
    "name",
    "n",
    "d",
    "noise",
    "ns",
)
ALLOWED_CONFIG_KEYS = set(ENGINE_KEYS) | set(RUN_KEYS)


def _load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must contain a JSON object")
    unknown = sorted(set(cfg) - ALLOWED_CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return cfg


def _merge_settings(args) -> dict:
    settings = dict(_load_config_file(args.config)) if args.config else {}
    for key in ALLOWED_CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = flag
    return settings


def _engine_config(settings) -> RodeoConfig:
    kwargs = {}
    if "beta" in settings:
        kwargs["beta"] = float(settings["beta"])
    if "h0" in settings:
        kwargs["h0"] = float(settings["h0"])
    if "c_n" in settings:
        kwargs["c_n"] = float(settings["c_n"])
    if "sigma" in settings:
        kwargs["sigma"] = SigmaSpec.parse(settings["sigma"])
    if "kernel" in settings:
        try:
            kwargs["kernel"] = kernel_by_name(str(settings["kernel"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if "threshold" in settings:
        kwargs["threshold"] = str(settings["threshold"])
    if "rho" in settings:
        kwargs["rho"] = float(settings["rho"])
    if "max_steps" in settings:
        kwargs["max_steps"] = int(settings["max_steps"])
    if "min_bandwidth_floor" in settings:
        kwargs["min_bandwidth_floor"] = float(settings["min_bandwidth_floor"])
    if "smoother" in settings:
        kwargs["smoother"] = str(settings["smoother"])
    return RodeoConfig(**kwargs)


def _resolve_point(settings, data: Dataset) -> np.ndarray:
    raw = settings.get("point", "center")
    if isinstance(raw, str):
        if raw.strip() == "center":
            lo = data.X.min(axis=0)
            hi = data.X.max(axis=0)
            return 0.5 * (lo + hi)
        try:
            values = [float(tok) for tok in raw.split(",")]
        except ValueError:
            raise ConfigError(f"cannot parse point {raw!r}") from None
    else:
        values = [float(v) for v in raw]
    point = np.asarray(values, dtype=float)
    if point.shape != (data.d,):
        raise ConfigError(f"point has {point.size} coordinates, data has {data.d}")
    return point


def _subsample_points(data: Dataset, k: int, seed: int) -> np.ndarray:
    if k < 1:
        raise ConfigError("k must be at least 1")
    k = min(k, data.n)
    rng = np.random.default_rng([int(seed), 3])
    rows = rng.choice(data.n, size=k, replace=False)
    return data.X[np.sort(rows)]


def _config_echo(config: RodeoConfig, data: Dataset, settings) -> dict:
    return {
        "beta": config.beta,
        "h0": config.h0,
        "c_n": config.c_n,
        "sigma": config.sigma.describe(),
        "kernel": config.kernel.family,
        "threshold": config.threshold,
        "rho": config.resolved_rho(),
        "max_steps": config.resolved_max_steps(data.n),
        "min_bandwidth_floor": config.resolved_floor(),
        "smoother": config.smoother,
        "seed": int(settings.get("seed", 0)),
    }


def _write_json(path, payload) -> None:
    if path is None:
        return
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(value) -> str:
    return repr(float(value))


def _write_trace(path, records) -> None:
    if path is None:
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.t,
                    r.j + 1,
                    _fmt(r.z),
                    _fmt(r.s),
                    _fmt(r.lam),
                    _fmt(r.h_before),
                    _fmt(r.h_after),
                    "true" if r.active_after else "false",
                ]
            )


def _write_global_trace(path, records) -> None:
    if path is None:
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(GLOBAL_TRACE_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.t,
                    r.stat.j + 1,
                    _fmt(r.stat.T),
                    _fmt(r.stat.lam),
                    _fmt(r.stat.trace_P),
                    _fmt(r.stat.trace_PP),
                    _fmt(r.h_before),
                    _fmt(r.h_after),
                    "true" if r.active_after else "false",
                ]
            )


def _cmd_local(args, soft: bool) -> int:
    settings = _merge_settings(args)
    config = _engine_config(settings)
    data = load_dataset(args.data)
    point = _resolve_point(settings, data)
    result = (rodeo_soft if soft else rodeo_hard)(data, point, config)
    payload = {
        "command": "rodeo-soft" if soft else "rodeo-local",
        "config": _config_echo(config, data, settings),
        "point": [float(v) for v in point],
        "h_star": [float(v) for v in result.h_star],
        "estimate": result.estimate,
        "steps": result.steps_taken,
        "sigma_used": result.sigma_used,
    }
    if soft:
        payload["soft_correction"] = result.soft_correction
    _write_json(args.out_result, payload)
    _write_trace(args.out_trace, result.trace)
    print(f"estimate {result.estimate!r} after {result.steps_taken} steps")
    return 0


def _cmd_global(args) -> int:
    settings = _merge_settings(args)
    config = _engine_config(settings)
    data = load_dataset(args.data)
    k = int(settings.get("k", 20))
    seed = int(settings.get("seed", 0))
    points = _subsample_points(data, k, seed)
    result = rodeo_global(data, points, config)
    payload = {
        "command": "rodeo-global",
        "config": _config_echo(config, data, settings),
        "k": int(points.shape[0]),
        "eval_points": [[float(v) for v in row] for row in points],
        "h_star": [float(v) for v in result.h_star],
        "estimates": [float(v) for v in result.estimates],
        "steps": result.steps_taken,
        "sigma_used": result.sigma_used,
    }
    _write_json(args.out_result, payload)
    _write_global_trace(args.out_trace, result.trace)
    print(f"selected bandwidths {np.array2string(result.h_star, precision=4)}")
    return 0


def _cmd_greedy(args) -> int:
    settings = _merge_settings(args)
    config = _engine_config(settings)
    data = load_dataset(args.data)
    k = int(settings.get("k", 20))
    seed = int(settings.get("seed", 0))
    steps = int(settings.get("steps", 3 * data.d))
    points = _subsample_points(data, k, seed)
    result = rodeo_greedy(data, points, config, n_steps=steps)
    payload = {
        "command": "rodeo-greedy",
        "config": _config_echo(config, data, settings),
        "k": int(points.shape[0]),
        "steps": steps,
        "selection_order": [j + 1 for j in result.selection_order],
        "winners": [s.j + 1 for s in result.steps],
        "h_star": [float(v) for v in result.h_star],
        "sigma_used": result.sigma_used,
    }
    _write_json(args.out_result, payload)
    _write_trace(args.out_trace, result.trace)
    print(f"selection order {[j + 1 for j in result.selection_order]}")
    return 0


def _cmd_sigma(args) -> int:
    settings = _merge_settings(args)
    spec = SigmaSpec.parse(settings.get("sigma", "rice"))
    data = load_dataset(args.data)
    value = spec.resolve(data)
    _write_json(args.out_result, {"command": "sigma", "sigma": value,
                                  "method": spec.describe()})
    print(float(value))
    return 0


def _cmd_experiment(args) -> int:
    settings = _merge_settings(args)
    name = settings.get("name")
    if not name:
        raise ConfigError("experiment requires --name")
    seed = int(settings.get("seed", 0))
    spec = example_spec(
        str(name),
        n=settings.get("n"),
        d=settings.get("d"),
        sigma=settings.get("noise"),
        seed=seed,
    )
    config = _engine_config(settings)
    replicates = int(settings.get("replicates", 10))
    engine_name = str(settings.get("engine", "hard"))
    if engine_name == "hard":
        engine = hard_engine(config)
    elif engine_name == "soft":
        engine = soft_engine(config)
    else:
        raise ConfigError(f"unknown engine: {engine_name!r}")
    point = settings.get("point", "center")
    if isinstance(point, str) and point.strip() == "center":
        pts = center_point(spec)[None, :]
    else:
        pts = np.atleast_2d(np.asarray(
            [float(t) for t in point.split(",")] if isinstance(point, str) else point,
            dtype=float,
        ))
        if pts.shape[1] != spec.d:
            raise ConfigError("point dimension does not match the example")
    workers = _worker_count()
    summary = pointwise_risk(engine, spec, pts, replicates, workers=workers)
    payload = {
        "command": "experiment",
        "name": spec.name,
        "engine": engine_name,
        "n": spec.n,
        "d": spec.d,
        "noise": spec.sigma,
        "seed": spec.seed,
        "replicates": replicates,
        "config": {
            **{
                "beta": config.beta,
                "h0": config.h0,
                "c_n": config.c_n,
                "sigma": config.sigma.describe(),
                "kernel": config.kernel.family,
                "threshold": config.threshold,
                "smoother": config.smoother,
            },
        },
        "risk": {
            "mean": summary.mean,
            "median": summary.median,
            "q25": summary.q25,
            "q75": summary.q75,
            "failures": summary.failures,
        },
    }
    _write_json(args.out_result, payload)
    if args.out_trace is not None:
        with open(args.out_trace, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["replicate", "squared_error"])
            for r, err in enumerate(summary.per_replicate):
                writer.writerow([r, _fmt(err)])
    print(f"median squared error {summary.median!r} over {replicates} replicates")
    return 0


def _cmd_scaling(args) -> int:
    settings = _merge_settings(args)
    raw_ns = settings.get("ns", "500,2000,8000")
    if isinstance(raw_ns, str):
        try:
            ns = [int(tok) for tok in raw_ns.split(",")]
        except ValueError:
            raise ConfigError(f"cannot parse ns {raw_ns!r}") from None
    else:
        ns = [int(v) for v in raw_ns]
    seed = int(settings.get("seed", 0))
    spec = example_spec(
        str(settings.get("name", "quad1")),
        d=settings.get("d"),
        sigma=settings.get("noise"),
        seed=seed,
    )
    config = _engine_config(settings)
    replicates = int(settings.get("replicates", 10))
    try:
        check = scaling_check(spec, ns, replicates, config)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    payload = {
        "command": "scaling-check",
        "name": spec.name,
        "ns": [int(v) for v in check.ns],
        "replicates": replicates,
        "slope": check.slope,
        "mean_log_bandwidth": [float(v) for v in check.mean_log_bandwidth],
    }
    _write_json(args.out_result, payload)
    print(f"slope {check.slope!r}")
    return 0


def _worker_count() -> int:
    raw = os.environ.get("RODEO_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration file")
    p.add_argument("--beta", type=float, help="bandwidth shrink factor in (0,1)")
    p.add_argument("--h0", type=float, help="initial bandwidth")
    p.add_argument("--c-n", dest="c_n", type=float, help="threshold constant")
    p.add_argument("--sigma", help="known:VALUE | rice | median | median_as_variance")
    p.add_argument("--kernel", choices=["gaussian", "epanechnikov"])
    p.add_argument("--threshold", choices=["hard", "modified"])
    p.add_argument("--rho", type=float, help="modified-threshold drift constant")
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument(
        "--min-bandwidth-floor", dest="min_bandwidth_floor", type=float
    )
    p.add_argument("--smoother", choices=["local_linear", "kernel"])
    p.add_argument("--seed", type=int, help="base seed for all randomness")
    p.add_argument("--out-trace", dest="out_trace", help="trace CSV path")
    p.add_argument("--out-result", dest="out_result", help="result JSON path")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rodeo",
        description="Greedy bandwidth and variable selection for "
        "sparse nonparametric regression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for cmd, helptext in [
        ("rodeo-local", "hard-threshold selection at one point"),
        ("rodeo-soft", "soft-threshold selection at one point"),
    ]:
        p = sub.add_parser(cmd, help=helptext)
        p.add_argument("--data", required=True, help="CSV dataset (x1..xd,y)")
        p.add_argument("--point", help='comma-separated coordinates or "center"')
        _add_engine_flags(p)

    p = sub.add_parser("rodeo-global", help="shared bandwidths over k points")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, help="number of subsampled evaluation points")
    _add_engine_flags(p)

    p = sub.add_parser("rodeo-greedy", help="shrink one bandwidth per step")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--steps", type=int, help="number of greedy steps")
    _add_engine_flags(p)

    p = sub.add_parser("sigma", help="estimate the noise level")
    p.add_argument("--data", required=True)
    p.add_argument("--sigma", help="rice | median | median_as_variance | known:VALUE")
    p.add_argument("--config")
    p.add_argument("--out-result", dest="out_result")

    p = sub.add_parser("experiment", help="replicated pointwise risk")
    p.add_argument("--name", help="quad2 | cubesin | onedim | turlach | quad1")
    p.add_argument("--engine", choices=["hard", "soft"])
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--noise", type=float, help="generator noise level")
    p.add_argument("--replicates", type=int)
    p.add_argument("--point")
    _add_engine_flags(p)

    p = sub.add_parser("scaling-check", help="bandwidth-vs-n scaling slope")
    p.add_argument("--name")
    p.add_argument("--ns", help="comma-separated sample sizes")
    p.add_argument("--d", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--replicates", type=int)
    _add_engine_flags(p)

    return parser


_HANDLERS = {
    "rodeo-local": lambda a: _cmd_local(a, soft=False),
    "rodeo-soft": lambda a: _cmd_local(a, soft=True),
    "rodeo-global": _cmd_global,
    "rodeo-greedy": _cmd_greedy,
    "sigma": _cmd_sigma,
    "experiment": _cmd_experiment,
    "scaling-check": _cmd_scaling,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return _HANDLERS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, FitError, FitFailure, PrefitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
