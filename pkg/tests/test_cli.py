import csv
import json

import numpy as np
import pytest

from rodeo.cli import main
from rodeo.dataset import Dataset, save_dataset


def write_linear(tmp_path, n=80, d=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, d))
    y = 1.0 + X @ np.arange(1.0, d + 1.0)
    path = tmp_path / "linear.csv"
    save_dataset(Dataset(X, y), path)
    return path


def write_quad(tmp_path, n=250, d=5, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, d))
    y = 5.0 * X[:, 0] ** 2 * X[:, 1] ** 2 + 0.5 * rng.standard_normal(n)
    path = tmp_path / "quad.csv"
    save_dataset(Dataset(X, y), path)
    return path


def write_constant(tmp_path):
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, (30, 2))
    path = tmp_path / "constant.csv"
    save_dataset(Dataset(X, np.full(30, 2.0)), path)
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_sigma_constant_response_prints_zero(tmp_path, capsys):
    data = write_constant(tmp_path)
    code = main(["sigma", "--data", str(data), "--sigma", "rice"])
    assert code == 0
    assert capsys.readouterr().out.strip() == "0.0"


def test_sigma_known_value(tmp_path, capsys):
    data = write_constant(tmp_path)
    assert main(["sigma", "--data", str(data), "--sigma", "known:1.25"]) == 0
    assert capsys.readouterr().out.strip() == "1.25"


def test_local_on_linear_data_freezes(tmp_path):
    data = write_linear(tmp_path)
    out = tmp_path / "result.json"
    trace = tmp_path / "trace.csv"
    code = main(
        [
            "rodeo-local",
            "--data",
            str(data),
            "--point",
            "0.5,0.5,0.5",
            "--h0",
            "1.0",
            "--out-result",
            str(out),
            "--out-trace",
            str(trace),
        ]
    )
    assert code == 0
    result = json.loads(out.read_text())
    assert result["steps"] == 1
    assert result["h_star"] == [1.0, 1.0, 1.0]
    assert result["estimate"] == pytest.approx(1.0 + 0.5 * (1 + 2 + 3), abs=1e-7)
    # config echo is fully materialized
    cfg = result["config"]
    for key in ("beta", "h0", "c_n", "sigma", "kernel", "max_steps",
                "min_bandwidth_floor", "threshold", "smoother"):
        assert key in cfg


def test_trace_replay_reconstructs_h_star(tmp_path):
    data = write_quad(tmp_path)
    out = tmp_path / "result.json"
    trace = tmp_path / "trace.csv"
    code = main(
        [
            "rodeo-local",
            "--data",
            str(data),
            "--point",
            "center",
            "--beta",
            "0.8",
            "--sigma",
            "known:0.5",
            "--out-result",
            str(out),
            "--out-trace",
            str(trace),
        ]
    )
    assert code == 0
    rows = read_rows(trace)
    assert rows[0] == ["t", "j", "Z", "s", "lambda", "h_before", "h_after",
                       "active_after"]
    body = rows[1:]
    # strictly ordered by (t, j)
    keys = [(int(r[0]), int(r[1])) for r in body]
    assert keys == sorted(keys)
    # replay: last h_after per variable reproduces h_star bit for bit
    final = {}
    for r in body:
        final[int(r[1])] = float(r[6])
    result = json.loads(out.read_text())
    for j, h in enumerate(result["h_star"], start=1):
        assert final[j] == h


def test_cli_runs_are_deterministic(tmp_path):
    data = write_quad(tmp_path)
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / f"res_{tag}.json"
        trace = tmp_path / f"trace_{tag}.csv"
        code = main(
            [
                "experiment",
                "--name",
                "quad2",
                "--n",
                "80",
                "--d",
                "3",
                "--replicates",
                "5",
                "--seed",
                "7",
                "--sigma",
                "known:0.5",
                "--out-result",
                str(out),
                "--out-trace",
                str(trace),
            ]
        )
        assert code == 0
        outs.append((out.read_bytes(), trace.read_bytes()))
    assert outs[0] == outs[1]


def test_global_and_greedy_commands(tmp_path):
    data = write_quad(tmp_path)
    out = tmp_path / "global.json"
    trace = tmp_path / "global_trace.csv"
    code = main(
        [
            "rodeo-global",
            "--data",
            str(data),
            "--k",
            "6",
            "--beta",
            "0.8",
            "--sigma",
            "known:0.5",
            "--seed",
            "3",
            "--out-result",
            str(out),
            "--out-trace",
            str(trace),
        ]
    )
    assert code == 0
    result = json.loads(out.read_text())
    assert len(result["estimates"]) == 6
    assert len(result["h_star"]) == 5
    rows = read_rows(trace)
    assert rows[0][2] == "T"

    out2 = tmp_path / "greedy.json"
    code = main(
        [
            "rodeo-greedy",
            "--data",
            str(data),
            "--k",
            "5",
            "--steps",
            "4",
            "--sigma",
            "known:0.5",
            "--seed",
            "3",
            "--out-result",
            str(out2),
        ]
    )
    assert code == 0
    greedy = json.loads(out2.read_text())
    assert len(greedy["winners"]) == 4
    assert greedy["selection_order"]


def test_soft_command_reports_correction(tmp_path):
    data = write_quad(tmp_path)
    out = tmp_path / "soft.json"
    code = main(
        [
            "rodeo-soft",
            "--data",
            str(data),
            "--point",
            "center",
            "--beta",
            "0.9",
            "--sigma",
            "known:0.5",
            "--out-result",
            str(out),
        ]
    )
    assert code == 0
    assert "soft_correction" in json.loads(out.read_text())


def test_config_file_merging_and_unknown_key(tmp_path):
    data = write_quad(tmp_path)
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"beta": 0.8, "sigma": "known:0.5", "point": "center"}))
    out = tmp_path / "res.json"
    assert (
        main(
            [
                "rodeo-local",
                "--data",
                str(data),
                "--config",
                str(good),
                "--out-result",
                str(out),
            ]
        )
        == 0
    )
    assert json.loads(out.read_text())["config"]["beta"] == 0.8

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"beta": 0.8, "bandwidth": 1.0}))
    assert main(["rodeo-local", "--data", str(data), "--config", str(bad)]) == 2


def test_cli_flag_overrides_config_file(tmp_path):
    data = write_quad(tmp_path)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"beta": 0.5, "sigma": "known:0.5", "point": "center"}))
    out = tmp_path / "res.json"
    code = main(
        [
            "rodeo-local",
            "--data",
            str(data),
            "--config",
            str(cfg),
            "--beta",
            "0.9",
            "--out-result",
            str(out),
        ]
    )
    assert code == 0
    assert json.loads(out.read_text())["config"]["beta"] == 0.9


def test_exit_codes():
    # bad flag vocabulary -> 2 (argparse)
    assert main(["rodeo-local", "--nonsense"]) == 2
    assert main(["unknown-command"]) == 2


def test_config_error_exit_code(tmp_path):
    data = write_quad(tmp_path)
    assert main(["rodeo-local", "--data", str(data), "--beta", "1.5"]) == 2
    assert main(["rodeo-local", "--data", str(data), "--point", "0.5"]) == 2
    assert main(["rodeo-local", "--data", str(data), "--sigma", "boot"]) == 2


def test_runtime_error_exit_code(tmp_path):
    missing = tmp_path / "nope.csv"
    assert main(["rodeo-local", "--data", str(missing), "--point", "center"]) == 3
    malformed = tmp_path / "bad.csv"
    malformed.write_text("x1,x3,y\n0,0,0\n1,1,1\n")
    assert main(["rodeo-local", "--data", str(malformed), "--point", "center"]) == 3


def test_experiment_requires_name(tmp_path):
    assert main(["experiment", "--replicates", "2"]) == 2


def test_worker_pool_env_does_not_change_outputs(tmp_path, monkeypatch):
    args = [
        "experiment",
        "--name",
        "quad2",
        "--n",
        "80",
        "--d",
        "3",
        "--replicates",
        "6",
        "--seed",
        "7",
        "--sigma",
        "known:0.5",
    ]
    serial = tmp_path / "serial.json"
    assert main(args + ["--out-result", str(serial)]) == 0
    monkeypatch.setenv("RODEO_THREADS", "3")
    pooled = tmp_path / "pooled.json"
    assert main(args + ["--out-result", str(pooled)]) == 0
    assert serial.read_bytes() == pooled.read_bytes()


def test_scaling_check_command(tmp_path):
    out = tmp_path / "scaling.json"
    code = main(
        [
            "scaling-check",
            "--name",
            "quad1",
            "--ns",
            "100,200,400",
            "--replicates",
            "2",
            "--sigma",
            "known:0.5",
            "--beta",
            "0.9",
            "--seed",
            "5",
            "--out-result",
            str(out),
        ]
    )
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["ns"] == [100, 200, 400]
    assert payload["slope"] < 0
