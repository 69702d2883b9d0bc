import json

import numpy as np
import pytest

from heatlab.cli import load_config, main, validate_config
from heatlab.errors import ConfigError


def _write(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=1), encoding="utf-8")
    return path


MODEL_KERNEL_CFG = {
    "experiment": "model-kernel",
    "n": 1,
    "lambda": [0.0],
    "q": 0,
    "t_list": [2.0],
    "seed": 1,
    "output": "mk.csv",
}


def test_validate_ok(tmp_path, capsys):
    path = _write(tmp_path, "cfg.json", MODEL_KERNEL_CFG)
    assert main(["validate", str(path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("OK")
    assert '"experiment": "model-kernel"' in out


def test_duplicate_key_rejected(tmp_path, capsys):
    path = tmp_path / "dup.json"
    path.write_text('{"experiment": "model-kernel", "experiment": "trace"}', encoding="utf-8")
    assert main(["validate", str(path)]) == 2
    assert "experiment" in capsys.readouterr().err


def test_missing_field_names_it(tmp_path, capsys):
    cfg = dict(MODEL_KERNEL_CFG)
    del cfg["q"]
    path = _write(tmp_path, "noq.json", cfg)
    assert main(["run", str(path)]) == 2
    assert "'q'" in capsys.readouterr().err


def test_out_of_range_spacing_names_constraint(tmp_path, capsys):
    cfg = {
        "experiment": "trace",
        "n": 1,
        "lambda": [1.0],
        "q": 0,
        "t_list": [1.0],
        "grid": {"radius": 3.0, "spacing": -0.5},
        "seed": 1,
        "output": "t.csv",
    }
    path = _write(tmp_path, "badh.json", cfg)
    assert main(["validate", str(path)]) == 2
    assert "h > 0" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path):
    cfg = dict(MODEL_KERNEL_CFG)
    cfg["mystery"] = 1
    with pytest.raises(ConfigError, match="mystery"):
        validate_config(cfg)


def test_model_kernel_run_value(tmp_path):
    path = _write(tmp_path, "cfg.json", MODEL_KERNEL_CFG)
    out_dir = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out_dir)]) == 0
    lines = (out_dir / "mk.csv").read_text().splitlines()
    assert lines[0] == "t,q,row_J,col_J,re_value,im_value"
    assert len(lines) == 2
    value = float(lines[1].split(",")[4])
    np.testing.assert_allclose(value, 1.0 / (4 * np.pi), rtol=1e-15)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["seed"] == 1 and manifest["outputs"] == ["mk.csv"]


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = {
        "experiment": "trace",
        "n": 1,
        "lambda": [1.0],
        "q": 0,
        "t_list": [1.0],
        "grid": {"radius": 8.0, "spacing": 0.01},  # exceeds the site cap
        "seed": 1,
        "output": "t.csv",
    }
    path = _write(tmp_path, "huge.json", cfg)
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 3
    assert "cap" in capsys.readouterr().err


def _byte_identical_outputs(tmp_path, cfg, name):
    p = _write(tmp_path, name, cfg)
    d1, d2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["run", str(p), "--out", str(d1)]) == 0
    assert main(["run", str(p), "--out", str(d2)]) == 0
    f1 = (d1 / cfg["output"]).read_bytes()
    f2 = (d2 / cfg["output"]).read_bytes()
    return f1 == f2


def test_deterministic_model_kernel(tmp_path):
    assert _byte_identical_outputs(tmp_path, MODEL_KERNEL_CFG, "mk.json")


def test_deterministic_stochastic_trace(tmp_path):
    cfg = {
        "experiment": "trace",
        "n": 1,
        "lambda": [1.0],
        "q": 0,
        "t_list": [0.5, 1.0],
        "grid": {"radius": 3.0, "spacing": 0.5},
        "stochastic": True,
        "probes": 16,
        "seed": 77,
        "output": "trace.csv",
    }
    assert _byte_identical_outputs(tmp_path, cfg, "trace.json")


def test_converge_config_runs(tmp_path):
    cfg = {
        "experiment": "converge",
        "n": 1,
        "lambda": [1.0],
        "q": 0,
        "weight_perturbation": {"kind": "re_z3", "amplitude": 0.1},
        "metric_perturbation": {"kind": "linear_r11", "amplitude": 0.1},
        "k_list": [4, 16],
        "t_list": [1.0],
        "grid": {"radius": 3.0, "spacing": 0.5},
        "method": {"variant": "krylov"},
        "seed": 5,
        "output": "conv.csv",
    }
    path = _write(tmp_path, "conv.json", cfg)
    out_dir = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out_dir)]) == 0
    lines = (out_dir / "conv.csv").read_text().splitlines()
    assert lines[0].startswith("k,t,q,")
    errs = [float(line.split(",")[9]) for line in lines[1:]]
    assert errs[1] < errs[0]


def test_spectrum_and_morse_and_oracle_configs(tmp_path):
    spectrum = {
        "experiment": "spectrum",
        "tau_im": 1.0,
        "degree": 2,
        "k": 3,
        "q": 0,
        "cutoff": 4,
        "seed": 1,
        "output": "spec.csv",
    }
    path = _write(tmp_path, "spec.json", spectrum)
    assert main(["run", str(path), "--out", str(tmp_path / "s")]) == 0
    lines = (tmp_path / "s" / "spec.csv").read_text().splitlines()
    assert lines[1].split(",")[2] == "6"

    morse = {
        "experiment": "morse",
        "model": "elliptic",
        "tau_im": 1.0,
        "degree": 1,
        "k_list": [1, 2],
        "q_list": [0, 1],
        "t_list": [0.5],
        "seed": 1,
        "output": "morse.csv",
    }
    path = _write(tmp_path, "morse.json", morse)
    assert main(["run", str(path), "--out", str(tmp_path / "m")]) == 0
    rows = (tmp_path / "m" / "morse.csv").read_text().splitlines()
    assert rows[0] == "k,q,t,lhs,rhs,gap,holds"
    assert all(line.endswith("True") for line in rows[1:])

    oracle = {
        "experiment": "validate-oracle",
        "tau_im": 1.0,
        "degree": 1,
        "k_list": [1],
        "eigen_count": 4,
        "resolutions": [12, 24],
        "seed": 1,
        "output": "oracle.csv",
    }
    path = _write(tmp_path, "oracle.json", oracle)
    assert main(["run", str(path), "--out", str(tmp_path / "v")]) == 0
    rows = (tmp_path / "v" / "oracle.csv").read_text().splitlines()
    assert rows[0].startswith("k,level,expected")
    assert all(line.endswith("True") for line in rows[1:])


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("HEATLAB_THREADS", "notanumber")
    path = _write(tmp_path, "cfg.json", MODEL_KERNEL_CFG)
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 2
    monkeypatch.setenv("HEATLAB_THREADS", "1")
    assert main(["run", str(path), "--out", str(tmp_path / "o2")]) == 0


def test_shipped_configs_validate():
    from pathlib import Path

    config_dir = Path(__file__).resolve().parents[1] / "configs"
    paths = sorted(config_dir.glob("*.json"))
    assert paths, "no shipped configs found"
    for path in paths:
        validate_config(load_config(path))
