"""End-to-end tests of the command-line interface.

Small single-point grids keep these fast; determinism is checked by byte
comparison of rerun outputs, and the simulated cascade taps are checked
against the additivity of the evaluation signal.
"""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

CLI = [sys.executable, "-m", "retrofit_control.cli"]


def _write_cfg(path, **overrides):
    cfg = {
        "schema": 1,
        "kc_grid": [3],
        "napx_grid": [0],
        "alpha_grid": [0.2],
        "simulate": {"t_final": 5.0, "dt": 0.02},
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return path


def _run(*args, check=True):
    proc = subprocess.run(
        CLI + list(args), capture_output=True, text=True
    )
    if check and proc.returncode != 0:
        raise AssertionError(
            f"cli failed ({proc.returncode}):\n{proc.stdout}\n{proc.stderr}"
        )
    return proc


@pytest.fixture(scope="module")
def single_point(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    cfg = _write_cfg(base / "cfg.json")
    out = base / "sweep"
    _run("sweep", "--config", str(cfg), "--out", str(out))
    return cfg, out


class TestSweep:
    def test_outputs_exist(self, single_point):
        _, out = single_point
        assert (out / "errors.csv").exists()
        assert (out / "performance.csv").exists()
        assert (out / "sweep_metadata.json").exists()

    def test_row_contents(self, single_point):
        _, out = single_point
        rows = list(csv.DictReader(open(out / "performance.csv")))
        assert len(rows) == 1
        r = rows[0]
        assert r["stable_retrofit"] == "true"
        ga = float(r["gamma_actual"])
        gh = float(r["gamma_hat"])
        gc = float(r["gamma_check"])
        assert abs(gc - gh) - 1e-9 <= ga <= gh + gc + 1e-9
        assert float(r["invariance_residual"]) < 1e-8

    def test_rerun_byte_identical(self, single_point, tmp_path):
        cfg, out = single_point
        out2 = tmp_path / "sweep2"
        _run("sweep", "--config", str(cfg), "--out", str(out2))
        for name in ("errors.csv", "performance.csv"):
            assert (out / name).read_bytes() == (out2 / name).read_bytes()

    def test_bad_schema_rejected(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"schema": 99}))
        proc = _run(
            "sweep", "--config", str(cfg), "--out", str(tmp_path / "o"),
            check=False,
        )
        assert proc.returncode != 0

    def test_empty_grid_rejected(self, tmp_path):
        cfg = _write_cfg(tmp_path / "cfg.json", kc_grid=[])
        proc = _run(
            "sweep", "--config", str(cfg), "--out", str(tmp_path / "o"),
            check=False,
        )
        assert proc.returncode != 0


class TestSimulate:
    def test_retrofit_tap_additivity(self, single_point, tmp_path):
        cfg, _ = single_point
        out = tmp_path / "sim"
        _run(
            "simulate", "--config", str(cfg), "--kc", "3", "--napx", "0",
            "--alpha", "0.2", "--mode", "retrofit", "--out", str(out),
        )
        rows = list(csv.DictReader(open(out / "timeseries.csv")))
        assert rows
        z_cols = [c for c in rows[0] if c.startswith("z_")]
        assert z_cols
        for r in rows:
            for c in z_cols:
                idx = c.split("_", 1)[1]
                total = float(r[f"zhat_{idx}"]) + float(r[f"zcheck_{idx}"])
                assert abs(float(r[c]) - total) < 1e-9

        meta = json.loads((out / "simulate_metadata.json").read_text())
        assert meta["stable"] is True

    def test_none_mode_is_open_loop(self, single_point, tmp_path):
        # Without control and without modeling error the downstream tap
        # vanishes, so z equals the upstream component alone.
        cfg, _ = single_point
        out = tmp_path / "sim_none"
        _run(
            "simulate", "--config", str(cfg), "--kc", "3", "--napx", "0",
            "--alpha", "0.2", "--mode", "none", "--out", str(out),
        )
        rows = list(csv.DictReader(open(out / "timeseries.csv")))
        assert rows
        # Impulse response decays for the damped stable network.
        z0_early = abs(float(rows[5]["z_1"]))
        tail = max(abs(float(r["z_1"])) for r in rows[-20:])
        assert np.isfinite(z0_early) and np.isfinite(tail)

    def test_direct_mode_outputs(self, single_point, tmp_path):
        cfg, _ = single_point
        out = tmp_path / "sim_direct"
        _run(
            "simulate", "--config", str(cfg), "--kc", "3", "--napx", "0",
            "--alpha", "0.2", "--mode", "direct", "--out", str(out),
        )
        rows = list(csv.DictReader(open(out / "timeseries.csv")))
        assert rows
        assert any(c.startswith("z_") for c in rows[0])
        assert not any(c.startswith("zhat_") for c in rows[0])


class TestVerify:
    def test_passes_and_prints_lines(self, tmp_path):
        proc = _run(
            "verify", "--fuzz-count", "5", "--seed", "0",
            "--out", str(tmp_path),
        )
        lines = [l for l in proc.stdout.splitlines() if l.startswith("PASS")]
        assert len(lines) >= 4
        assert not (tmp_path / "verify_failures.json").exists()

    def test_sabotage_fails(self, tmp_path):
        proc = _run(
            "verify", "--fuzz-count", "5", "--seed", "0",
            "--out", str(tmp_path), "--sabotage", "rectifier-sign-flip",
            check=False,
        )
        assert proc.returncode != 0
        assert any(
            l.startswith("FAIL") for l in proc.stdout.splitlines()
        )
        assert (tmp_path / "verify_failures.json").exists()
