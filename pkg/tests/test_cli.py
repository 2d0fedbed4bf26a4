import csv
import io
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from rispos.cli import main
from rispos.config import OUTPUT_DIR_ENV, ExperimentConfig, config_from_dict, load_config, resolve_output
from rispos.exceptions import ConfigError
from rispos.experiments import (
    bootstrap_ci,
    csv_columns,
    run_crb_table,
    run_experiment,
    trial_rng,
)

SMALL = {"n_bs": 36, "n_ue": 36, "n_ris": 64, "n_subcarriers": 32}
CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestConfig:
    def test_empty_file_is_default(self, tmp_path):
        p = tmp_path / "empty.yaml"
        p.write_text("")
        cfg = load_config(p)
        assert cfg == ExperimentConfig()
        assert cfg.scenario.n_bs == 100 and cfg.scenario.n_reflections == 1

    def test_unsigned_exponent_strings(self):
        cfg = config_from_dict(yaml.safe_load("scenario: {bandwidth_hz: 1.0e8, n_bs: '64'}"))
        assert cfg.scenario.bandwidth_hz == 1e8 and cfg.scenario.n_bs == 64
        with pytest.raises(ConfigError):
            config_from_dict({"scenario": {"bandwidth_hz": "wide"}})

    def test_sweep_alias(self):
        cfg = config_from_dict({"sweep": {"variable": "L_d", "values": [3, 4]}})
        assert cfg.scenario_at(3).pathloss_direct == 3.0

    @pytest.mark.parametrize("data", [
        {"trials": 0},
        {"sweep": {"values": []}},
        {"methods": []},
        {"methods": ["magic"]},
        {"sweep": {"variable": "bandwidth"}},
        {"scenario": {"n_antennas": 4}},
        {"unknown": 1},
        {"kind": "multi_bs_ue", "methods": ["proposed"]},
    ])
    def test_invalid(self, data):
        with pytest.raises(ConfigError):
            config_from_dict(data)

    def test_malformed_yaml(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("trials: [1,\n")
        with pytest.raises(ConfigError):
            load_config(p)

    @pytest.mark.parametrize("name", ["snr_sweep.yaml", "pathloss_sweep.yaml", "multi_bs_ue.yaml"])
    def test_shipped_configs_load(self, name):
        cfg = load_config(CONFIG_DIR / name)
        assert cfg.trials >= 100 and cfg.output_path.endswith(".csv")

    def test_output_dir_env(self, monkeypatch, tmp_path):
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
        assert resolve_output("a.csv") == tmp_path / "a.csv"
        assert resolve_output("/abs/a.csv").is_absolute()
        monkeypatch.delenv(OUTPUT_DIR_ENV)
        assert str(resolve_output("a.csv")) == "a.csv"


class TestExperiments:
    def test_trial_streams_independent_and_stable(self):
        a = trial_rng(7, 0, 3).random(4)
        np.testing.assert_array_equal(a, trial_rng(7, 0, 3).random(4))
        assert not np.array_equal(a, trial_rng(7, 1, 3).random(4))
        assert not np.array_equal(a, trial_rng(7, 0, 4).random(4))

    def test_noiseless_round_trip(self):
        cfg = config_from_dict({"sweep": {"values": [110]}, "trials": 2, "noiseless": True,
                                "methods": ["proposed"]})
        res = run_experiment(cfg, write=False)
        assert res.row(110.0, "proposed")["rmse_position_m"] < 1e-3

    def test_columns_and_bytes(self):
        cfg = config_from_dict({"scenario": SMALL, "sweep": {"values": [100, 110]}, "trials": 3, "seed": 1,
                                "methods": ["proposed", "direct_only"]})
        a = run_experiment(cfg, write=False)
        text = a.to_csv()
        assert text.splitlines()[0].split(",") == csv_columns(1)
        assert "\r" not in text and text.endswith("\n")
        assert len(_rows(text)) == 4
        assert text == run_experiment(cfg, write=False).to_csv()
        for r in a.rows:
            assert r["rmse_position_m"] >= 0 and r["crb_rmse_m"] >= 0
            assert r["trials_used"] + r["failures"] == 3

    def test_raw_slot_mode(self):
        # 64 slots instead of 6e5 costs ~40 dB of processing gain, so the sweep point is raised to match
        cfg = config_from_dict({"scenario": {**SMALL, "t_slots": 64}, "sweep": {"values": [150]}, "trials": 2,
                                "raw_slots": 64})
        r = run_experiment(cfg, write=False).row(150.0, "proposed")
        assert r["trials_used"] == 2 and np.isfinite(r["rmse_position_m"])

    def test_crb_table(self):
        cfg = config_from_dict({"sweep": {"values": [95, 105, 115]}})
        rows = run_crb_table(cfg, write=False).rows
        assert len(rows) == 3
        crb = np.array([r["crb_rmse_m"] for r in rows])
        for r in rows:
            assert r["crb_rmse_m"] <= r["crb_rmse_direct_only_m"]
            assert r["bound_direct_m"] <= r["tight_direct_m"] * (1 + 1e-9)
        assert np.all(np.diff(crb) < 0)
        # the bound scales with the effective noise, which keeps a Rician scatter floor
        s2 = np.array([cfg.scenario_at(v).sigma2_eff for v in (95, 105, 115)])
        np.testing.assert_allclose((crb[:-1] / crb[1:]) ** 2, s2[:-1] / s2[1:], rtol=1e-9)

    def test_bootstrap(self):
        sq = np.random.default_rng(0).exponential(1.0, 400)
        lo, hi = bootstrap_ci(sq)
        assert lo < np.sqrt(sq.mean()) < hi
        assert bootstrap_ci(sq) == (lo, hi)


class TestCli:
    def test_run_and_crb(self, tmp_path):
        cfg = _write(tmp_path, {"scenario": SMALL, "sweep": {"values": [110]}, "methods": ["proposed"]})
        out = tmp_path / "r.csv"
        assert main(["run", "--config", str(cfg), "--seed", "3", "--trials", "2", "--output", str(out)]) == 0
        rows = _rows(out.read_text())
        assert rows[0]["trials_used"] == "2"
        crb = tmp_path / "c.csv"
        assert main(["crb", "--config", str(cfg), "--output", str(crb)]) == 0
        assert len(_rows(crb.read_text())) == 1

    def test_output_from_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "outdir"))
        cfg = _write(tmp_path, {"scenario": SMALL, "sweep": {"values": [110]}, "output": "x.csv"})
        assert main(["crb", "--config", str(cfg)]) == 0
        assert (tmp_path / "outdir" / "x.csv").exists()

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = _write(tmp_path, {"trials": -1})
        assert main(["run", "--config", str(cfg), "--output", str(tmp_path / "o.csv")]) == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_output(self, tmp_path, capsys):
        cfg = _write(tmp_path, {})
        assert main(["crb", "--config", str(cfg)]) == 2
        assert "output" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["crb", "--config", str(tmp_path / "nope.yaml"), "--output", "o.csv"]) == 2

    def test_bad_seed_rejected(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["run", "--config", "x", "--seed", "-1"])

    def test_console_entry(self, tmp_path):
        cfg = _write(tmp_path, {"scenario": SMALL, "sweep": {"values": [100]}})
        out = tmp_path / "m.csv"
        proc = subprocess.run([sys.executable, "-m", "rispos.cli", "crb", "--config", str(cfg), "--output",
                               str(out)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert out.read_text().startswith("sweep_value,")
