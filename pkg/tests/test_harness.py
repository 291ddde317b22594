import json
import subprocess
import sys

import pytest

from qpnls.harness import (DEFAULT_CONFIG, EXIT_OK, EXIT_VALIDATION,
                           ConfigError, apply_override, canonical_json,
                           config_hash, load_config, main, run,
                           validate_config)


def light_config():
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    cfg["regions"] = {"r": 2, "N": 1}
    cfg["ldt"] = {"M": 1, "n_range": 1, "sigma_min": -1.0, "sigma_max": 1.0,
                  "sigma_points": 5}
    cfg["evolve"] = {"T": 1.0, "dt": 1e-2, "tail_radius": None}
    cfg["solver"]["N_cap"] = 8
    return cfg


class TestConfig:
    def test_default_validates(self):
        params = validate_config(json.loads(json.dumps(DEFAULT_CONFIG)))
        assert params.b == 1

    def test_override_parsing(self):
        cfg = load_config(None, ["solver.N_cap=4", "params.theta=[0.2]"])
        assert cfg["solver"]["N_cap"] == 4
        assert cfg["params"]["theta"] == [0.2]

    def test_bad_override_rejected(self):
        with pytest.raises(ConfigError):
            load_config(None, ["no-equals-sign"])

    def test_invalid_potential_rejected(self):
        with pytest.raises(ConfigError):
            load_config(None, ['params.V.terms=[{"l":[0],"v":1.0}]'])

    def test_hash_changes_with_fields(self):
        a = json.loads(json.dumps(DEFAULT_CONFIG))
        b = json.loads(json.dumps(DEFAULT_CONFIG))
        assert config_hash(a) == config_hash(b)
        apply_override(b, "params.epsilon", 2e-3)
        assert config_hash(a) != config_hash(b)

    def test_canonical_json_key_order_invariant(self):
        assert canonical_json({"b": 1, "a": 2}) == canonical_json(
            {"a": 2, "b": 1})


class TestStages:
    def test_regions_stage(self, tmp_path):
        manifest = run(light_config(), "regions", str(tmp_path))
        info = manifest["stages"]["regions"]
        assert info["status"] == "pass"
        data = json.loads((tmp_path / "regions.json").read_text())
        assert data["count"] == info["count"] == 5

    def test_solve_stage_decoupled_zero_steps(self, tmp_path):
        cfg = light_config()
        cfg["params"]["epsilon"] = 0.0
        cfg["params"]["delta"] = 0.0
        manifest = run(cfg, "solve", str(tmp_path))
        info = manifest["stages"]["solve"]
        assert info["status"] == "pass"
        assert info["newton_steps"] == 0

    def test_full_pipeline_and_replay(self, tmp_path):
        cfg = light_config()
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        m1 = run(cfg, "all", str(out1))
        m2 = run(cfg, "all", str(out2))
        assert m1["config_hash"] == m2["config_hash"]
        names = sorted(f.name for f in out1.iterdir())
        assert names == sorted(f.name for f in out2.iterdir())
        for name in names:
            if name == "manifest.json":
                continue  # carries wall times
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_unknown_command(self, tmp_path):
        with pytest.raises(ConfigError):
            run(light_config(), "bogus", str(tmp_path))


class TestCli:
    def test_validation_exit_code(self, tmp_path, capsys):
        code = main(["solve", "--set", "params.epsilon=2.0",
                     "--out", str(tmp_path)])
        assert code == EXIT_VALIDATION
        err = capsys.readouterr().err
        assert json.loads(err)["error"] == "validation"

    def test_solve_command(self, tmp_path, capsys):
        code = main(["solve", "--set", "solver.N_cap=8",
                     "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert (tmp_path / "solution.json").exists()
        assert (tmp_path / "manifest.json").exists()
        out = json.loads(capsys.readouterr().out)
        assert out["stages"]["solve"] == "pass"

    def test_config_file_round_trip(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"solver": {"N_cap": 8}}))
        code = main(["regions", "--config", str(cfg_path),
                     "--set", "regions.N=1", "--out", str(tmp_path / "o")])
        assert code == EXIT_OK

    def test_entry_point_installed(self):
        proc = subprocess.run([sys.executable, "-m", "qpnls.harness", "-h"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "qpnls" in proc.stdout
