"""Config validation, the experiment runner, and the selftest surface."""

import hashlib
import io
import json

import pytest

from ftnlim.cli import (
    ConfigError,
    _config_digest,
    _point_seed,
    main,
    run_experiment,
    selftest,
    validate_config,
)

CUSTOM = {
    "experiment": "custom",
    "omega_grid": [40.0],
    "rho_db_grid": [10.0],
    "tau": 0.6,
    "methods": ["na"],
}


class TestValidateConfig:
    def test_unknown_experiment(self):
        with pytest.raises(ConfigError, match="must be one of"):
            validate_config({"experiment": "fig99"})

    def test_unknown_field_lists_accepted(self):
        cfg = dict(CUSTOM, typo_field=1)
        with pytest.raises(ConfigError, match="unknown field.*typo_field.*accepts"):
            validate_config(cfg)

    def test_required_field_missing(self):
        with pytest.raises(ConfigError, match="rho_db_grid.*required"):
            validate_config({"experiment": "custom", "omega_grid": [40.0]})

    def test_defaults_filled(self):
        cfg = validate_config(dict(CUSTOM))
        assert cfg["seed"] == 0
        assert cfg["workers"] == 1
        assert cfg["pe"] == 1e-3
        assert cfg["rcu_samples"] == 100_000

    def test_type_errors(self):
        with pytest.raises(ConfigError, match="omega_grid"):
            validate_config(dict(CUSTOM, omega_grid="40"))
        with pytest.raises(ConfigError, match="workers"):
            validate_config(dict(CUSTOM, workers=0))

    def test_custom_grid_checks(self):
        with pytest.raises(ConfigError, match="tau"):
            validate_config(dict(CUSTOM, tau=0.0))
        with pytest.raises(ConfigError, match="methods"):
            validate_config(dict(CUSTOM, methods=["na", "psd"]))

    def test_root_must_be_object(self):
        with pytest.raises(ConfigError, match="object"):
            validate_config([1, 2])


def test_point_seeds_are_stable_and_distinct():
    a = [_point_seed(123, i) for i in range(6)]
    b = [_point_seed(123, i) for i in range(6)]
    assert a == b
    assert len(set(a)) == 6
    assert _point_seed(124, 0) != a[0]


class TestRunExperiment:
    def test_reruns_are_byte_identical(self, tmp_path):
        outs = []
        for sub in ("a", "b"):
            cfg = validate_config(dict(CUSTOM, out_dir=str(tmp_path / sub)))
            assert run_experiment(cfg) == 0
            outs.append((tmp_path / sub / "custom.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_manifest_contents(self, tmp_path):
        cfg = validate_config(dict(CUSTOM, out_dir=str(tmp_path)))
        assert run_experiment(cfg) == 0
        manifest = json.loads((tmp_path / "custom_manifest.json").read_text())
        csv_bytes = (tmp_path / "custom.csv").read_bytes()
        assert manifest["status"] == "ok"
        assert manifest["csv_sha256"] == hashlib.sha256(csv_bytes).hexdigest()
        assert manifest["points_done"] == 1
        assert manifest["versions"]["ftnlim"]
        assert not (tmp_path / "custom_checkpoint.json").exists()

    def test_resume_skips_completed_points(self, tmp_path):
        raw = dict(CUSTOM, omega_grid=[40.0, 44.0], out_dir=str(tmp_path))
        cfg = validate_config(raw)
        fake = [{"omega": 40.0, "rho_db": 10.0, "tau": 0.6,
                 "method": "na", "value": 123.456}]
        ckpt = {"digest": _config_digest(cfg), "completed": {"0": fake}}
        (tmp_path / "custom_checkpoint.json").write_text(json.dumps(ckpt))
        assert run_experiment(cfg, resume=True) == 0
        text = (tmp_path / "custom.csv").read_text()
        assert "123.456" in text        # planted row was trusted
        assert "44" in text             # missing point was computed

    def test_resume_rejects_stale_checkpoint(self, tmp_path):
        cfg = validate_config(dict(CUSTOM, out_dir=str(tmp_path)))
        ckpt = {"digest": "0" * 16, "completed": {"0": [{
            "omega": 40.0, "rho_db": 10.0, "tau": 0.6,
            "method": "na", "value": 123.456}]}}
        (tmp_path / "custom_checkpoint.json").write_text(json.dumps(ckpt))
        assert run_experiment(cfg, resume=True) == 0
        assert "123.456" not in (tmp_path / "custom.csv").read_text()

    def test_runtime_failure_writes_failed_manifest(self, tmp_path):
        # a window smaller than the pulse support fails inside the point
        cfg = validate_config(dict(CUSTOM, omega_grid=[6.0],
                                   out_dir=str(tmp_path)))
        assert run_experiment(cfg) == 2
        manifest = json.loads((tmp_path / "custom_manifest.json").read_text())
        assert manifest["status"] == "FAILED"
        assert manifest["error"]
        assert (tmp_path / "custom_checkpoint.json").exists()


class TestMain:
    def write(self, tmp_path, payload):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(payload))
        return str(path)

    def test_run_roundtrip(self, tmp_path):
        path = self.write(tmp_path, dict(CUSTOM, out_dir=str(tmp_path)))
        assert main(["run", path]) == 0
        assert (tmp_path / "custom.csv").exists()

    def test_config_error_pathways(self, tmp_path, capsys):
        missing = str(tmp_path / "nope.json")
        assert main(["run", missing]) == 1

        bad_json = tmp_path / "bad.json"
        bad_json.write_text("{not json")
        assert main(["run", str(bad_json)]) == 1
        assert "line 1" in capsys.readouterr().err

        path = self.write(tmp_path, dict(CUSTOM, tau=0.0,
                                         out_dir=str(tmp_path / "o")))
        assert main(["run", path]) == 1
        assert not (tmp_path / "o" / "custom.csv").exists()

    def test_cli_overrides_reach_the_manifest(self, tmp_path):
        path = self.write(tmp_path, dict(CUSTOM))
        out = tmp_path / "ovr"
        assert main(["run", path, "--seed", "55", "--out-dir", str(out)]) == 0
        manifest = json.loads((out / "custom_manifest.json").read_text())
        assert manifest["seed"] == 55

    def test_list_experiments(self, capsys):
        assert main(["list-experiments"]) == 0
        text = capsys.readouterr().out
        for name in ("fig2", "fig7-bler", "custom", "table1-opt"):
            assert name in text

    def test_selftest_exit_codes(self):
        assert main(["selftest"]) == 0
        assert main(["selftest", "--inject-fault", "eigenvalue"]) == 3


class TestSelftest:
    def test_all_checks_pass(self):
        buf = io.StringIO()
        assert selftest(stream=buf) == 0
        out = buf.getvalue()
        assert "12/12 checks passed" in out
        assert "FAIL" not in out

    def test_injected_fault_is_caught(self):
        buf = io.StringIO()
        assert selftest(inject_fault="eigenvalue", stream=buf) == 1
        out = buf.getvalue()
        assert "FAIL gram-trace-identity" in out
        assert "11/12 checks passed" in out
