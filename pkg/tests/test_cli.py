import json
import os

import numpy as np
import pytest

from anyonlab.cli import main
from anyonlab.config import from_dict, parse_config
from anyonlab.errors import ConfigError
from anyonlab.store import ArtifactStore, load_field_file


def write_config(tmp_path, cfg, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


BASE_EVOLVE = {
    "experiment": "evolve",
    "grid": {"n": 32, "L": 12.8},
    "params": {"beta": 0.0, "R": 0.0, "dt": 0.01, "T": 0.05,
               "sample_every": 1},
    "initial": {"kind": "gaussian", "sigma": 1.0},
}


class TestConfig:
    def test_power_of_two_enforced(self):
        cfg = dict(BASE_EVOLVE, grid={"n": 100, "L": 12.8})
        with pytest.raises(ConfigError, match="grid.n"):
            from_dict(cfg)

    def test_minimal_config_normalized(self):
        cfg = from_dict({"experiment": "evolve",
                         "grid": {"n": 32, "L": 8.0}})
        norm = cfg.normalized()
        assert norm["params"]["dt"] > 0
        assert norm["params"]["sample_every"] == 10
        assert norm["initial"]["kind"] == "gaussian"
        assert norm["N"] == 2 and norm["seed"] == 0

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            parse_config("/nonexistent/config.json")

    def test_sweep_requires_radii(self):
        with pytest.raises(ConfigError, match="radii"):
            from_dict({"experiment": "sweep-R", "grid": {"n": 32, "L": 8.0}})

    def test_radii_must_decrease(self):
        with pytest.raises(ConfigError, match="decreasing"):
            from_dict({"experiment": "sweep-R", "grid": {"n": 32, "L": 8.0},
                       "radii": [0.1, 0.4]})

    def test_verify_large_R_warns(self):
        with pytest.warns(UserWarning, match="e\\^-1"):
            from_dict({"experiment": "verify", "grid": {"n": 32, "L": 8.0},
                       "params": {"R": 0.5}})


class TestStore:
    def test_field_round_trip_bit_exact(self, tmp_path, rng):
        store = ArtifactStore(str(tmp_path / "run"))
        store.write_config({"a": 1})
        vals = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        store.save_field("state", vals)
        back = store.load_field("state")
        assert back.dtype == np.complex128
        assert np.array_equal(
            back.view(np.uint8), vals.astype("<c16").view(np.uint8))
        also = load_field_file(str(tmp_path / "run" / "state.bin"))
        assert np.array_equal(also, vals)

    def test_sidecar_carries_hash(self, tmp_path):
        store = ArtifactStore(str(tmp_path / "run"))
        h = store.write_config({"x": 2})
        store.save_field("f", np.zeros((4, 4), complex))
        side = json.loads((tmp_path / "run" / "f.json").read_text())
        assert side["config_hash"] == h


class TestCliRuns:
    def test_evolve_free_flow_energy_constant(self, tmp_path):
        cfg_path = write_config(tmp_path, BASE_EVOLVE)
        out = str(tmp_path / "out")
        assert main(["evolve", "--config", cfg_path, "--out", out,
                     "--quiet"]) == 0
        lines = [l for l in (tmp_path / "out" / "diagnostics.csv")
                 .read_text().splitlines() if not l.startswith("#")]
        header = lines[0].split(",")
        i = header.index("E_total")
        vals = [float(l.split(",")[i]) for l in lines[1:]]
        assert max(abs(v - vals[0]) for v in vals) < 1e-12 * abs(vals[0])
        for name in ("config.json", "meta.json", "field_initial.bin",
                     "field_final.bin"):
            assert (tmp_path / "out" / name).exists()
        meta = json.loads((tmp_path / "out" / "meta.json").read_text())
        assert meta["config_hash"]

    def test_snapshot_round_trip(self, tmp_path):
        cfg_path = write_config(tmp_path, BASE_EVOLVE)
        out = str(tmp_path / "out")
        main(["evolve", "--config", cfg_path, "--out", out, "--quiet"])
        u0 = load_field_file(str(tmp_path / "out" / "field_initial.bin"))
        # feeding the snapshot back as an initial condition is exact
        cfg2 = dict(BASE_EVOLVE,
                    initial={"kind": "file",
                             "path": str(tmp_path / "out" / "field_initial.bin")},
                    params=dict(BASE_EVOLVE["params"], T=0.0))
        cfg2_path = write_config(tmp_path, cfg2, "cfg2.json")
        out2 = str(tmp_path / "out2")
        assert main(["evolve", "--config", cfg2_path, "--out", out2,
                     "--quiet"]) == 0
        u0b = load_field_file(str(tmp_path / "out2" / "field_initial.bin"))
        assert np.array_equal(u0, u0b)

    def test_sweep_cli(self, tmp_path):
        cfg = {
            "experiment": "sweep-R",
            "grid": {"n": 32, "L": 9.6},
            "params": {"beta": 0.2, "dt": 0.02, "T": 0.06, "sample_every": 3},
            "initial": {"kind": "gaussian", "sigma": 0.8},
            "radii": [0.4, 0.2, 0.0],
        }
        cfg_path = write_config(tmp_path, cfg)
        out = str(tmp_path / "sweep")
        assert main(["sweep-R", "--config", cfg_path, "--out", out,
                     "--quiet"]) == 0
        rows = [l for l in (tmp_path / "sweep" / "sweep.csv")
                .read_text().splitlines() if not l.startswith("#")]
        assert rows[0] == "R,sup_error"
        assert len(rows) == 4
        result = json.loads((tmp_path / "sweep" / "result.json").read_text())
        assert "slope" in result

    def test_exit_code_config_error(self, tmp_path, capsys):
        cfg = dict(BASE_EVOLVE, grid={"n": 100, "L": 12.8})
        cfg_path = write_config(tmp_path, cfg)
        assert main(["evolve", "--config", cfg_path, "--quiet",
                     "--out", str(tmp_path / "x")]) == 2
        assert "grid.n" in capsys.readouterr().err

    def test_exit_code_boundary_violation(self, tmp_path):
        cfg = dict(BASE_EVOLVE, initial={"kind": "gaussian", "sigma": 8.0})
        cfg_path = write_config(tmp_path, cfg)
        assert main(["evolve", "--config", cfg_path, "--quiet",
                     "--out", str(tmp_path / "x")]) == 4

    def test_exit_code_budget(self, tmp_path):
        cfg = {
            "experiment": "manybody",
            "grid": {"n": 16, "L": 8.0},
            "params": {"beta": 0.1, "R": 0.25, "dt": 0.01, "T": 0.02,
                       "sample_every": 1},
            "initial": {"kind": "gaussian", "sigma": 0.65},
            "N": 2,
            "budget": 100,
        }
        cfg_path = write_config(tmp_path, cfg)
        assert main(["manybody", "--config", cfg_path, "--quiet",
                     "--out", str(tmp_path / "x")]) == 5

    def test_determinism_byte_identical(self, tmp_path):
        cfg = dict(BASE_EVOLVE,
                   params={"beta": 0.2, "R": 0.2, "dt": 0.01, "T": 0.05,
                           "sample_every": 1})
        cfg_path = write_config(tmp_path, cfg)
        outs = []
        for name in ("a", "b"):
            out = str(tmp_path / name)
            assert main(["evolve", "--config", cfg_path, "--out", out,
                         "--quiet"]) == 0
            outs.append((tmp_path / name / "diagnostics.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_env_override(self, tmp_path, monkeypatch):
        cfg_path = write_config(tmp_path, BASE_EVOLVE)
        env_out = str(tmp_path / "env_out")
        monkeypatch.setenv("ANYONLAB_OUT", env_out)
        assert main(["evolve", "--config", cfg_path, "--quiet"]) == 0
        assert os.path.exists(os.path.join(env_out, "diagnostics.csv"))
        # flag wins over environment
        flag_out = str(tmp_path / "flag_out")
        assert main(["evolve", "--config", cfg_path, "--out", flag_out,
                     "--quiet"]) == 0
        assert os.path.exists(os.path.join(flag_out, "diagnostics.csv"))

    def test_verify_cli(self, tmp_path):
        cfg = {
            "experiment": "verify",
            "grid": {"n": 32, "L": 6.0},
            "radii": [0.3, 0.1],
            "samples": 10,
            "seed": 1,
            "pair_n": 8,
            "triple_n": 4,
            "checks": ["two_body", "three_body", "appendix_a"],
            "params": {"beta": 0.2},
        }
        cfg_path = write_config(tmp_path, cfg)
        out = str(tmp_path / "verify")
        assert main(["verify", "--config", cfg_path, "--out", out,
                     "--quiet"]) == 0
        reports = json.loads((tmp_path / "verify" / "verify_reports.json")
                             .read_text())
        assert all(r["passed"] for r in reports)
        assert {r["inequality_id"] for r in reports} == {
            "two_body_forms", "three_body_positivity", "appendix_a"}

    def test_hierarchy_cli(self, tmp_path):
        cfg = {
            "experiment": "hierarchy-check",
            "grid": {"n": 64, "L": 12.8},
            "params": {"beta": 0.2, "R": 0.1},
            "initial": {"kind": "gaussian", "sigma": 1.0},
        }
        cfg_path = write_config(tmp_path, cfg)
        out = str(tmp_path / "hier")
        assert main(["hierarchy-check", "--config", cfg_path, "--out", out,
                     "--quiet"]) == 0
        result = json.loads((tmp_path / "hier" / "hierarchy.json").read_text())
        assert result["residual"] < 1e-8
        assert result["perturbed_residual"] > 1e-3
