import json

import numpy as np
import pytest

from dephchain.cli import main
from dephchain.config import (
    EXPERIMENT_KINDS,
    ConfigError,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    default_config,
    load_config,
    save_config,
)
from dephchain.experiments import run


# ----------------------------------------------------------------------
# config schema
# ----------------------------------------------------------------------

@pytest.mark.parametrize("kind", EXPERIMENT_KINDS)
def test_default_configs_are_valid_and_round_trip(kind):
    config = default_config(kind)
    payload = config_to_dict(config)
    rebuilt = config_from_dict(payload)
    assert config_to_dict(rebuilt) == payload


def test_file_round_trip(tmp_path):
    config = default_config("fock-quench")
    path = tmp_path / "cfg.json"
    save_config(config, path)
    again = load_config(path)
    assert config_to_dict(again) == config_to_dict(config)


def test_unknown_fields_rejected():
    payload = config_to_dict(default_config("steady"))
    payload["bogus"] = 1
    with pytest.raises(ConfigError, match="bogus"):
        config_from_dict(payload)


def test_unknown_kind_rejected():
    payload = config_to_dict(default_config("steady"))
    payload["kind"] = "explode"
    with pytest.raises(ConfigError, match="kind"):
        config_from_dict(payload)


def test_lattice_validation_surfaces_field():
    payload = config_to_dict(default_config("steady"))
    payload["lattice"]["n_sites"] = 4
    with pytest.raises(ConfigError, match="lattice"):
        config_from_dict(payload)


def test_time_grid_must_increase():
    payload = config_to_dict(default_config("evolve"))
    payload["time_grid"] = {"points": [0.0, 2.0, 1.0]}
    with pytest.raises(ConfigError, match="time_grid"):
        config_from_dict(payload)


def test_missing_required_blocks():
    payload = config_to_dict(default_config("fock-quench"))
    del payload["quench"]
    with pytest.raises(ConfigError, match="quench"):
        config_from_dict(payload)
    payload = config_to_dict(default_config("robustness-aa"))
    del payload["scan"]
    with pytest.raises(ConfigError, match="scan"):
        config_from_dict(payload)


def test_initial_state_validation():
    with pytest.raises(ConfigError, match="initial_state"):
        config_from_dict({
            "kind": "steady",
            "lattice": {"n_sites": 3},
            "initial_state": {"type": "fock"},
        })


def test_overrides():
    payload = config_to_dict(default_config("steady"))
    out = apply_overrides(payload, ["lattice.n_sites=5",
                                    "initial_state.bitstring=00100",
                                    "convergence_tol=1e-8"])
    config = config_from_dict(out)
    assert config.lattice.n_sites == 5
    assert config.initial_state.bitstring == "00100"
    assert config.convergence_tol == 1e-8
    # original untouched
    assert payload["lattice"]["n_sites"] == 3


def test_override_requires_equals():
    with pytest.raises(ConfigError, match="key=value"):
        apply_overrides({}, ["oops"])


# ----------------------------------------------------------------------
# runner outputs
# ----------------------------------------------------------------------

def test_run_writes_outputs_and_summary(tmp_path):
    config = default_config("steady")
    result = run(config, out_dir=tmp_path)
    assert (tmp_path / "summary.json").exists()
    assert (tmp_path / "density_matrix.json").exists()
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["invariants_ok"] is True
    assert summary["rho_22"] == pytest.approx(0.5, abs=1e-7)
    payload = json.loads((tmp_path / "density_matrix.json").read_text())
    assert payload["dim"] == 3
    assert len(payload["data"]) == 9
    assert result.kind == "steady"


def test_evolve_with_t_zero_grid(tmp_path):
    config = default_config("evolve")
    payload = config_to_dict(config)
    payload["lattice"]["n_sites"] = 3
    payload["time_grid"] = {"points": [0.0]}
    payload["observables"] = ["occ:2", "corr:1,3"]
    payload["initial_state"] = {"type": "fock", "bitstring": "010"}
    result = run(config_from_dict(payload), out_dir=tmp_path)
    header, rows = result.tables["timeseries"]
    assert rows[0][header.index("occ:2_re")] == pytest.approx(1.0)
    assert rows[0][header.index("corr:1,3_re")] == pytest.approx(0.0)


def test_run_is_deterministic(tmp_path):
    payload = config_to_dict(default_config("evolve"))
    payload["lattice"]["n_sites"] = 5
    payload["time_grid"] = {"start": 0.0, "stop": 5.0, "num": 11}
    payload["observables"] = ["corr:1,5"]
    config = config_from_dict(payload)
    run(config, out_dir=tmp_path / "a")
    run(config, out_dir=tmp_path / "b")
    assert (tmp_path / "a" / "timeseries.csv").read_bytes() == \
        (tmp_path / "b" / "timeseries.csv").read_bytes()


def test_concurrence_scan_small(tmp_path):
    payload = config_to_dict(default_config("concurrence-scan"))
    payload["scan"] = {"sizes": [3, 5], "fillings": [1, 2]}
    result = run(config_from_dict(payload), out_dir=tmp_path)
    header, rows = result.tables["concurrence"]
    values = {(r[0], r[1], r[2]): r[3] for r in rows}
    assert values[(3, 1, 1)] == pytest.approx(0.5, abs=1e-8)
    assert values[(3, 2, 1)] == pytest.approx(1.0, abs=1e-8)
    assert values[(5, 2, 2)] == pytest.approx(2.0 / 3.0, abs=1e-8)
    assert result.summary["checks"]["monotone_in_filling"] is True


def test_correlation_map_matches_analytic(tmp_path):
    payload = config_to_dict(default_config("correlation-map"))
    payload["lattice"]["n_sites"] = 5
    result = run(config_from_dict(payload), out_dir=tmp_path)
    assert result.summary["checks"]["max_dev_from_analytic"] < 1e-7
    header, rows = result.tables["correlation_map"]
    assert len(rows) == 25


def test_unknown_observable_raises():
    payload = config_to_dict(default_config("evolve"))
    payload["observables"] = ["bananas"]
    with pytest.raises(ValueError, match="bananas"):
        run(config_from_dict(payload))


# ----------------------------------------------------------------------
# command line
# ----------------------------------------------------------------------

def test_cli_dump_config(capsys):
    code = main(["steady", "--dump-config"])
    assert code == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["kind"] == "steady"


def test_cli_steady_run(tmp_path, capsys):
    code = main(["steady", "--out", str(tmp_path)])
    assert code == 0
    assert "steady: ok" in capsys.readouterr().out
    assert (tmp_path / "summary.json").exists()


def test_cli_override_and_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    save_config(default_config("steady"), cfg)
    code = main(["steady", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--override", "lattice.dephasing_gamma=2.0"])
    assert code == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["config"]["lattice"]["dephasing_gamma"] == 2.0


def test_cli_kind_mismatch(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    save_config(default_config("steady"), cfg)
    code = main(["evolve", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "kind" in capsys.readouterr().err


def test_cli_bad_config_value(tmp_path, capsys):
    code = main(["steady", "--out", str(tmp_path),
                 "--override", "lattice.n_sites=4"])
    assert code == 2
    assert "lattice" in capsys.readouterr().err


def test_cli_nonconvergence_exit_code(tmp_path, capsys):
    # mixed-parity input has no steady state; keep t_max small via gamma
    code = main([
        "steady", "--out", str(tmp_path),
        "--override", 'initial_state.bitstring="100"',
        "--override", "lattice.dephasing_gamma=100.0",
    ])
    assert code == 3
    assert "steady state not reached" in capsys.readouterr().err
