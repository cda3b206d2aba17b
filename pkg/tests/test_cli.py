import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nodalflow.cli import RunConfig, ks_table, load_config, main, read_profile, save_config
from nodalflow.flow import FlowParams
from nodalflow.grid import RadialDomain
from nodalflow.seed import SeedParams
from nodalflow.system import ProblemSpec

SCALAR = {"spec": {"N": 1, "p": 2, "B": 0, "R": 1, "P": [], "Q": [0], "beta": -1.0}, "grid": {"m": 128}}
PAIR = {"spec": {"N": 2, "p": 2, "B": 1, "R": 0, "P": [0], "Q": [], "beta": -2.0}, "grid": {"m": 128}}


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_ks_table_values_and_round_trip(tmp_path, capsys):
    assert main(["ks-table", "--p", "2", "--B", "1", "--P", "0", "--s-max", "2", "--out", str(tmp_path / "a")]) == 0
    out = capsys.readouterr().out
    assert "K_1 = 68" in out and "K_2 = 551" in out
    first = json.loads((tmp_path / "a" / "ks_table.json").read_text())
    assert first["K"] == [68, 551]
    assert main(["ks-table", "--config", str(tmp_path / "a" / "ks_table.json"), "--out", str(tmp_path / "b")]) == 0
    assert json.loads((tmp_path / "b" / "ks_table.json").read_text()) == first
    assert ks_table(3, 1, [0], 2)["K"] == [141, 4535]


def test_ks_table_rejects_composite_p():
    assert main(["ks-table", "--p", "4", "--P", "0"]) == 3
    assert main(["ks-table"]) == 3


def test_ks_table_from_run_config(tmp_path, capsys):
    assert main(["ks-table", "--config", write(tmp_path, PAIR)]) == 0
    assert "K_1 = 68" in capsys.readouterr().out


def test_config_round_trip(tmp_path):
    cfg = RunConfig.from_dict(dict(PAIR, seed={"K": 2, "amplitude": 3.0}))
    path = tmp_path / "c.json"
    save_config(cfg, path)
    again = load_config(path)
    assert again == cfg
    assert again.seed.K == 2
    assert json.loads(path.read_text()) == again.to_dict()


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.integers(1, 2), st.integers(0, 2), st.floats(-8.0, -1.0),
       st.integers(16, 1024), st.integers(0, 2**32 - 1), st.floats(1e-4, 1e-2))
def test_config_round_trip_property(p, B, R, beta, m, seed, dt):
    spec = ProblemSpec(B * p + R, beta, p, B, R, (1,) * B, (0,) * R, RadialDomain.annulus(0.5, 2.0, 2))
    cfg = RunConfig(spec, m=m, flow=FlowParams(dt_init=dt, dt_max=max(dt, 0.05)),
                    seed=SeedParams.random(spec, 2, np.random.default_rng(seed)), random_seed=seed)
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    np.testing.assert_array_equal(again.seed.group_amplitudes[0], cfg.seed.group_amplitudes[0])


@pytest.mark.parametrize("patch", [
    {"spec": {"N": 2, "p": 4, "B": 1, "R": 0, "P": [0], "Q": []}},           # p not prime
    {"seed": {"K": 1, "amplitude": 0.0}},                                      # zero amplitudes
    {"seed": {"K": 40}},                                                       # resolution guard
    {"flow": {"dt_init": -1.0}},
    {"threshold": 2.0},
    {"grid": {"m": 4}},
])
def test_invalid_configs_exit_3(tmp_path, patch):
    assert main(["solve", "--config", write(tmp_path, dict(PAIR, **patch)), "--out", str(tmp_path / "o")]) == 3


def test_missing_config_exit_3(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == 3
    assert main(["solve"]) == 3


def test_solve_scalar_matches_oracle(tmp_path):
    out = tmp_path / "run"
    assert main(["solve", "--config", write(tmp_path, SCALAR), "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["results"]["exit_code"] == 0
    assert man["results"]["oracle"]["sup_error"] < 20 * (1 / 128) ** 2 * 7.6
    assert RunConfig.from_dict(man["config"]) == RunConfig.from_dict(dict(SCALAR, out=str(out)))
    lines = (out / "profile.csv").read_text().splitlines()
    assert lines[0] == "r,u_1"
    assert len(lines) == 129 + 1
    r, U = read_profile(out / "profile.csv")
    assert r[-1] == 1.0 and U[0, -1] == 0.0
    assert len((out / "manifests.jsonl").read_text().splitlines()) == 1
    # verify the stored profile
    assert main(["verify", "--config", write(tmp_path, SCALAR), "--profile", str(out / "profile.csv"),
                 "--out", str(tmp_path / "v")]) == 0


def test_verify_rejects_mismatched_profile(tmp_path):
    prof = tmp_path / "p.csv"
    prof.write_text("r,u_1\n0,1\n1,0\n")
    assert main(["verify", "--config", write(tmp_path, SCALAR), "--profile", str(prof)]) == 3


def test_verify_fails_on_wrong_profile(tmp_path):
    out = tmp_path / "run"
    main(["solve", "--config", write(tmp_path, SCALAR), "--out", str(out)])
    r, U = read_profile(out / "profile.csv")
    np.savetxt(out / "bad.csv", np.column_stack([r, 1.2 * U.T]), delimiter=",", header="r,u_1", comments="")
    assert main(["verify", "--config", write(tmp_path, SCALAR), "--profile", str(out / "bad.csv"),
                 "--out", str(tmp_path / "v")]) == 1


def test_solve_is_reproducible(tmp_path):
    cfg = write(tmp_path, PAIR)
    mans = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
        man = json.loads((out / "manifest.json").read_text())
        man["config"].pop("out")
        mans.append({k: man[k] for k in ("config", "results", "version", "command")})
    assert mans[0] == mans[1]
    assert min(mans[0]["results"]["solution"]["comparison_matrix"][0][1:]) >= 1


def test_seed_preview(tmp_path, capsys):
    cfg = {"spec": {"N": 3, "p": 2, "B": 1, "R": 1, "P": [1], "Q": [0]}, "grid": {"m": 256}}
    assert main(["seed-preview", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "s")]) == 0
    rep = json.loads((tmp_path / "s" / "seed_report.json").read_text())
    assert rep["inspection"]["grid_counts"] == [1, 1, 0]
    assert (tmp_path / "s" / "seed.csv").exists()


def test_invariants_deterministic_and_fault_injection(tmp_path):
    small = {"dissipation_trials": 4, "monotonicity_trials": 3, "identity_trials": 3,
             "small_bump_trials": 3, "equivariance_trials": 3, "max_steps": 100}
    cfg = {"spec": {"N": 3, "p": 2, "B": 1, "R": 1, "P": [1], "Q": [0]}, "grid": {"m": 128},
           "invariants": small}
    path = write(tmp_path, cfg)
    assert main(["invariants", "--config", path, "--out", str(tmp_path / "a"), "--seed", "5"]) == 0
    assert main(["invariants", "--config", path, "--out", str(tmp_path / "b"), "--seed", "5"]) == 0
    a = (tmp_path / "a" / "invariants_report.json").read_bytes()
    assert a == (tmp_path / "b" / "invariants_report.json").read_bytes()
    broken = dict(cfg, flow={"enforce_dissipation": False, "dt_init": 1.0, "dt_max": 1.0},
                  invariants=dict(small, dissipation_trials=10))
    assert main(["invariants", "--config", write(tmp_path, broken, "broken.json"),
                 "--out", str(tmp_path / "c")]) == 1
    rep = json.loads((tmp_path / "c" / "invariants_report.json").read_text())
    diss = next(s for s in rep["suites"] if s["name"] == "dissipation")
    assert not diss["passed"] and diss["failures"][0]["energy_increase"] > 1e-12
    assert list((tmp_path / "c").glob("counterexample_dissipation_*.npy"))


def test_invariants_skip_inapplicable_suites(tmp_path):
    cfg = dict(SCALAR, invariants={"dissipation_trials": 2, "monotonicity_trials": 2, "identity_trials": 2,
                                   "max_steps": 50})
    assert main(["invariants", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "invariants_report.json").read_text())
    assert set(rep["skipped"]) == {"small_bump", "equivariance"}


def test_sweep_empty_axis_exit_3(tmp_path):
    path = write(tmp_path, PAIR)
    assert main(["sweep", "--config", path, "--axis", "beta", "--values"]) == 3
    assert main(["sweep", "--config", path]) == 3  # no axis in config or flags


def test_sweep_grid_axis(tmp_path):
    path = write(tmp_path, dict(PAIR, sweep={"axis": "grid", "values": [64, 128]}))
    assert main(["sweep", "--config", path, "--out", str(tmp_path / "sw")]) == 0
    rows = (tmp_path / "sw" / "sweep_summary.csv").read_text().splitlines()
    assert rows[0].startswith("value,exit_code,node_counts")
    assert [r.split(",")[2] for r in rows[1:]] == ["0 0", "0 0"]
    assert (tmp_path / "sw" / "grid=64" / "manifest.json").exists()


def test_sweep_other_axes_build_configs():
    from nodalflow.cli import sweep_config
    cfg = RunConfig.from_dict(PAIR)
    assert sweep_config(cfg, "beta", -4.0).spec.beta == -4.0
    assert sweep_config(cfg, "K", 2).seed.K == 2
    scaled = sweep_config(cfg, "amplitude", 3.0).seed
    np.testing.assert_allclose(scaled.group_amplitudes[0], 3.0 * cfg.seed.group_amplitudes[0])
