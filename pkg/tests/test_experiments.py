# tests/test_experiments.py
import json
import os
import re

import numpy as np
import pytest
from click.testing import CliRunner

import models.experiments as experiments
from models.errors import ParameterError
from models.experiments import (
    PRESETS,
    continuity_smoke,
    max_workers,
    run_experiment,
    run_id_for,
    sweep_map,
)
from sp2d import cli


def _checks(result):
    return {c["name"]: c for c in result.summary["checks"]}


def test_presets():
    assert sorted(PRESETS) == ["evolve", "madelung-compare", "poisson-check", "wkb-sweep"]


def test_poisson_check_writes_artifacts(fast_config):
    cfg = fast_config(**{"grid.L": 6.0, "grid.n": 48})
    result = run_experiment("poisson-check", cfg)
    checks = _checks(result)
    for name in (
        "origin_normalization",
        "direct_vs_fft_max",
        "direct_vs_fft_grad_max",
        "radial_oracle_rel",
        "newtonian_shift_std",
        "newtonian_shift_mean",
        "hessian_symmetry",
        "hessian_trace",
        "neutrality_slope_rel",
    ):
        assert checks[name]["passed"], name
    # |P|/log<R> only settles to M/2pi on large boxes; at R = 4.8 a unit Gaussian gives
    # (M/2pi)(log R + gamma/2)/log<R>, above the 1.1 margin
    R = 0.8 * 6.0
    M = result.summary["metrics"]["mass"]
    expected = M / (2.0 * np.pi) * (np.log(R) + 0.5 * np.euler_gamma) / (0.5 * np.log1p(R * R))
    assert checks["log_growth_bound"]["value"] == pytest.approx(expected, rel=1e-2)
    assert not checks["log_growth_bound"]["passed"]
    assert result.status == "fail"
    assert {"neutrality.csv", "density.sp2d", "potential.sp2d"} <= set(result.summary["artifacts"])
    with open(os.path.join(result.run_dir, "summary.json"), encoding="utf-8") as fh:
        on_disk = json.load(fh)
    assert on_disk["status"] == result.status
    assert result.exit_code == (0 if result.status == "pass" else 1)


def test_runs_are_reproducible(fast_config, tmp_path):
    cfg = fast_config(**{"grid.L": 6.0, "grid.n": 48})
    first = run_experiment("poisson-check", cfg, str(tmp_path / "a"))
    second = run_experiment("poisson-check", cfg, str(tmp_path / "b"))
    for name in ["summary.json"] + first.summary["artifacts"]:
        with open(os.path.join(first.run_dir, name), "rb") as fa, open(os.path.join(second.run_dir, name), "rb") as fb:
            assert fa.read() == fb.read(), name


def test_solver_errors_become_error_status(fast_config):
    result = run_experiment("poisson-check", fast_config(**{"data.sigma": 0.5}))
    assert result.status == "error"
    assert result.exit_code == 1
    assert "under-resolved" in result.summary["message"]


def test_artifact_write_failure_becomes_error_status(fast_config, monkeypatch):
    def no_space(path, f):
        raise OSError(f"no space left for {os.path.basename(path)}")

    monkeypatch.setattr(experiments, "write_field", no_space)
    result = run_experiment("poisson-check", fast_config(**{"grid.L": 6.0, "grid.n": 48}))
    assert result.status == "error"
    assert result.exit_code == 1
    assert "no space left" in result.summary["message"]
    with open(os.path.join(result.run_dir, "summary.json"), encoding="utf-8") as fh:
        assert json.load(fh)["status"] == "error"


def test_unknown_preset(fast_config):
    with pytest.raises(ParameterError):
        run_experiment("everything", fast_config())


def test_evolve_conserves_mass(fast_config):
    result = run_experiment("evolve", fast_config())
    checks = _checks(result)
    assert checks["hydro_mass_drift"]["passed"]
    assert checks["hydro_curl_residual"]["passed"]
    assert checks["nls_mass_drift"]["passed"]
    for name in ("hydro_manifest.csv", "nls_manifest.csv", "continuity.csv", "weight_identity.csv"):
        assert name in result.summary["artifacts"]


def test_evolve_limit_system_skips_wave_solver(fast_config):
    result = run_experiment("evolve", fast_config(**{"solver.epsilon": 0.0}))
    assert "nls_mass_drift" not in _checks(result)
    assert "nls_manifest.csv" not in result.summary["artifacts"]


def test_madelung_compare_gauge(fast_config):
    result = run_experiment("madelung-compare", fast_config())
    checks = _checks(result)
    assert checks["gauge_covariance"]["passed"]
    assert checks["madelung_lift_error"]["passed"]
    assert checks["lift_hs_bound"]["passed"]


def test_madelung_compare_needs_epsilon(fast_config):
    result = run_experiment("madelung-compare", fast_config(**{"solver.epsilon": 0.0}))
    assert result.status == "error"


def test_wkb_sweep_passes(fast_config):
    result = run_experiment("wkb-sweep", fast_config(**{"solver.T": 0.1}))
    assert result.status == "pass", result.summary["message"]
    assert result.exit_code == 0
    checks = _checks(result)
    for name in (
        "wkb_order",
        "next_order_improves",
        "a0_extrapolated_vs_limit",
        "a1_cascade_vs_extrapolated",
        "moment_a0_growth",
    ):
        assert checks[name]["passed"], name
    assert result.summary["metrics"]["fitted_order"] == pytest.approx(1.0, abs=0.1)
    assert "convergence_N1.csv" in result.summary["artifacts"]
    assert "convergence_N2.csv" in result.summary["artifacts"]


def test_wkb_sweep_needs_enough_nodes(fast_config):
    result = run_experiment("wkb-sweep", fast_config(**{"sweep.eps": "0.4, 0.2"}))
    assert result.status == "error"


def test_continuity_of_free_flow_is_exact(fast_config):
    cfg = fast_config(**{"solver.lambda": 0.0})
    assert continuity_smoke(cfg, 0.0) == 0.0
    assert continuity_smoke(cfg, 1e-3) == pytest.approx(1.0, rel=1e-9)
    assert continuity_smoke(cfg, -1e-2) == pytest.approx(1.0, rel=1e-9)


def test_continuity_needs_waves(fast_config):
    with pytest.raises(ParameterError):
        continuity_smoke(fast_config(**{"solver.epsilon": 0.0}), 1e-3)
    with pytest.raises(ParameterError):
        continuity_smoke(fast_config(**{"continuity.s": 0.5}), 1e-3)


def test_run_id_ignores_output_dir(fast_config):
    a = run_id_for("evolve", fast_config(**{"output.dir": "x"}))
    b = run_id_for("evolve", fast_config(**{"output.dir": "y"}))
    assert a == b
    assert re.match(r"^evolve-[0-9a-f]{12}$", a)
    assert run_id_for("evolve", fast_config(**{"grid.n": 128})) != a
    assert run_id_for("wkb-sweep", fast_config()) != a


def test_max_workers(monkeypatch):
    monkeypatch.setenv("SP2D_THREADS", "3")
    assert max_workers() == 3
    monkeypatch.setenv("SP2D_THREADS", "0")
    assert max_workers() == 1
    monkeypatch.setenv("SP2D_THREADS", "many")
    assert max_workers() >= 1


def test_sweep_map_keeps_order(monkeypatch):
    monkeypatch.setenv("SP2D_THREADS", "4")
    assert sweep_map(lambda x: x * x, range(10)) == [x * x for x in range(10)]
    assert sweep_map(lambda x: x, []) == []


def test_cli_runs_preset(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "grid.L = 8\ngrid.n = 64\nsolver.T = 0.1\nsolver.dt = 2e-3\nsolver.samples = 2\n",
        encoding="utf-8",
    )
    out = tmp_path / "out"
    result = CliRunner().invoke(cli, ["wkb-sweep", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert str(out) in result.output
    assert (out / "summary.json").is_file()


def test_cli_usage_errors(tmp_path):
    runner = CliRunner()
    assert runner.invoke(cli, ["everything"]).exit_code == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("grid.n = 63\n", encoding="utf-8")
    result = runner.invoke(cli, ["evolve", "--config", str(bad)])
    assert result.exit_code == 2
    assert "grid.n" in result.output or "n must" in result.output
