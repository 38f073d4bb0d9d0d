import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from conftest import FIGURES
from trustdyn.cli import main
from trustdyn.config import build_experiment_config
from trustdyn.models import MU, PU, PT, INTERIOR
from trustdyn.runner import (
    EXIT_OK,
    EXIT_CONFIG,
    EXIT_UNWRITABLE,
    EXIT_INCONSISTENT,
    EQUILIBRIUM_COLUMNS,
    run_command,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
COARSE = {"step": 0.5, "t_max": 20000.0, "convergence_eps": 1e-8}


def run(args):
    return main([str(arg) for arg in args])


class TestEquilibria:
    def test_fig5_table(self, tmp_path):
        out = tmp_path / "fig5.csv"
        assert run(["equilibria", "--config", CONFIG_DIR / "fig5.yaml", "--out", out]) == EXIT_OK
        table = pd.read_csv(out, float_precision="round_trip")
        assert list(table.columns) == EQUILIBRIUM_COLUMNS
        assert len(table) == 8
        assert (table["label"] == INTERIOR).sum() == 1
        assert set(table.loc[table["stability"] == "stable", "label"]) == {MU, PU, PT}
        assert set(table["case_id"]) == {"Case4"}

    def test_fig7_table(self, tmp_path):
        out = tmp_path / "fig7.csv"
        assert run(["equilibria", "--config", CONFIG_DIR / "fig7.yaml", "--out", out]) == EXIT_OK
        table = pd.read_csv(out, float_precision="round_trip")
        assert (table["label"] != INTERIOR).sum() == 6
        assert set(table.loc[table["stability"] == "stable", "label"]) == {MU, PT}

    def test_json_embeds_params_and_regime(self, tmp_path):
        out = tmp_path / "fig4.json"
        assert run(["equilibria", "--config", CONFIG_DIR / "fig4.yaml", "--out", out, "--format", "json"]) == EXIT_OK
        document = json.loads(out.read_text(encoding="utf-8"))
        assert set(document) == {"command", "params", "results"}
        assert document["command"] == "equilibria"
        assert document["params"]["lambda"] == 0.05
        assert document["params"]["R_U"] == pytest.approx(2.1)
        assert document["results"]["regime"]["case_id"] == "Case3"
        assert sum(1 for row in document["results"]["equilibria"] if row["label"] != INTERIOR) == 6

    def test_malformed_config_names_the_field(self, tmp_path, write_config, caplog):
        path = write_config({"params": {**FIGURES["fig2"], "alpha": 1.5}, "output": {"path": str(tmp_path / "x.csv")}})
        assert run(["equilibria", "--config", path]) == EXIT_CONFIG
        assert "alpha" in caplog.text

    def test_missing_config_file(self, tmp_path):
        assert run(["equilibria", "--config", tmp_path / "absent.yaml", "--out", tmp_path / "x.csv"]) == EXIT_CONFIG

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("", encoding="utf-8")
        out = blocker / "nested" / "fig2.csv"
        assert run(["equilibria", "--config", CONFIG_DIR / "fig2.yaml", "--out", out]) == EXIT_UNWRITABLE


class TestTrajectoryAndPortrait:
    def test_fig2_start_reaches_defection(self, tmp_path, write_config):
        out = tmp_path / "traj.csv"
        path = write_config({
            "params": FIGURES["fig2"],
            "integrator": COARSE,
            "trajectory": {"starts": [[0.05, 0.45]]},
            "output": {"path": str(out)},
        })
        assert run(["trajectory", "--config", path]) == EXIT_OK
        table = pd.read_csv(out, float_precision="round_trip")
        assert list(table.columns[:4]) == ["start_index", "t", "x_i", "x_t"]
        last = table.iloc[-1]
        assert abs(last["x_i"]) < 1e-4 and abs(last["x_t"]) < 1e-4
        assert table["t"].is_monotonic_increasing

    def test_fig6_starts_in_different_basins(self, tmp_path, write_config):
        out = tmp_path / "traj.json"
        path = write_config({
            "params": FIGURES["fig6"],
            "integrator": COARSE,
            "trajectory": {"starts": [[0.001, 0.01], [0.099, 0.899]]},
            "output": {"path": str(out), "format": "json"},
        })
        assert run(["trajectory", "--config", path]) == EXIT_OK
        summaries = json.loads(out.read_text(encoding="utf-8"))["results"]
        assert [summary["terminal_label"] for summary in summaries] == [MU, PT]
        assert summaries[1]["terminal"] == pytest.approx([0.1, 0.9], abs=1e-4)

    def test_portrait_grid_has_zero_components_on_edges(self, tmp_path):
        out = tmp_path / "portrait.csv"
        assert run(["phase-portrait", "--config", CONFIG_DIR / "fig4.yaml", "--out", out]) == EXIT_OK
        table = pd.read_csv(out, float_precision="round_trip")
        assert len(table) == 441
        assert list(table.columns) == ["x_i", "x_t", "dx_i", "dx_t"]
        on_investor_edges = table["x_i"].isin([0.0, 0.1])
        on_trustee_edges = table["x_t"].isin([0.0, 0.9])
        assert (table.loc[on_investor_edges, "dx_i"] == 0.0).all()
        assert (table.loc[on_trustee_edges, "dx_t"] == 0.0).all()
        assert on_investor_edges.sum() == 42

    def test_portrait_json_carries_equilibria(self, tmp_path):
        out = tmp_path / "portrait.json"
        assert run(["phase-portrait", "--config", CONFIG_DIR / "fig4.yaml", "--out", out,
                    "--format", "json", "--set", "portrait.resolution=5"]) == EXIT_OK
        results = json.loads(out.read_text(encoding="utf-8"))["results"]
        assert len(results["field"]) == 25
        assert sum(1 for row in results["equilibria"] if row["label"] != INTERIOR) == 6


class TestRegimeMapAndBasin:
    def test_regime_map_codomain(self, tmp_path):
        out = tmp_path / "map.csv"
        assert run(["regime-map", "--config", CONFIG_DIR / "fig8.yaml", "--out", out,
                    "--set", "regime_map.resolution=30", "--threads", "2"]) == EXIT_OK
        table = pd.read_csv(out, keep_default_na=False, float_precision="round_trip")
        assert len(table) == 900
        assert list(table.columns) == ["alpha", "lambda", "case_id", "stable_set"]
        assert set(table["case_id"]) <= {"Case1", "Case2", "Case3", "Case4", "Case5", "Case6", "Boundary"}
        assert set(table.loc[table["case_id"] == "Case4", "stable_set"]) == {"M+U;P+T;P+U"}

    def test_basin_sweep_rows_and_cells(self, tmp_path, write_config):
        out = tmp_path / "basin.csv"
        path = write_config({
            "params": FIGURES["fig4"],
            "integrator": COARSE,
            "basin": {"grid_resolution": 5, "cells": True,
                      "sweep": {"axis": "lambda", "values": [0.2, 0.01]}},
            "output": {"path": str(out)},
        })
        assert run(["basin", "--config", path]) == EXIT_OK
        table = pd.read_csv(out, float_precision="round_trip")
        assert list(table.columns) == ["axis", "value", "fraction", "absolute_area", "unresolved", "stalled",
                                       "grid_resolution"]
        assert table["value"].tolist() == pytest.approx([0.01, 0.2])
        assert table["fraction"].iloc[0] == 0.0
        cells = pd.read_csv(tmp_path / "basin_cells.csv", keep_default_na=False, float_precision="round_trip")
        assert list(cells.columns) == ["axis", "value", "x_i", "x_t", "label", "converged"]
        assert len(cells) == 50
        assert cells.groupby("value").size().tolist() == [25, 25]
        # the cell map and the fraction come from the same integration
        strong = cells[cells["value"] == 0.2]
        resolved = 25 - table["unresolved"].iloc[1]
        assert (strong["label"] == PT).sum() / resolved == pytest.approx(table["fraction"].iloc[1])
        assert PT not in set(cells.loc[cells["value"] == 0.01, "label"])

    def test_single_point_cells_in_json(self, tmp_path, write_config):
        out = tmp_path / "basin.json"
        path = write_config({
            "params": FIGURES["fig6"],
            "integrator": COARSE,
            "basin": {"grid_resolution": 4, "cells": True},
            "output": {"path": str(out), "format": "json"},
        })
        assert run(["basin", "--config", path]) == EXIT_OK
        results = json.loads(out.read_text(encoding="utf-8"))["results"]
        assert len(results["sweep"]) == 1
        assert set(results["sweep"][0]) >= {"unresolved", "stalled"}
        assert len(results["cells"]) == 16
        assert {cell["value"] for cell in results["cells"]} == {0.1}
        assert not (tmp_path / "basin_cells.json").exists()


class TestMonteCarloCheck:
    def test_consistent_estimates(self, tmp_path):
        out = tmp_path / "mc.csv"
        assert run(["mc-check", "--config", CONFIG_DIR / "fig4.yaml", "--out", out,
                    "--set", "mc_check.sample_count=20000"]) == EXIT_OK
        table = pd.read_csv(out, float_precision="round_trip")
        assert table["strategy"].tolist() == ["P", "M", "T", "U"]
        assert (table["z_score"].abs() <= 5).all()

    def test_same_seed_gives_identical_files(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (first, second):
            run(["mc-check", "--config", CONFIG_DIR / "fig4.yaml", "--out", out,
                 "--seed", "7", "--set", "mc_check.sample_count=1000"])
        assert first.read_bytes() == second.read_bytes()
        assert b"\r\n" not in first.read_bytes()

    def test_inconsistency_exit_code(self, tmp_path):
        raw = {
            "params": FIGURES["fig4"],
            "mc_check": {"state": [0.05, 0.5], "sample_count": 2000, "z_limit": 0.0},
            "output": {"path": str(tmp_path / "mc.csv")},
        }
        result = run_command(build_experiment_config("mc-check", raw))
        assert result["exit_code"] == EXIT_INCONSISTENT
        assert not result["success"]
        assert Path(result["path"]).exists()

    def test_coexistence_corner_is_consistent(self, tmp_path):
        out = tmp_path / "corner.csv"
        assert run(["mc-check", "--config", CONFIG_DIR / "fig4.yaml", "--out", out,
                    "--set", "mc_check.state=[0.1, 0.9]", "--set", "mc_check.sample_count=20000"]) == EXIT_OK
        table = pd.read_csv(out, float_precision="round_trip").set_index("strategy")
        # every sampled P group holds a trustee, so f_P has no spread
        assert table.loc["P", "std_error"] == 0.0
        assert table.loc["P", "mc_mean"] == pytest.approx(table.loc["P", "closed_form"], abs=2e-9)
        assert table["z_score"].abs().max() < 5

    def test_single_sample_is_rejected(self, tmp_path, caplog):
        assert run(["mc-check", "--config", CONFIG_DIR / "fig4.yaml", "--out", tmp_path / "mc.csv",
                    "--set", "mc_check.sample_count=1"]) == EXIT_CONFIG
        assert "mc_check.sample_count" in caplog.text
        assert not (tmp_path / "mc.csv").exists()

    def test_two_samples_never_divide_by_zero(self, tmp_path):
        out = tmp_path / "mc.csv"
        code = run(["mc-check", "--config", CONFIG_DIR / "fig4.yaml", "--out", out,
                    "--set", "mc_check.sample_count=2"])
        table = pd.read_csv(out, float_precision="round_trip")
        assert np.isfinite(table["z_score"]).all()
        assert code == EXIT_OK


FIGURE_CONFIGS = sorted(path.stem for path in CONFIG_DIR.glob("fig*.yaml"))
PHASE_CONFIGS = [name for name in FIGURE_CONFIGS if name in FIGURES]
SWEEP_OVERRIDES = {
    "fig9a": "basin.sweep.values=[0.3, 0.6]",
    "fig9b": "basin.sweep.values=[0.3, 0.6]",
    "fig10": "basin.sweep.values=[0.5, 1.1]",
}


def run_twice(tmp_path, args):
    first, second = tmp_path / "first.csv", tmp_path / "second.csv"
    codes = [run(args + ["--out", out]) for out in (first, second)]
    assert codes == [EXIT_OK, EXIT_OK]
    return first.read_bytes(), second.read_bytes()


class TestReproducibleConfigs:
    def test_every_figure_is_shipped(self):
        assert set(FIGURE_CONFIGS) == set(FIGURES) | {"fig8"} | set(SWEEP_OVERRIDES)

    @pytest.mark.parametrize("name", PHASE_CONFIGS)
    def test_equilibria(self, tmp_path, name):
        first, second = run_twice(tmp_path, ["equilibria", "--config", CONFIG_DIR / f"{name}.yaml"])
        assert first == second

    @pytest.mark.parametrize("name", PHASE_CONFIGS)
    def test_trajectory(self, tmp_path, name):
        args = ["trajectory", "--config", CONFIG_DIR / f"{name}.yaml",
                "--set", "integrator.step=0.5", "--set", "integrator.t_max=2000.0",
                "--set", "integrator.convergence_eps=1.0e-8"]
        first, second = run_twice(tmp_path, args)
        assert first == second
        assert b"\r\n" not in first

    def test_regime_map(self, tmp_path):
        serial = tmp_path / "serial.csv"
        args = ["regime-map", "--config", CONFIG_DIR / "fig8.yaml", "--set", "regime_map.resolution=10"]
        first, second = run_twice(tmp_path, args + ["--threads", "2"])
        assert run(args + ["--threads", "1", "--out", serial]) == EXIT_OK
        assert first == second == serial.read_bytes()

    @pytest.mark.parametrize("name", sorted(SWEEP_OVERRIDES))
    def test_basin(self, tmp_path, name):
        args = ["basin", "--config", CONFIG_DIR / f"{name}.yaml",
                "--set", "basin.grid_resolution=5", "--set", "integrator.step=0.2",
                "--set", SWEEP_OVERRIDES[name], "--threads", "2"]
        first, second = run_twice(tmp_path, args)
        assert first == second
