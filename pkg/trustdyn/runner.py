"""Command handlers: run one experiment and write its data file.

Every handler takes a validated ExperimentConfig and returns a result dict
with ``success``, ``error``, ``exit_code``, ``path`` and ``rows``.
"""
import logging

import numpy as np

from trustdyn.models import STRATEGIES, STABLE, PopulationState
from trustdyn.services.payoffs import ParameterError, expected_payoffs, mc_expected_payoffs
from trustdyn.services.dynamics import rhs_arrays, integrate
from trustdyn.services.equilibria import analyze_equilibria, stable_points
from trustdyn.services.regimes import BOUNDARY, classify_regime, regime_map
from trustdyn.services.basins import basin_fraction, basin_sweep
from trustdyn.utils import write_csv, write_json, complex_parts

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_UNWRITABLE = 3
EXIT_INCONSISTENT = 4

EQUILIBRIUM_COLUMNS = ["case_id", "label", "x_i", "x_t", "eig1_re", "eig1_im", "eig2_re", "eig2_im", "stability"]
TRAJECTORY_COLUMNS = ["start_index", "t", "x_i", "x_t", "y_i", "y_t", "punisher_share", "trust_level"]
PORTRAIT_COLUMNS = ["x_i", "x_t", "dx_i", "dx_t"]
REGIME_COLUMNS = ["alpha", "lambda", "case_id", "stable_set"]
BASIN_COLUMNS = ["axis", "value", "fraction", "absolute_area", "unresolved", "stalled", "grid_resolution"]
CELL_COLUMNS = ["axis", "value", "x_i", "x_t", "label", "converged"]
MC_COLUMNS = ["strategy", "closed_form", "mc_mean", "std_error", "z_score"]


def _result(success: bool, exit_code: int, path=None, rows: int = 0, error: str = None) -> dict:
    return {
        'success': success,
        'error': error,
        'exit_code': exit_code,
        'path': str(path) if path is not None else None,
        'rows': rows,
    }


def _write(config, rows: list, columns: list, results) -> int:
    """Write the command output in the configured format.

    Args:
        config: Validated experiment configuration
        rows: Flat table rows, written as CSV
        columns: CSV column order
        results: Payload stored under ``results`` when the format is JSON

    Returns:
        Number of table rows written
    """
    if config.out_format == "json":
        write_json(config.out_path, {
            "command": config.command,
            "params": config.params.to_dict(),
            "results": results,
        })
        return len(rows)
    return write_csv(config.out_path, rows, columns)


def _equilibrium_row(case_id: str, report) -> dict:
    row = {"case_id": case_id, "label": report.label, "x_i": report.location[0], "x_t": report.location[1]}
    row.update(complex_parts(report.eigenvalues))
    row["stability"] = report.stability
    return row


def _equilibrium_table(config) -> tuple:
    tol = config.options.get("tol", 1e-9)
    verdict = classify_regime(config.params, tol)
    reports = analyze_equilibria(config.params, tol, include_interior=config.options.get("interior", True))

    boundary_stable = {report.label for report in reports if report.stability == STABLE}
    if verdict.case_id != BOUNDARY and boundary_stable != set(verdict.stable_set):
        logger.warning(
            f"{verdict.case_id} predicts stable set {sorted(verdict.stable_set)}, "
            f"Jacobians give {sorted(boundary_stable)}"
        )
    rows = [_equilibrium_row(verdict.case_id, report) for report in reports]
    regime = {
        "case_id": verdict.case_id,
        "stable_set": sorted(verdict.stable_set),
        "alpha_star": verdict.thresholds.alpha_star,
        "lambda_low": verdict.thresholds.lambda_low,
        "lambda_high": verdict.thresholds.lambda_high,
    }
    return rows, regime


def run_equilibria(config) -> dict:
    """Write one row per equilibrium with its case, eigenvalues and stability.

    Args:
        config: Validated configuration for the equilibria command

    Returns:
        Result dict with success, error, exit_code, path and rows
    """
    rows, regime = _equilibrium_table(config)
    logger.info(f"{regime['case_id']}: {len(rows)} equilibria")
    count = _write(config, rows, EQUILIBRIUM_COLUMNS, {"regime": regime, "equilibria": rows})
    return _result(True, EXIT_OK, config.out_path, count)


def run_trajectory(config) -> dict:
    """Integrate every configured start and write the sampled states.

    JSON output also carries a per-start summary with the terminal label.

    Args:
        config: Validated configuration for the trajectory command

    Returns:
        Result dict with success, error, exit_code, path and rows
    """
    params = config.params
    targets = stable_points(analyze_equilibria(params, include_interior=False))
    rows = []
    summaries = []
    for index, (x_i, x_t) in enumerate(config.options["starts"]):
        start = PopulationState(x_i, x_t, params.alpha)
        trajectory = integrate(start, params, config.integrator, targets, config.options["classify_eps"])
        samples = [
            {
                "start_index": index,
                "t": t,
                "x_i": state.x_i,
                "x_t": state.x_t,
                "y_i": state.y_i,
                "y_t": state.y_t,
                "punisher_share": state.punisher_share,
                "trust_level": state.trust_level,
            }
            for t, state in trajectory.samples
        ]
        rows.extend(samples)
        summaries.append({
            "start": [x_i, x_t],
            "converged": trajectory.converged,
            "steps": trajectory.steps,
            "terminal": list(trajectory.terminal.location),
            "terminal_label": trajectory.terminal_label,
            "samples": samples,
        })
        if not trajectory.converged:
            logger.warning(f"Start {index} {start.location} did not converge within t_max={config.integrator.t_max}")
        logger.info(f"Start {index} -> {trajectory.terminal.location} ({trajectory.terminal_label})")

    count = _write(config, rows, TRAJECTORY_COLUMNS, summaries)
    return _result(True, EXIT_OK, config.out_path, count)


def run_phase_portrait(config) -> dict:
    """Vector field on an R x R grid spanning the closed rectangle, x_i major."""
    params = config.params
    resolution = config.options["resolution"]
    x_i, x_t = np.meshgrid(
        np.linspace(0.0, params.alpha, resolution),
        np.linspace(0.0, 1.0 - params.alpha, resolution),
        indexing="ij",
    )
    dx_i, dx_t = rhs_arrays(x_i.reshape(-1), x_t.reshape(-1), params)
    rows = [
        {"x_i": float(a), "x_t": float(b), "dx_i": float(c), "dx_t": float(d)}
        for a, b, c, d in zip(x_i.reshape(-1), x_t.reshape(-1), dx_i, dx_t)
    ]

    results = {"field": rows}
    if config.out_format == "json":
        results["equilibria"], results["regime"] = _equilibrium_table(config)
    count = _write(config, rows, PORTRAIT_COLUMNS, results)
    return _result(True, EXIT_OK, config.out_path, count)


def run_regime_map(config) -> dict:
    options = config.options
    fixed = {key: value for key, value in config.params.to_dict().items() if key not in ("alpha", "lambda")}
    grid = regime_map(options["lambda_range"], options["alpha_range"], options["resolution"],
                      fixed, options["tol"], config.threads)
    rows = []
    for alpha, row in zip(grid.alphas, grid.verdicts):
        for lam, verdict in zip(grid.lambdas, row):
            rows.append({
                "alpha": alpha,
                "lambda": lam,
                "case_id": verdict.case_id,
                "stable_set": ";".join(sorted(verdict.stable_set)),
            })

    counts = {}
    for row in rows:
        counts[row["case_id"]] = counts.get(row["case_id"], 0) + 1
    logger.info(f"Regime map case counts: {dict(sorted(counts.items()))}")
    count = _write(config, rows, REGIME_COLUMNS, {"cells": rows, "case_counts": dict(sorted(counts.items()))})
    return _result(True, EXIT_OK, config.out_path, count)


def _cells_path(out_path):
    return out_path.with_name(f"{out_path.stem}_cells{out_path.suffix or '.csv'}")


def run_basin(config) -> dict:
    """Estimate the attraction domain of P+T, once or along a sweep.

    With ``basin.cells`` the terminal label of every start is written too,
    one block per swept value, from the same integration as the fraction.

    Args:
        config: Validated configuration for the basin command

    Returns:
        Result dict with success, error, exit_code, path and rows
    """
    options = config.options
    params = config.params
    grid_resolution = options["grid_resolution"]
    sweep = options["sweep"]
    keep_cells = options["cells"]

    if sweep is None:
        points = [("alpha", params.alpha, basin_fraction(
            params, grid_resolution, config.integrator, options["tol"], config.threads,
            keep_cells=keep_cells))]
    else:
        pairs = basin_sweep(sweep["axis"], sweep["values"], params, grid_resolution,
                            config.integrator, options["tol"], config.threads, keep_cells=keep_cells)
        points = [(sweep["axis"], value, result) for value, result in pairs]

    rows = [
        {
            "axis": axis,
            "value": value,
            "fraction": result.fraction,
            "absolute_area": result.absolute_area,
            "unresolved": result.unresolved,
            "stalled": result.stalled,
            "grid_resolution": result.grid_resolution,
        }
        for axis, value, result in points
    ]
    results = {"sweep": rows}

    if keep_cells:
        cells = [
            {"axis": axis, "value": value, "x_i": cell.x_i, "x_t": cell.x_t,
             "label": cell.label or "", "converged": cell.converged}
            for axis, value, result in points
            for cell in result.cells
        ]
        if config.out_format == "json":
            results["cells"] = cells
        else:
            write_csv(_cells_path(config.out_path), cells, CELL_COLUMNS)

    count = _write(config, rows, BASIN_COLUMNS, results)
    return _result(True, EXIT_OK, config.out_path, count)


def _z_score(estimate: float, exact: float, std_error: float, sample_count: int) -> float:
    # Zero-spread samples can still miss compositions rarer than 1 / sample_count
    floor = max(abs(exact), abs(estimate), 1.0) / sample_count
    return (estimate - exact) / max(std_error, floor)


def run_mc_check(config) -> dict:
    """Closed-form expected payoffs against a seeded sampling estimate, one row per strategy."""
    options = config.options
    state = PopulationState(*options["state"], config.params.alpha)
    closed = expected_payoffs(state, config.params).as_dict()
    estimate = mc_expected_payoffs(state, config.params, options["sample_count"], config.seed)
    means = estimate.means.as_dict()
    errors = estimate.std_errors.as_dict()

    rows = []
    for strategy in STRATEGIES:
        z = _z_score(means[strategy], closed[strategy], errors[strategy], estimate.sample_count)
        rows.append({
            "strategy": strategy,
            "closed_form": closed[strategy],
            "mc_mean": means[strategy],
            "std_error": errors[strategy],
            "z_score": z,
        })
        logger.info(f"f_{strategy}: closed {closed[strategy]:.6g}, sampled {means[strategy]:.6g}, z={z:.3f}")

    document = {"state": list(state.location), "sample_count": estimate.sample_count,
                "seed": estimate.seed, "rows": rows}
    count = _write(config, rows, MC_COLUMNS, document)

    worst = max(abs(row["z_score"]) for row in rows)
    if worst > options["z_limit"]:
        message = f"sampled payoffs disagree with the closed forms: max |z| = {worst:.3f} > {options['z_limit']}"
        logger.error(message)
        return _result(False, EXIT_INCONSISTENT, config.out_path, count, message)
    return _result(True, EXIT_OK, config.out_path, count)


HANDLERS = {
    "equilibria": run_equilibria,
    "trajectory": run_trajectory,
    "phase-portrait": run_phase_portrait,
    "regime-map": run_regime_map,
    "basin": run_basin,
    "mc-check": run_mc_check,
}


def run_command(config) -> dict:
    """Dispatch to the handler for config.command and map failures to exit codes."""
    handler = HANDLERS[config.command]
    logger.info(f"Running {config.command} for {config.params}")
    try:
        return handler(config)
    except ParameterError as e:
        logger.error(f"Invalid parameters: {e}")
        return _result(False, EXIT_CONFIG, error=str(e))
    except OSError as e:
        logger.error(f"Cannot write {config.out_path}: {e}")
        return _result(False, EXIT_UNWRITABLE, error=f"cannot write {config.out_path}: {e}")
    except Exception as e:
        logger.error(f"{config.command} failed: {e}", exc_info=True)
        return _result(False, EXIT_FAILURE, error=str(e))
