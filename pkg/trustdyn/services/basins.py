"""Attraction domain of the P+T coexistence corner, estimated on a grid of starts."""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from trustdyn.models import (
    PT,
    GameParams,
    IntegratorConfig,
    BasinResult,
    BasinCell,
)
from trustdyn.services.payoffs import validate_params
from trustdyn.services.dynamics import integrate_batch, classify_terminals
from trustdyn.services.equilibria import STABILITY_TOL, analyze_equilibria, stable_points

logger = logging.getLogger(__name__)

DEFAULT_GRID_RESOLUTION = 101
CLASSIFY_EPS = 1e-4
# Largest share of unresolved starts tolerated before the run fails
UNRESOLVED_LIMIT = 0.01
SWEEP_AXES = ("alpha", "lambda")


class BasinBudgetError(RuntimeError):
    """Raised when too many trajectories end without reaching a stable point."""


def grid_starts(params: GameParams, grid_resolution: int) -> tuple:
    """Cell-centred starts ((i + 1/2) alpha / G, (j + 1/2)(1 - alpha) / G), x_i major."""
    if grid_resolution < 1:
        raise ValueError(f"grid_resolution must be at least 1, got {grid_resolution}")
    centres = (np.arange(grid_resolution) + 0.5) / grid_resolution
    x_i, x_t = np.meshgrid(centres * params.alpha, centres * (1.0 - params.alpha), indexing="ij")
    return x_i.reshape(-1), x_t.reshape(-1)


def _integrate_chunks(x_i, x_t, params: GameParams, cfg: IntegratorConfig, threads: int) -> dict:
    if threads <= 1 or x_i.size < 2:
        return integrate_batch(x_i, x_t, params, cfg)
    parts = np.array_split(np.arange(x_i.size), threads)
    with ThreadPoolExecutor(max_workers=threads) as executor:
        results = list(executor.map(lambda idx: integrate_batch(x_i[idx], x_t[idx], params, cfg), parts))
    return {key: np.concatenate([result[key] for result in results]) for key in results[0]}


def basin_map(params: GameParams, grid_resolution: int = DEFAULT_GRID_RESOLUTION,
              integrator_cfg: IntegratorConfig = None, tol: float = STABILITY_TOL,
              threads: int = 1, classify_eps: float = CLASSIFY_EPS) -> list:
    """Terminal label of every grid start, as BasinCell records in grid order.

    Starts that hit t_max, or converge away from every stable point, carry label None.
    """
    cfg = integrator_cfg or IntegratorConfig()
    targets = stable_points(analyze_equilibria(params, tol, include_interior=False))
    x_i, x_t = grid_starts(params, grid_resolution)
    result = _integrate_chunks(x_i, x_t, params, cfg, threads)

    labels = classify_terminals(result["x_i"], result["x_t"], targets, classify_eps)
    cells = []
    for k in range(x_i.size):
        converged = bool(result["converged"][k])
        label = labels[k] if converged else None
        cells.append(BasinCell(x_i=float(x_i[k]), x_t=float(x_t[k]), label=label, converged=converged))
    return cells


def basin_fraction(params: GameParams, grid_resolution: int = DEFAULT_GRID_RESOLUTION,
                   integrator_cfg: IntegratorConfig = None, tol: float = STABILITY_TOL,
                   threads: int = 1, classify_eps: float = CLASSIFY_EPS,
                   keep_cells: bool = False) -> BasinResult:
    """Share of grid starts that end at the P+T corner (alpha, 1 - alpha).

    Args:
        params: Game parameters of the grid
        grid_resolution: Cells per axis
        integrator_cfg: RK4 settings for every start
        tol: Stability tolerance used to find the target equilibria
        threads: Worker threads for the batch integration
        classify_eps: Distance within which a terminal state matches a stable point
        keep_cells: Also return the per-cell map in BasinResult.cells

    Returns:
        BasinResult. Starts that hit t_max are counted in ``unresolved`` and
        left out of the denominator; converged starts that match no stable
        point are counted in ``stalled`` and stay in it. More than 1%
        unresolved raises BasinBudgetError.
    """
    total = grid_resolution * grid_resolution
    reports = analyze_equilibria(params, tol, include_interior=False)
    if PT not in {label for label, _ in stable_points(reports)}:
        logger.info(f"P+T is not stable for {params}; basin fraction is 0")
        cells = basin_map(params, grid_resolution, integrator_cfg, tol, threads, classify_eps) if keep_cells else []
        return BasinResult(fraction=0.0, grid_resolution=grid_resolution, unresolved=0,
                           absolute_area=0.0, label_counts={}, cells=tuple(cells))

    cells = basin_map(params, grid_resolution, integrator_cfg, tol, threads, classify_eps)
    counts = {}
    unresolved = 0
    stalled = 0
    for cell in cells:
        if not cell.converged:
            unresolved += 1
        elif cell.label is None:
            stalled += 1
        else:
            counts[cell.label] = counts.get(cell.label, 0) + 1

    if unresolved > UNRESOLVED_LIMIT * total:
        raise BasinBudgetError(
            f"{unresolved} of {total} starts unresolved for {params}; "
            "raise t_max or loosen convergence_eps"
        )
    if unresolved:
        logger.warning(f"{unresolved} of {total} starts unresolved; excluded from the fraction")
    if stalled:
        logger.warning(f"{stalled} of {total} starts stopped away from every stable point (classify_eps={classify_eps})")

    resolved = total - unresolved
    fraction = counts.get(PT, 0) / resolved if resolved else 0.0
    logger.info(f"Basin of P+T: {fraction:.4f} of {resolved} resolved starts (G={grid_resolution})")
    return BasinResult(
        fraction=fraction,
        grid_resolution=grid_resolution,
        unresolved=unresolved,
        absolute_area=fraction * params.alpha * (1.0 - params.alpha),
        label_counts=dict(sorted(counts.items())),
        stalled=stalled,
        cells=tuple(cells) if keep_cells else (),
    )


def basin_sweep(axis: str, values, params_base: GameParams,
                grid_resolution: int = DEFAULT_GRID_RESOLUTION,
                integrator_cfg: IntegratorConfig = None, tol: float = STABILITY_TOL,
                threads: int = 1, keep_cells: bool = False) -> list:
    """basin_fraction along alpha or lambda; (value, BasinResult) pairs in ascending order."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    ordered = sorted(float(v) for v in values)
    if not ordered:
        return []

    base = params_base.to_dict()
    points = [validate_params({**base, axis: value}) for value in ordered]

    def run_point(params):
        return basin_fraction(params, grid_resolution, integrator_cfg, tol, keep_cells=keep_cells)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        results = list(executor.map(run_point, points))
    return list(zip(ordered, results))
