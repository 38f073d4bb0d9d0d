"""Classification of parameter points into the six dynamical cases, and the lambda-alpha map."""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from trustdyn.models import (
    MU, PU, PT,
    STABLE,
    GameParams,
    RegimeVerdict,
    RegimeGrid,
)
from trustdyn.services.payoffs import validate_params
from trustdyn.services.equilibria import (
    STABILITY_TOL,
    thresholds,
    enumerate_boundary_equilibria,
    classify_stability,
)

logger = logging.getLogger(__name__)

BOUNDARY = "Boundary"
CASE_IDS = ("Case1", "Case2", "Case3", "Case4", "Case5", "Case6", BOUNDARY)

STABLE_SETS = {
    "Case1": frozenset({MU}),
    "Case2": frozenset({MU, PU}),
    "Case3": frozenset({MU, PT}),
    "Case4": frozenset({MU, PU, PT}),
    "Case5": frozenset({MU, PT}),
    "Case6": frozenset({MU, PT}),
    BOUNDARY: frozenset(),
}

# (lambda band, alpha side) -> case; bands: 0 below lambda_low, 1 between, 2 above lambda_high
_CASE_TABLE = {
    (0, False): "Case1",
    (0, True): "Case2",
    (1, False): "Case3",
    (1, True): "Case4",
    (2, False): "Case5",
    (2, True): "Case6",
}


class RegimeMismatchError(RuntimeError):
    """Raised when the threshold classification disagrees with the Jacobian verdicts."""


def jacobian_stable_set(params: GameParams, tol: float = STABILITY_TOL) -> frozenset:
    """Labels of the boundary equilibria whose eigenvalues all have negative real part."""
    return frozenset(
        report.label
        for report in enumerate_boundary_equilibria(params)
        if classify_stability(report, tol) == STABLE
    )


def classify_regime(params: GameParams, tol: float = STABILITY_TOL, verify: bool = False) -> RegimeVerdict:
    """Case of a parameter point from the alpha* and lambda thresholds.

    Any comparison closer than tol yields the Boundary verdict with an empty
    stable set. With verify=True the stable set is cross-checked against the
    Jacobian verdicts of the boundary equilibria.
    """
    limits = thresholds(params)
    lam, alpha = params.lam, params.alpha
    near = (
        abs(alpha - limits.alpha_star) <= tol
        or abs(lam - limits.lambda_low) <= tol
        or abs(lam - limits.lambda_high) <= tol
    )
    if near:
        logger.debug(f"Boundary verdict for alpha={alpha}, lambda={lam}")
        return RegimeVerdict(case_id=BOUNDARY, stable_set=STABLE_SETS[BOUNDARY], thresholds=limits)

    if lam < limits.lambda_low:
        band = 0
    elif lam < limits.lambda_high:
        band = 1
    else:
        band = 2
    case_id = _CASE_TABLE[(band, alpha > limits.alpha_star)]
    verdict = RegimeVerdict(case_id=case_id, stable_set=STABLE_SETS[case_id], thresholds=limits)

    if verify:
        derived = jacobian_stable_set(params, tol)
        if derived != verdict.stable_set:
            raise RegimeMismatchError(
                f"{case_id} expects stable set {sorted(verdict.stable_set)} "
                f"but the Jacobians give {sorted(derived)} for {params}"
            )
    return verdict


def _axis(value_range, resolution: int) -> np.ndarray:
    lo, hi = value_range
    if resolution < 1:
        raise ValueError(f"resolution must be at least 1, got {resolution}")
    return np.linspace(float(lo), float(hi), int(resolution))


def regime_map(lambda_range, alpha_range, resolution, fixed: dict, tol: float = STABILITY_TOL,
               threads: int = 1) -> RegimeGrid:
    """Verdicts over a lambda x alpha grid; rows follow alpha, columns follow lambda.

    ``resolution`` is either one count for both axes or a (lambda, alpha) pair.
    ``fixed`` carries N, r, R_T and optionally t_v.
    """
    if isinstance(resolution, (list, tuple)):
        n_lambda, n_alpha = resolution
    else:
        n_lambda = n_alpha = resolution
    lambdas = _axis(lambda_range, n_lambda)
    alphas = _axis(alpha_range, n_alpha)

    # Validates the corners up front so no grid point can be out of range
    for alpha in (alphas[0], alphas[-1]):
        for lam in (lambdas[0], lambdas[-1]):
            validate_params({**fixed, "alpha": alpha, "lambda": lam})

    def classify_row(alpha):
        return tuple(
            classify_regime(validate_params({**fixed, "alpha": alpha, "lambda": lam}), tol)
            for lam in lambdas
        )

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        rows = tuple(executor.map(classify_row, alphas))

    logger.info(f"Classified {len(alphas)} x {len(lambdas)} regime grid")
    return RegimeGrid(
        lambdas=tuple(float(v) for v in lambdas),
        alphas=tuple(float(v) for v in alphas),
        verdicts=rows,
    )
