"""Boundary and interior fixed points, Jacobians and stability verdicts."""
import cmath
import logging

import numpy as np

from trustdyn.models import (
    MU, MT, PU, PT, PTU, PMU, PMT, INTERIOR,
    STABLE, UNSTABLE, MARGINAL,
    GameParams,
    EquilibriumReport,
    ThresholdSet,
)
from trustdyn.services.payoffs import (
    investor_return_sum,
    payoff_difference_f,
    payoff_difference_g,
)
from trustdyn.utils import (
    int_power,
    geometric_sum,
    geometric_sum_derivative,
    divided_difference_sum,
    divided_difference_sum_dx,
    bisect_increasing,
)

logger = logging.getLogger(__name__)

STABILITY_TOL = 1e-9
INTERIOR_SCAN_STEP = 1e-4
INTERIOR_ROOT_TOL = 1e-15


class InteriorStabilityError(RuntimeError):
    """Raised when an interior fixed point has no eigenvalue with positive real part."""


def _investor_balance(alpha: float, N: int) -> float:
    """(N-1) alpha - (N-2) alpha^(N-1) - 1; positive exactly when alpha > alpha*."""
    return (N - 1) * alpha - (N - 2) * int_power(alpha, N - 1) - 1.0


def alpha_star(N: int) -> float:
    """Investor fraction at which the P+U corner changes stability."""
    if N < 3:
        raise ValueError(f"N must exceed 2, got {N}")
    if N == 3:
        return 1.0
    peak = (1.0 / (N - 2)) ** (1.0 / (N - 2))
    return bisect_increasing(lambda a: _investor_balance(a, N), 0.0, peak)


def thresholds(params: GameParams) -> ThresholdSet:
    """The two punishment thresholds and alpha* that split the six cases.

    Args:
        params: Game parameters; only N, r, R_T and alpha are read

    Returns:
        ThresholdSet with lambda_low = r R_T S_alpha / (N - 1), lambda_high = r R_T
        and alpha_star
    """
    lambda_high = params.r * params.R_T
    lambda_low = lambda_high * investor_return_sum(params) / (params.N - 1)
    return ThresholdSet(alpha_star=alpha_star(params.N), lambda_low=lambda_low, lambda_high=lambda_high)


# Root functions along the edges x_i = alpha (phi1), x_t = 0 (phi2) and x_t = 1 - alpha (phi3)
def phi1(x, params: GameParams):
    """g on the edge x_i = alpha divided by alpha; increasing in x."""
    return (params.lam * geometric_sum(params.alpha + x, params.N - 2)
            - params.r * params.R_T * investor_return_sum(params))


def phi1_prime(x, params: GameParams):
    return params.lam * geometric_sum_derivative(params.alpha + x, params.N - 2)


def phi2(x, params: GameParams):
    """f on the edge x_t = 0."""
    return payoff_difference_f(x, 0.0, params)


def phi2_prime(x, params: GameParams):
    """d f / d x_i, which does not depend on x_t."""
    N, alpha = params.N, params.alpha
    z = 1.0 - alpha + x
    return (
        geometric_sum(z, N - 2)
        + x * geometric_sum_derivative(z, N - 2)
        - divided_difference_sum(alpha, x, N - 2)
        - x * divided_difference_sum_dx(alpha, x, N - 2)
        + (N - 1) * int_power(z, N - 2)
        - (N - 1) * int_power(x, N - 2)
    )


def phi3(x, params: GameParams):
    """f on the edge x_t = 1 - alpha."""
    return payoff_difference_f(x, 1.0 - params.alpha, params)


def _bracketed_root(func, lo: float, hi: float, params: GameParams):
    if func(lo, params) < 0.0 < func(hi, params):
        return bisect_increasing(lambda x: func(x, params), lo, hi)
    return None


def root_phi1(params: GameParams):
    """x_t of the P+T+U point on the edge x_i = alpha, or None when it does not exist."""
    return _bracketed_root(phi1, 0.0, 1.0 - params.alpha, params)


def root_phi2(params: GameParams):
    """x_i of the P+M+U point on the edge x_t = 0, or None when it does not exist."""
    return _bracketed_root(phi2, 0.0, params.alpha, params)


def root_phi3(params: GameParams) -> float:
    """x_i of the P+M+T point on the edge x_t = 1 - alpha; always exists."""
    root = _bracketed_root(phi3, 0.0, params.alpha, params)
    if root is None:
        raise RuntimeError(f"phi3 is not bracketed on [0, alpha] for {params}")
    return root


def jacobian(location, params: GameParams) -> tuple:
    """Analytic Jacobian of the reduced vector field at (x_i, x_t)."""
    x_i, x_t = location
    N, alpha, lam, t_v = params.N, params.alpha, params.lam, params.t_v
    f = payoff_difference_f(x_i, x_t, params)
    g = payoff_difference_g(x_i, x_t, params)
    f_x_t = (N - 1) * int_power(alpha + x_t, N - 2)
    g_x_i = lam * geometric_sum(alpha + x_t, N - 2)
    g_x_t = x_i * phi1_prime(x_t, params)

    j11 = lam * t_v / alpha * ((alpha - 2.0 * x_i) * f + x_i * (alpha - x_i) * phi2_prime(x_i, params))
    j12 = lam * t_v / alpha * x_i * (alpha - x_i) * f_x_t
    j21 = t_v / (1.0 - alpha) * x_t * (1.0 - alpha - x_t) * g_x_i
    j22 = t_v / (1.0 - alpha) * ((1.0 - alpha - 2.0 * x_t) * g + x_t * (1.0 - alpha - x_t) * g_x_t)
    return ((float(j11), float(j12)), (float(j21), float(j22)))


def eigenvalues_2x2(matrix) -> tuple:
    """Eigenvalues from trace and determinant, larger real part first."""
    (a, b), (c, d) = matrix
    trace = a + d
    det = a * d - b * c
    root = cmath.sqrt(trace * trace - 4.0 * det)
    return ((trace + root) / 2.0, (trace - root) / 2.0)


def classify_stability(report: EquilibriumReport, tol: float = STABILITY_TOL) -> str:
    real_parts = [value.real for value in report.eigenvalues]
    if all(part < -tol for part in real_parts):
        return STABLE
    if any(part > tol for part in real_parts):
        return UNSTABLE
    return MARGINAL


def _report(label: str, location, params: GameParams) -> EquilibriumReport:
    location = (float(location[0]), float(location[1]))
    matrix = jacobian(location, params)
    return EquilibriumReport(label=label, location=location, jacobian=matrix,
                             eigenvalues=eigenvalues_2x2(matrix))


def enumerate_boundary_equilibria(params: GameParams) -> list:
    """The four corners plus whichever edge fixed points exist, Jacobians filled, stability unset."""
    alpha = params.alpha
    trustees = 1.0 - alpha
    reports = [
        _report(MU, (0.0, 0.0), params),
        _report(MT, (0.0, trustees), params),
        _report(PU, (alpha, 0.0), params),
        _report(PT, (alpha, trustees), params),
    ]

    x_t1 = root_phi1(params)
    if x_t1 is not None:
        reports.append(_report(PTU, (alpha, x_t1), params))
    x_i1 = root_phi2(params)
    if x_i1 is not None:
        reports.append(_report(PMU, (x_i1, 0.0), params))
    reports.append(_report(PMT, (root_phi3(params), trustees), params))

    logger.debug(f"{len(reports)} boundary equilibria for {params}")
    return reports


def _interior_x_i(x_t, params: GameParams):
    """x_i solving g(x_i, x_t) = 0 for a given x_t."""
    temptation = params.alpha * params.r * params.R_T * investor_return_sum(params)
    return temptation / (params.lam * geometric_sum(params.alpha + x_t, params.N - 2))


def _interior_residual(x_t, params: GameParams):
    return payoff_difference_f(_interior_x_i(x_t, params), x_t, params)


def find_interior_fixed_points(params: GameParams, tol: float = STABILITY_TOL) -> list:
    """Every interior fixed point found by scanning x_t for sign changes along the curve g = 0.

    Each point is checked to have an eigenvalue with positive real part.
    """
    alpha = params.alpha
    count = int(np.ceil((1.0 - alpha) / INTERIOR_SCAN_STEP))
    grid = np.linspace(0.0, 1.0 - alpha, count + 1)[1:-1]
    x_i = _interior_x_i(grid, params)
    valid = (x_i > 0.0) & (x_i < alpha)
    residual = np.where(valid, _interior_residual(grid, params), np.nan)

    roots = []
    for k in range(grid.size):
        if not valid[k]:
            continue
        if residual[k] == 0.0:
            roots.append(float(grid[k]))
            continue
        if k + 1 < grid.size and valid[k + 1] and residual[k] * residual[k + 1] < 0.0:
            sign = 1.0 if residual[k] < 0.0 else -1.0
            roots.append(bisect_increasing(
                lambda x: sign * _interior_residual(x, params),
                float(grid[k]), float(grid[k + 1]), tol=INTERIOR_ROOT_TOL,
            ))

    reports = []
    for x_t in roots:
        location = (float(_interior_x_i(x_t, params)), x_t)
        report = _report(INTERIOR, location, params)
        report = report.with_stability(classify_stability(report, tol))
        residual_f = abs(float(payoff_difference_f(*location, params)))
        residual_g = abs(float(payoff_difference_g(*location, params)))
        logger.debug(f"Interior fixed point at {location}: |f|={residual_f:.2e}, |g|={residual_g:.2e}")
        if not any(value.real > 0.0 for value in report.eigenvalues):
            raise InteriorStabilityError(
                f"interior fixed point {location} has eigenvalues {report.eigenvalues} "
                "without a positive real part"
            )
        reports.append(report)
    return reports


def find_interior_fixed_point(params: GameParams, tol: float = STABILITY_TOL):
    """First interior fixed point in order of x_t, or None."""
    found = find_interior_fixed_points(params, tol)
    return found[0] if found else None


def analyze_equilibria(params: GameParams, tol: float = STABILITY_TOL, include_interior: bool = True) -> list:
    """Boundary equilibria with stability verdicts, followed by any interior points."""
    reports = [
        report.with_stability(classify_stability(report, tol))
        for report in enumerate_boundary_equilibria(params)
    ]
    if include_interior:
        reports.extend(find_interior_fixed_points(params, tol))
    return reports


def stable_points(reports: list) -> list:
    """(label, location) pairs of the stable reports, the form classify_terminal expects."""
    return [(report.label, report.location) for report in reports if report.stability == STABLE]
