"""Group payoffs, closed-form expected payoffs and a sampling oracle for them."""
import logging
import math
import numbers

import numpy as np

from trustdyn.models import (
    STRATEGIES,
    PUNISHING_INVESTOR,
    NORMAL_INVESTOR,
    TRUSTWORTHY_TRUSTEE,
    UNTRUSTWORTHY_TRUSTEE,
    GameParams,
    PopulationState,
    GroupComposition,
    ExpectedPayoffs,
    MonteCarloEstimate,
)
from trustdyn.utils import (
    int_power,
    geometric_sum,
    divided_difference_sum,
)

logger = logging.getLogger(__name__)

PARAM_KEYS = ("N", "alpha", "lambda", "r", "R_T", "t_v")

# Rows of co-player draws generated per batch when sampling
SAMPLE_CHUNK = 100_000


class ParameterError(ValueError):
    """Raised when game parameters violate the model constraints."""


def _number(raw_values: dict, key: str) -> float:
    if key not in raw_values or raw_values[key] is None:
        raise ParameterError(f"missing parameter: {key}")
    value = raw_values[key]
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ParameterError(f"{key} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ParameterError(f"{key} must be finite, got {value}")
    return value


def validate_params(raw_values: dict) -> GameParams:
    """Check raw numeric inputs against the model constraints and build GameParams.

    Accepts either ``lambda`` or ``lam`` for the punishment intensity and
    ``t_v`` defaults to 1. Any derived ``R_U`` entry is ignored and recomputed.
    """
    values = dict(raw_values)
    if "lambda" not in values and "lam" in values:
        values["lambda"] = values["lam"]
    values.setdefault("t_v", 1.0)

    n_value = _number(values, "N")
    if n_value != int(n_value):
        raise ParameterError(f"N must be an integer, got {values['N']!r}")
    N = int(n_value)
    if N < 3:
        raise ParameterError(f"N must exceed 2, got {N}")

    alpha = _number(values, "alpha")
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie strictly between 0 and 1, got {alpha}")

    lam = _number(values, "lambda")
    if not lam > 0.0:
        raise ParameterError(f"lambda must be positive, got {lam}")

    r = _number(values, "r")
    if not 0.0 < r < 1.0:
        raise ParameterError(
            f"r must lie strictly between 0 and 1 so that R_T < R_U < 2R_T, got {r}"
        )

    R_T = _number(values, "R_T")
    if not R_T > 1.0:
        raise ParameterError(f"R_T must exceed 1, got {R_T}")

    t_v = _number(values, "t_v")
    if not t_v > 0.0:
        raise ParameterError(f"t_v must be positive, got {t_v}")

    return GameParams(N=N, alpha=alpha, lam=lam, r=r, R_T=R_T, t_v=t_v)


def group_payoffs(strategy: str, n_p, n_m, n_t, n_u, params: GameParams):
    """Vectorised group payoff of a focal player over arrays of co-player counts."""
    n_p = np.asarray(n_p, dtype=float)
    n_m = np.asarray(n_m, dtype=float)
    n_t = np.asarray(n_t, dtype=float)
    n_u = np.asarray(n_u, dtype=float)
    N, t_v, lam = params.N, params.t_v, params.lam
    investors = n_p + n_m

    if strategy in (PUNISHING_INVESTOR, NORMAL_INVESTOR):
        trustees = (N - 1) - investors
        has_trustees = trustees > 0
        returned = params.R_T * n_t / np.where(has_trustees, trustees, 1.0) * t_v - t_v
        if strategy == PUNISHING_INVESTOR:
            # one budget per sanctioned group that is present
            budgets = (n_u > 0).astype(float) + (n_m > 0).astype(float)
            payoff = returned - lam * budgets * t_v
        else:
            payoff = returned - lam * n_p / (n_m + 1.0) * t_v
        return np.where(has_trustees, payoff, 0.0)

    # The focal is a trustee, so the trustee count N - investors is at least 1
    trustees = N - investors
    if strategy == TRUSTWORTHY_TRUSTEE:
        return params.R_T * investors / trustees * t_v
    if strategy == UNTRUSTWORTHY_TRUSTEE:
        untrustworthy = trustees - n_t
        return params.R_U * investors / trustees * t_v - lam * n_p / untrustworthy * t_v
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def group_payoff(focal_strategy: str, comp: GroupComposition, params: GameParams) -> float:
    """Payoff of one focal player in a group with the given co-players."""
    if min(comp.n_p, comp.n_m, comp.n_t, comp.n_u) < 0:
        raise ValueError(f"negative count in {comp}")
    if comp.total != params.N - 1:
        raise ValueError(
            f"composition has {comp.total} co-players, expected N-1 = {params.N - 1}"
        )
    payoff = group_payoffs(focal_strategy, comp.n_p, comp.n_m, comp.n_t, comp.n_u, params)
    return float(payoff)


def investor_return_sum(params: GameParams) -> float:
    """(1 - alpha^(N-1)) / (1 - alpha) evaluated as a finite sum."""
    return geometric_sum(params.alpha, params.N - 2)


def expected_payoffs(state: PopulationState, params: GameParams) -> ExpectedPayoffs:
    """Closed-form expected payoffs of the four strategies at a state."""
    N, alpha, lam, t_v = params.N, params.alpha, params.lam, params.t_v
    x_i, x_t = state.x_i, state.x_t
    z_i = 1.0 - alpha + x_i
    z_t = alpha + x_t
    s_alpha = investor_return_sum(params)
    all_investors = int_power(alpha, N - 1)

    trust_income = x_t * params.R_T * s_alpha * t_v
    f_P = (
        trust_income
        - (1.0 + 2.0 * lam) * (1.0 - all_investors) * t_v
        + lam * (int_power(z_i, N - 1) - int_power(x_i, N - 1)
                 + int_power(z_t, N - 1) - all_investors) * t_v
    )
    f_M = (
        trust_income
        - (1.0 - all_investors) * t_v
        - lam * x_i * geometric_sum(z_i, N - 2) * t_v
        + lam * x_i * divided_difference_sum(alpha, x_i, N - 2) * t_v
    )
    f_T = alpha * params.R_T * s_alpha * t_v
    f_U = alpha * params.R_U * s_alpha * t_v - lam * x_i * geometric_sum(z_t, N - 2) * t_v
    return ExpectedPayoffs(f_P=float(f_P), f_M=float(f_M), f_T=float(f_T), f_U=float(f_U))


def community_averages(state: PopulationState, payoffs: ExpectedPayoffs, params: GameParams) -> tuple:
    """Average payoff inside the investor and inside the trustee community."""
    phi_i = (state.x_i * payoffs.f_P + state.y_i * payoffs.f_M) / params.alpha
    phi_t = (state.x_t * payoffs.f_T + state.y_t * payoffs.f_U) / (1.0 - params.alpha)
    return phi_i, phi_t


def payoff_difference_f(x_i, x_t, params: GameParams):
    """f(x_i, x_t) with lambda * t_v * f = f_P - f_M, finite on the closed rectangle."""
    N, alpha = params.N, params.alpha
    z_i = 1.0 - alpha + x_i
    return (
        x_i * geometric_sum(z_i, N - 2)
        - x_i * divided_difference_sum(alpha, x_i, N - 2)
        + int_power(z_i, N - 1)
        - int_power(x_i, N - 1)
        + int_power(alpha + x_t, N - 1)
        + int_power(alpha, N - 1)
        - 2.0
    )


def payoff_difference_g(x_i, x_t, params: GameParams):
    """g(x_i, x_t) with t_v * g = f_T - f_U, finite on the closed rectangle."""
    temptation = params.alpha * params.r * params.R_T * investor_return_sum(params)
    return params.lam * x_i * geometric_sum(params.alpha + x_t, params.N - 2) - temptation


def _composition_probabilities(state: PopulationState) -> np.ndarray:
    probs = np.array([state.x_i, state.y_i, state.x_t, state.y_t], dtype=float)
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def _sample_payoffs(rng, strategy: str, probs: np.ndarray, sample_count: int,
                    params: GameParams) -> np.ndarray:
    chunks = []
    remaining = sample_count
    while remaining > 0:
        rows = min(remaining, SAMPLE_CHUNK)
        # N-1 independent categorical draws per group
        draws = rng.choice(4, size=(rows, params.N - 1), p=probs)
        counts = [(draws == category).sum(axis=1) for category in range(4)]
        chunks.append(group_payoffs(strategy, *counts, params))
        remaining -= rows
    return np.concatenate(chunks)


def mc_expected_payoffs(state: PopulationState, params: GameParams, sample_count: int,
                        seed: int) -> MonteCarloEstimate:
    """Estimate the expected payoffs by sampling groups; reproducible for a given seed."""
    if sample_count < 1:
        raise ValueError(f"sample_count must be at least 1, got {sample_count}")

    rng = np.random.default_rng(seed)
    probs = _composition_probabilities(state)
    means = {}
    errors = {}
    for strategy in STRATEGIES:
        samples = _sample_payoffs(rng, strategy, probs, sample_count, params)
        means[strategy] = float(samples.mean())
        if sample_count > 1:
            errors[strategy] = float(samples.std(ddof=1) / math.sqrt(sample_count))
        else:
            errors[strategy] = 0.0

    logger.debug(f"Sampled {sample_count} groups per strategy at {state.location} (seed {seed})")
    return MonteCarloEstimate(
        means=ExpectedPayoffs(means["P"], means["M"], means["T"], means["U"]),
        std_errors=ExpectedPayoffs(errors["P"], errors["M"], errors["T"], errors["U"]),
        sample_count=sample_count,
        seed=seed,
    )


def exact_expected_payoffs(state: PopulationState, params: GameParams) -> ExpectedPayoffs:
    """Expected payoffs by summing over every co-player composition with multinomial weights."""
    n = params.N - 1
    p_probs = _composition_probabilities(state)
    compositions = []
    weights = []
    for n_p in range(n + 1):
        for n_m in range(n - n_p + 1):
            for n_t in range(n - n_p - n_m + 1):
                n_u = n - n_p - n_m - n_t
                multiplicity = (math.comb(n, n_p) * math.comb(n - n_p, n_m)
                                * math.comb(n - n_p - n_m, n_t))
                weight = (multiplicity
                          * int_power(p_probs[0], n_p) * int_power(p_probs[1], n_m)
                          * int_power(p_probs[2], n_t) * int_power(p_probs[3], n_u))
                compositions.append((n_p, n_m, n_t, n_u))
                weights.append(weight)

    counts = np.array(compositions, dtype=float).T
    weights = np.array(weights, dtype=float)
    totals = {
        strategy: float(np.dot(weights, group_payoffs(strategy, *counts, params)))
        for strategy in STRATEGIES
    }
    return ExpectedPayoffs(totals["P"], totals["M"], totals["T"], totals["U"])
