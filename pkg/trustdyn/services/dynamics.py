"""Reduced replicator vector field, RK4 integration and terminal classification."""
import logging
import math

import numpy as np

from trustdyn.models import (
    GameParams,
    PopulationState,
    VectorField2,
    IntegratorConfig,
    Trajectory,
)
from trustdyn.services.payoffs import (
    expected_payoffs,
    community_averages,
    payoff_difference_f,
    payoff_difference_g,
)

logger = logging.getLogger(__name__)


class AmbiguousTerminalError(ValueError):
    """Raised when a terminal state lies within eps of more than one stable point."""


def rhs_arrays(x_i, x_t, params: GameParams):
    """Factored vector field on floats or numpy arrays; returns (dx_i, dx_t)."""
    alpha = params.alpha
    dx_i = params.lam * params.t_v / alpha * x_i * (alpha - x_i) * payoff_difference_f(x_i, x_t, params)
    dx_t = params.t_v / (1.0 - alpha) * x_t * (1.0 - alpha - x_t) * payoff_difference_g(x_i, x_t, params)
    return dx_i, dx_t


def replicator_rhs(state: PopulationState, params: GameParams) -> VectorField2:
    """Time derivative of (x_i, x_t); dx_t > 0 exactly when trustworthy trustees out-earn untrustworthy ones."""
    dx_i, dx_t = rhs_arrays(state.x_i, state.x_t, params)
    return VectorField2(dx_i=float(dx_i), dx_t=float(dx_t))


def full_replicator_rhs(state: PopulationState, params: GameParams) -> tuple:
    """Unreduced four-strategy system (dx_i, dy_i, dx_t, dy_t) built from the expected payoffs."""
    payoffs = expected_payoffs(state, params)
    phi_i, phi_t = community_averages(state, payoffs, params)
    return (
        state.x_i * (payoffs.f_P - phi_i),
        state.y_i * (payoffs.f_M - phi_i),
        state.x_t * (payoffs.f_T - phi_t),
        state.y_t * (payoffs.f_U - phi_t),
    )


def _rk4_step(x_i, x_t, k1, params: GameParams, h: float):
    """One classical RK4 step given the slope k1 already evaluated at (x_i, x_t)."""
    k1_i, k1_t = k1
    k2_i, k2_t = rhs_arrays(x_i + 0.5 * h * k1_i, x_t + 0.5 * h * k1_t, params)
    k3_i, k3_t = rhs_arrays(x_i + 0.5 * h * k2_i, x_t + 0.5 * h * k2_t, params)
    k4_i, k4_t = rhs_arrays(x_i + h * k3_i, x_t + h * k3_t, params)
    next_i = x_i + h / 6.0 * (k1_i + 2.0 * k2_i + 2.0 * k3_i + k4_i)
    next_t = x_t + h / 6.0 * (k1_t + 2.0 * k2_t + 2.0 * k3_t + k4_t)
    return next_i, next_t


def _clamp(x_i, x_t, params: GameParams, clamp_eps: float):
    """Project back onto the rectangle; exits larger than clamp_eps are logged."""
    upper_i = params.alpha
    upper_t = 1.0 - params.alpha
    overshoot = max(
        float(np.max(-x_i)), float(np.max(x_i - upper_i)),
        float(np.max(-x_t)), float(np.max(x_t - upper_t)),
    )
    if overshoot > clamp_eps:
        logger.warning(f"Step left the state rectangle by {overshoot:.3e} (clamp_eps={clamp_eps:.1e})")
    return np.clip(x_i, 0.0, upper_i), np.clip(x_t, 0.0, upper_t)


def _clamp_point(x_i: float, x_t: float, params: GameParams, clamp_eps: float) -> tuple:
    """Scalar counterpart of _clamp for single trajectories."""
    upper_i = params.alpha
    upper_t = 1.0 - params.alpha
    overshoot = max(-x_i, x_i - upper_i, -x_t, x_t - upper_t)
    if overshoot > clamp_eps:
        logger.warning(f"Step left the state rectangle by {overshoot:.3e} (clamp_eps={clamp_eps:.1e})")
    return min(max(x_i, 0.0), upper_i), min(max(x_t, 0.0), upper_t)


def integrate_batch(starts_x_i, starts_x_t, params: GameParams, cfg: IntegratorConfig) -> dict:
    """Integrate many starts at once, retiring each as soon as its vector field norm drops below eps.

    Returns a dict of numpy arrays: x_i, x_t (terminal states), converged (bool) and steps.
    """
    x_i = np.array(starts_x_i, dtype=float, copy=True).reshape(-1)
    x_t = np.array(starts_x_t, dtype=float, copy=True).reshape(-1)
    if x_i.shape != x_t.shape:
        raise ValueError("starts_x_i and starts_x_t must have the same length")

    converged = np.zeros(x_i.shape, dtype=bool)
    steps = np.zeros(x_i.shape, dtype=np.int64)
    active = np.arange(x_i.size)
    max_steps = int(math.ceil(cfg.t_max / cfg.step))

    step = 0
    while active.size:
        cur_i, cur_t = x_i[active], x_t[active]
        k1 = rhs_arrays(cur_i, cur_t, params)
        done = np.maximum(np.abs(k1[0]), np.abs(k1[1])) < cfg.convergence_eps
        if done.any():
            converged[active[done]] = True
            steps[active[done]] = step
            keep = ~done
            active = active[keep]
            cur_i, cur_t = cur_i[keep], cur_t[keep]
            k1 = (k1[0][keep], k1[1][keep])
            if not active.size:
                break
        if step >= max_steps:
            steps[active] = step
            break

        next_i, next_t = _rk4_step(cur_i, cur_t, k1, params, cfg.step)
        x_i[active], x_t[active] = _clamp(next_i, next_t, params, cfg.clamp_eps)
        step += 1

    logger.debug(
        f"Batch of {x_i.size}: {int(converged.sum())} converged, "
        f"{int((~converged).sum())} hit t_max after {step} steps"
    )
    return {"x_i": x_i, "x_t": x_t, "converged": converged, "steps": steps}


def integrate(start: PopulationState, params: GameParams, cfg: IntegratorConfig,
              stable_points=None, classify_eps: float = 1e-4) -> Trajectory:
    """Integrate one trajectory with fixed-step RK4, keeping a decimated sample record.

    Every ``sample_every``-th step is recorded; whenever the record would exceed
    ``max_samples`` every second sample is dropped and the stride doubles. The
    terminal state is always the last sample. When ``stable_points`` is given
    the terminal of a converged run is labelled with classify_terminal.
    """
    alpha = params.alpha
    x_i, x_t = float(start.x_i), float(start.x_t)
    stride = cfg.sample_every
    max_steps = int(math.ceil(cfg.t_max / cfg.step))
    samples = [(0.0, x_i, x_t)]

    step = 0
    converged = False
    while True:
        k1 = rhs_arrays(x_i, x_t, params)
        if max(abs(k1[0]), abs(k1[1])) < cfg.convergence_eps:
            converged = True
            break
        if step >= max_steps:
            break
        x_i, x_t = _clamp_point(*_rk4_step(x_i, x_t, k1, params, cfg.step), params, cfg.clamp_eps)
        step += 1
        if step % stride == 0:
            samples.append((step * cfg.step, x_i, x_t))
            if len(samples) > cfg.max_samples:
                samples = samples[::2]
                stride *= 2

    t_end = step * cfg.step
    if samples[-1][0] != t_end:
        samples.append((t_end, x_i, x_t))

    records = tuple((t, PopulationState(xi, xt, alpha)) for t, xi, xt in samples)
    terminal = records[-1][1]
    label = None
    if converged and stable_points:
        label = classify_terminal(terminal, stable_points, classify_eps)

    logger.debug(f"Trajectory from {start.location}: {step} steps, converged={converged}, terminal={terminal.location}")
    return Trajectory(
        samples=records,
        terminal=terminal,
        converged=converged,
        steps=step,
        sample_every=stride,
        terminal_label=label,
    )


def classify_terminal(state: PopulationState, stable_points, eps: float):
    """Label of the unique stable point within Euclidean distance eps of state, or None.

    ``stable_points`` is a sequence of (label, (x_i, x_t)) pairs.
    """
    labels = classify_terminals([state.x_i], [state.x_t], stable_points, eps)
    return labels[0]


def classify_terminals(x_i, x_t, stable_points, eps: float) -> list:
    """Vectorised classify_terminal over arrays of terminal coordinates."""
    stable_points = list(stable_points)
    if not stable_points:
        raise ValueError("stable_points must not be empty")

    x_i = np.asarray(x_i, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    hits = np.zeros(x_i.shape, dtype=int)
    labels = np.full(x_i.shape, None, dtype=object)
    for label, (p_i, p_t) in stable_points:
        near = np.hypot(x_i - p_i, x_t - p_t) <= eps
        hits += near
        labels[near] = label

    if (hits > 1).any():
        index = int(np.argmax(hits > 1))
        raise AmbiguousTerminalError(
            f"state ({x_i[index]}, {x_t[index]}) lies within eps={eps} of several stable points; "
            "reduce eps"
        )
    return labels.tolist()
