"""Device-level controllers.

A generic PI step with optional anti-windup, an adaptive generator voltage
controller that learns the RL branch parameters online, and the dq-frame
reference-current computation for active/reactive power commands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit

DEFAULT_ADAPTIVE_K = 10.0
DEFAULT_ADAPTIVE_ALPHA = 5.0


@dataclass(frozen=True)
class PiState:
    k_p: float
    k_i: float
    integral: float = 0.0
    windup_limit: float | None = None  # symmetric bound on |integral|


def pi_step(state: PiState, error: float, dt: float) -> tuple[float, PiState]:
    """u = k_p*e + k_i*integral', with integral' = integral + e*dt."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    integral = state.integral + error * dt
    if state.windup_limit is not None:
        lim = state.windup_limit
        integral = min(max(integral, -lim), lim)
    u = state.k_p * error + state.k_i * integral
    return u, PiState(
        k_p=state.k_p, k_i=state.k_i, integral=integral, windup_limit=state.windup_limit
    )


@dataclass(frozen=True)
class AdaptiveState:
    """Estimates and filtered-error bookkeeping of the adaptive controller."""

    theta_hat: tuple[float, float] = (0.0, 0.0)  # (resistance, inductance) estimates
    eta: float = 0.0
    e: float = 0.0
    k: float = DEFAULT_ADAPTIVE_K
    alpha: float = DEFAULT_ADAPTIVE_ALPHA


def adaptive_dcgen_step(
    state: AdaptiveState,
    i_g: float,
    i_ref: float,
    v_c: float,
    v_ref: float,
    c_g: float,
    dt: float,
) -> tuple[float, AdaptiveState]:
    """One update of the parameter-learning generator voltage controller.

    The voltage error derivative is reconstructed from the capacitor
    current balance, e_dot = (i_g - i_ref) / c_g, rather than by numerical
    differentiation. With regressor Y = [-i_g, alpha*(i_g - i_ref)] the
    control is v_g = v_c - Y theta_hat - k*eta and the estimates integrate
    theta_hat' = Y^T eta.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    e = v_c - v_ref
    e_dot = (i_g - i_ref) / c_g
    eta = e_dot + state.alpha * e
    y0 = -i_g
    y1 = state.alpha * (i_g - i_ref)
    th0, th1 = state.theta_hat
    v_g = v_c - (y0 * th0 + y1 * th1) - state.k * eta
    th0 += y0 * eta * dt
    th1 += y1 * eta * dt
    return v_g, AdaptiveState(
        theta_hat=(th0, th1), eta=eta, e=e, k=state.k, alpha=state.alpha
    )


@njit(cache=True)
def _adaptive_loop_kernel(
    r_g, l_g, c_g, v_ref, i_ref, k, alpha, dt, n, i_g0, v_c0, th0, th1, stride
):
    n_out = n // stride + 1
    t_out = np.empty(n_out)
    e_out = np.empty(n_out)
    th_out = np.empty((n_out, 2))
    i_g = i_g0
    v_c = v_c0
    j = 0
    for step in range(n):
        if step % stride == 0:
            t_out[j] = step * dt
            e_out[j] = v_c - v_ref
            th_out[j, 0] = th0
            th_out[j, 1] = th1
            j += 1
        e = v_c - v_ref
        e_dot = (i_g - i_ref) / c_g
        eta = e_dot + alpha * e
        y0 = -i_g
        y1 = alpha * (i_g - i_ref)
        v_g = v_c - (y0 * th0 + y1 * th1) - k * eta
        th0 = th0 + y0 * eta * dt
        th1 = th1 + y1 * eta * dt
        # true plant, parameters hidden from the controller
        di = (-r_g * i_g + v_g - v_c) / l_g
        dv = (i_g - i_ref) / c_g
        i_g = i_g + dt * di
        v_c = v_c + dt * dv
    return t_out[:j], e_out[:j], th_out[:j]


def simulate_adaptive_dcgen(
    r_g: float,
    l_g: float,
    c_g: float,
    v_ref: float,
    i_load: float,
    duration: float,
    dt: float,
    k: float = DEFAULT_ADAPTIVE_K,
    alpha: float = DEFAULT_ADAPTIVE_ALPHA,
    i_g0: float = 0.0,
    v_c0: float = 0.0,
    theta0: tuple[float, float] = (0.0, 0.0),
    sample_stride: int = 1,
) -> dict:
    """Closed loop of the adaptive controller against the true RL+C plant.

    The plant's (r_g, l_g) are hidden from the controller, which starts
    from the estimates in ``theta0``. Returns sampled time, voltage error
    and estimate trajectories.
    """
    n = int(round(duration / dt))
    t, e, th = _adaptive_loop_kernel(
        r_g, l_g, c_g, v_ref, i_load, k, alpha, dt, n,
        i_g0, v_c0, theta0[0], theta0[1], sample_stride,
    )
    if not np.all(np.isfinite(e)):
        raise RuntimeError("adaptive closed loop diverged")
    return {"t": t, "e": e, "theta_hat": th}


def dq_current_reference(p: float, q: float, v_dq) -> np.ndarray:
    """Reference current realizing active power p and reactive power q.

    i = 1/(v_d^2 + v_q^2) [[v_d, -v_q], [v_q, v_d]] [p, q], so that
    p = v_d i_d + v_q i_q and q = v_d i_q - v_q i_d hold exactly.
    """
    v_d, v_q = float(v_dq[0]), float(v_dq[1])
    norm2 = v_d * v_d + v_q * v_q
    if norm2 == 0.0 or not math.isfinite(norm2):
        raise ValueError("grid voltage is zero; reference current is singular")
    i_d = (v_d * p - v_q * q) / norm2
    i_q = (v_q * p + v_d * q) / norm2
    return np.array([i_d, i_q])
