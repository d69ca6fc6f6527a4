"""Device models integrated at the plant time step.

Generator: controllable voltage source behind an RL line, current-tracking
PI loop around the commanded power. Battery: algebraic power exchange with
SoC bookkeeping and Arrhenius-form capacity-loss accumulation. Flywheel:
torque-driven rotational store. All step functions are pure: state in,
state out.

The per-tick loops (`advance_pgm_tick`, `advance_pcm_tick`) advance a
device through the plant substeps of one EM tick and are the hot path of a
simulation; their kernels are numba-compiled (see `_jit`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from ._jit import njit
from .config import BattParams, DegradationParams, FlywheelParams, GenParams, zeta_effective


class SimulationFault(RuntimeError):
    """A device produced a non-finite state or an EM tick failed."""

    def __init__(self, device: str, detail: str, tick: int | None = None):
        self.device = device
        self.tick = tick
        msg = f"{device}: {detail}"
        if tick is not None:
            msg += f" (tick {tick})"
        super().__init__(msg)


@dataclass(frozen=True)
class GenState:
    i_g: float = 0.0  # A
    pi_integral: float = 0.0  # A*s of accumulated current error
    v_c: float | None = None  # V, shunt-cap variant only


@dataclass(frozen=True)
class SocState:
    q: float
    clamped: bool = False  # last update hit the [0, 1] physical limit


@dataclass(frozen=True)
class DegradationState:
    """Accumulated |i|^rho throughput and the capacity loss it implies."""

    params: DegradationParams
    throughput: float = 0.0  # integral of |i_b|^rho dt
    q_loss_as: float = 0.0  # A*s


@dataclass(frozen=True)
class FlywheelState:
    omega: float  # rad/s


@njit(cache=True)
def _pgm_tick_kernel(i_g, integral, i_ref, r, l, kp, ki, dt, n):
    for _ in range(n):
        err = i_ref - i_g
        integral = integral + err * dt
        dv = kp * err + ki * integral
        i_g = i_g + dt * (dv - r * i_g) / l
    return i_g, integral


@njit(cache=True)
def _pcm_tick_kernel(q, p_cmd, v_bus, r_b, c1, c2, cap, dt, n, rho):
    i_b = 0.0
    throughput = 0.0
    clamped = False
    for _ in range(n):
        v_oc = c1 * q + c2
        v_b = (v_bus * v_bus - p_cmd * r_b - v_bus * v_oc) / v_bus
        i_b = (v_bus - v_b - v_oc) / r_b
        q = q - dt * i_b / cap
        if q < 0.0:
            q = 0.0
            clamped = True
        elif q > 1.0:
            q = 1.0
            clamped = True
        a = abs(i_b)
        if rho == 1.0:
            w = a
        elif rho == 0.5:
            w = math.sqrt(a)
        else:
            w = a**rho
        throughput = throughput + w * dt
    return q, i_b, throughput, clamped


def step_pgm(
    params: GenParams, state: GenState, p_cmd: float, v_bus: float, dt: float
) -> tuple[GenState, float]:
    """One plant step of the generator current loop.

    The commanded power maps to a current reference i_ref = p_cmd / v_bus,
    a PI law produces the voltage differential that drives the RL branch,
    and the branch current is advanced by forward Euler. Returns the new
    state and the power actually injected, v_bus * i_g.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    if not math.isfinite(p_cmd):
        raise ValueError("p_cmd must be finite")
    i_ref = p_cmd / v_bus
    i_g, integral = _pgm_tick_kernel(
        state.i_g,
        state.pi_integral,
        i_ref,
        params.resistance_ohm,
        params.inductance_h,
        params.kp,
        params.ki,
        dt,
        1,
    )
    if not (math.isfinite(i_g) and math.isfinite(integral)):
        raise SimulationFault(params.name, "generator state diverged")
    return GenState(i_g=i_g, pi_integral=integral, v_c=state.v_c), v_bus * i_g


def advance_pgm_tick(
    params: GenParams,
    state: GenState,
    p_cmd: float,
    v_bus: float,
    dt: float,
    substeps: int,
) -> tuple[GenState, float]:
    """Advance the generator through `substeps` plant steps holding p_cmd."""
    i_ref = p_cmd / v_bus
    i_g, integral = _pgm_tick_kernel(
        state.i_g,
        state.pi_integral,
        i_ref,
        params.resistance_ohm,
        params.inductance_h,
        params.kp,
        params.ki,
        dt,
        substeps,
    )
    if not (math.isfinite(i_g) and math.isfinite(integral)):
        raise SimulationFault(params.name, "generator state diverged")
    return GenState(i_g=i_g, pi_integral=integral, v_c=state.v_c), v_bus * i_g


def step_pcm(
    params: BattParams, soc: SocState, p_cmd: float, v_bus: float, dt: float
) -> tuple[float, float, SocState]:
    """One plant step of the battery power exchange.

    Returns (v_b, i_b, new SoC state). The internal voltage command v_b is
    the value that realizes p_cmd through the branch resistance given the
    open-circuit voltage v_oc = c1*q + c2; the resulting branch current is
    i_b = (v_bus - v_b - v_oc) / r_b. SoC integrates -i_b/Q and is clamped
    to the physical [0, 1] with the clamp recorded on the returned state.
    """
    if v_bus <= 0.0:
        raise ValueError("invalid bus voltage: v_bus must be > 0")
    q = soc.q
    v_oc = params.voc_c1_v * q + params.voc_c2_v
    v_b = (v_bus * v_bus - p_cmd * params.resistance_ohm - v_bus * v_oc) / v_bus
    i_b = (v_bus - v_b - v_oc) / params.resistance_ohm
    q_new = q - dt * i_b / params.capacity_as
    clamped = False
    if q_new < 0.0:
        q_new, clamped = 0.0, True
    elif q_new > 1.0:
        q_new, clamped = 1.0, True
    return v_b, i_b, SocState(q=q_new, clamped=clamped)


def advance_pcm_tick(
    params: BattParams,
    soc: SocState,
    deg: DegradationState,
    p_cmd: float,
    v_bus: float,
    dt: float,
    substeps: int,
) -> tuple[SocState, DegradationState, float]:
    """Advance battery SoC and degradation through one EM tick.

    Returns the new SoC state, the new degradation state and the branch
    current over the tick.
    """
    if v_bus <= 0.0:
        raise ValueError("invalid bus voltage: v_bus must be > 0")
    q, i_b, tp_inc, clamped = _pcm_tick_kernel(
        soc.q,
        p_cmd,
        v_bus,
        params.resistance_ohm,
        params.voc_c1_v,
        params.voc_c2_v,
        params.capacity_as,
        dt,
        substeps,
        deg.params.throughput_exponent,
    )
    if not (math.isfinite(q) and math.isfinite(i_b)):
        raise SimulationFault(params.name, "battery state diverged")
    throughput = deg.throughput + tp_inc
    new_deg = replace(
        deg, throughput=throughput, q_loss_as=zeta_effective(deg.params) * throughput
    )
    return SocState(q=q, clamped=clamped), new_deg, i_b


def soc_discrete_update(q: float, p_b: float, t_s: float, capacity_as: float, v: float) -> float:
    """Pure discrete SoC update q - (T_s / (Q v)) p_b, no clamping.

    Shared verbatim with the MPC constraint builder so the optimizer's SoC
    chain and the plant bookkeeping cannot drift apart.
    """
    return q - (t_s / (capacity_as * v)) * p_b


def update_degradation(deg: DegradationState, i_b: float, dt: float) -> DegradationState:
    """Accumulate |i_b|^rho over dt and refresh the implied capacity loss."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    rho = deg.params.throughput_exponent
    a = abs(i_b)
    w = a if rho == 1.0 else (math.sqrt(a) if rho == 0.5 else a**rho)
    throughput = deg.throughput + w * dt
    return replace(
        deg, throughput=throughput, q_loss_as=zeta_effective(deg.params) * throughput
    )


def capacity_loss_percent(deg: DegradationState, capacity_as: float) -> float:
    """Remaining-capacity percentage (Q - Q_L) / Q * 100.

    Kept exactly in this form, including the convention that zero loss
    reads 100. It tracks capacity lost during operation, not end of life.
    """
    if capacity_as <= 0.0:
        raise ValueError("capacity must be > 0")
    return (capacity_as - deg.q_loss_as) / capacity_as * 100.0


def step_flywheel(
    params: FlywheelParams, state: FlywheelState, tau_cmd: float, dt: float
) -> tuple[FlywheelState, float, float]:
    """Advance the flywheel one step under an applied torque.

    Returns (new state, electrical power tau*omega', stored-energy SoC
    omega'^2 / omega_max^2). Torque commands outside +/- tau_max are
    rejected.
    """
    if abs(tau_cmd) > params.tau_max_nm:
        raise ValueError(
            f"{params.name}: torque command {tau_cmd:g} exceeds limit {params.tau_max_nm:g}"
        )
    omega = state.omega + (tau_cmd / params.inertia_kgm2) * dt
    omega = min(max(omega, 0.0), params.omega_max_rad_s)
    p_f = tau_cmd * omega
    soc_f = (omega / params.omega_max_rad_s) ** 2
    return FlywheelState(omega=omega), p_f, soc_f


def flywheel_energy(params: FlywheelParams, state: FlywheelState) -> float:
    """Stored rotational energy 0.5 * I * omega^2 in joules."""
    return 0.5 * params.inertia_kgm2 * state.omega**2
