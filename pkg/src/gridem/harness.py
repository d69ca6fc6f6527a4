"""Co-simulation driver: two-rate plant/EM loop, metrics, trace files.

Each EM tick samples the load and the device states, solves the
energy-management problem (centralized or distributed per config), applies
the first step of every horizon profile as the device command, and
advances the plant through the substeps of the tick while accumulating
battery degradation from the realized currents.

Trace rows are written at the EM cadence. SoC columns hold the tick-start
measurement the optimizer saw (so re-integrating the traced battery powers
through `soc_discrete_update` reproduces the SoC column); capacity-loss
columns hold the loss accumulated through the end of the tick.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from statistics import median

import numpy as np

from .config import MW, PulseLoadSpec, ScenarioConfig
from .em_central import Allocation, CentralEm, Measurements
from .em_distributed import DistributedEm
from .plant import (
    DegradationState,
    GenState,
    SimulationFault,
    SocState,
    advance_pcm_tick,
    advance_pgm_tick,
    capacity_loss_percent,
    step_pcm,
    step_pgm,
    update_degradation,
)

OK_STATUSES = ("optimal", "converged")


def pulse_load_profile(spec: PulseLoadSpec, t: float) -> float:
    """Demand at time t: base plus all pulses active on [start, end)."""
    if t < 0.0 or t > spec.total_duration_s:
        raise ValueError(
            f"t={t:g} outside the profile domain [0, {spec.total_duration_s:g}]"
        )
    total = spec.base_w
    for p in spec.pulses:
        if p.start_s <= t < p.end_s:
            total += p.amplitude_w
    return total


@dataclass
class SimulationTrace:
    t: np.ndarray  # (n,)
    p_l: np.ndarray  # (n,) W
    p_total: np.ndarray  # (n,) W, commanded supply
    p_g: np.ndarray  # (n, n_g) W
    p_b: np.ndarray  # (n, n_b) W
    q: np.ndarray  # (n, n_b) tick-start SoC
    q_loss: np.ndarray  # (n, n_b) A*s, through end of tick
    iters: np.ndarray  # (n,)
    residual: np.ndarray  # (n,) W, solver-reported balance residual
    gen_names: tuple[str, ...] = ()
    batt_names: tuple[str, ...] = ()
    batt_capacity_as: tuple[float, ...] | None = None

    @property
    def n_rows(self) -> int:
        return len(self.t)


@dataclass
class Metrics:
    gen_energy_wh: dict
    batt_energy_wh: dict  # signed
    batt_abs_energy_wh: dict  # integral of |p|, the utilized energy
    rms_tracking_error_w: float
    capacity_loss_pct: dict
    throughput_as: dict
    soc_final: dict
    dual_iterations: dict
    clamp_events: int = 0
    fallback_ticks: int = 0

    def to_dict(self) -> dict:
        return {
            "gen_energy_wh": dict(self.gen_energy_wh),
            "batt_energy_wh": dict(self.batt_energy_wh),
            "batt_abs_energy_wh": dict(self.batt_abs_energy_wh),
            "rms_tracking_error_w": self.rms_tracking_error_w,
            "capacity_loss_pct": dict(self.capacity_loss_pct),
            "throughput_as": dict(self.throughput_as),
            "soc_final": dict(self.soc_final),
            "dual_iterations": dict(self.dual_iterations),
            "clamp_events": self.clamp_events,
            "fallback_ticks": self.fallback_ticks,
        }


def make_em(cfg: ScenarioConfig):
    return DistributedEm(cfg) if cfg.em_mode == "distributed" else CentralEm(cfg)


def run_scenario(
    cfg: ScenarioConfig,
    tick_hook=None,
    plant_trace_file=None,
) -> tuple[SimulationTrace, Metrics]:
    """Run one deterministic scenario; returns the trace and its metrics.

    ``tick_hook(k, measurements, allocation)`` is called after every EM
    solve. ``plant_trace_file`` (an open text file) switches the plant to
    per-substep stepping and records plant-rate rows into it.
    """
    spec = cfg.load_spec
    t_s = cfg.mpc_period_s
    n_ticks = int(round(spec.total_duration_s / t_s))
    if n_ticks < 1:
        raise ValueError("profile shorter than one EM tick")
    n_sub = cfg.substeps_per_tick
    gens = cfg.fleet.generators
    batts = cfg.fleet.batteries
    n_g, n_b = len(gens), len(batts)

    em = make_em(cfg)
    gen_states = [GenState() for _ in gens]
    soc_states = [SocState(q=b.soc_initial) for b in batts]
    deg_states = [DegradationState(params=cfg.degradation) for _ in batts]
    prev_g = np.zeros(n_g)
    prev_b = np.zeros(n_b)

    t_col = np.empty(n_ticks)
    pl_col = np.empty(n_ticks)
    ptot_col = np.empty(n_ticks)
    pg_col = np.empty((n_ticks, n_g))
    pb_col = np.empty((n_ticks, n_b))
    q_col = np.empty((n_ticks, n_b))
    ql_col = np.empty((n_ticks, n_b))
    it_col = np.empty(n_ticks)
    res_col = np.empty(n_ticks)

    failures = 0
    clamp_events = 0
    fallback_ticks = 0
    plant_writer = csv.writer(plant_trace_file, lineterminator="\n") if plant_trace_file else None
    if plant_writer:
        plant_writer.writerow(
            ["t"]
            + [f"i_g_{i + 1}" for i in range(n_g)]
            + [f"p_act_{i + 1}" for i in range(n_g)]
            + [f"q_{j + 1}" for j in range(n_b)]
        )

    for k in range(n_ticks):
        t = k * t_s
        p_l = pulse_load_profile(spec, t)
        meas = Measurements(
            p_g_prev=tuple(prev_g),
            p_b_prev=tuple(prev_b),
            q=tuple(s.q for s in soc_states),
            p_l=p_l,
        )
        alloc = em.solve(meas)
        if alloc.status not in OK_STATUSES:
            failures += 1
            if failures > cfg.em_failure_budget:
                raise SimulationFault(
                    "em", f"solver returned status '{alloc.status}'", tick=k
                )
        if alloc.fallback:
            fallback_ticks += 1
        if tick_hook is not None:
            tick_hook(k, meas, alloc)
        cmds_g = alloc.gen_commands
        cmds_b = alloc.batt_commands

        t_col[k] = t
        pl_col[k] = p_l
        ptot_col[k] = cmds_g.sum() + cmds_b.sum()
        pg_col[k] = cmds_g
        pb_col[k] = cmds_b
        q_col[k] = [s.q for s in soc_states]
        it_col[k] = alloc.iterations
        res_col[k] = alloc.balance_residual_w

        if plant_writer is None:
            for i in range(n_g):
                gen_states[i], _ = advance_pgm_tick(
                    gens[i], gen_states[i], cmds_g[i], cfg.v_bus_v,
                    cfg.plant_period_s, n_sub,
                )
            for j in range(n_b):
                soc_states[j], deg_states[j], _ = advance_pcm_tick(
                    batts[j], soc_states[j], deg_states[j], cmds_b[j],
                    cfg.v_bus_v, cfg.plant_period_s, n_sub,
                )
                if soc_states[j].clamped:
                    clamp_events += 1
        else:
            for s in range(n_sub):
                row = [format(t + s * cfg.plant_period_s, ".17g")]
                p_acts = []
                for i in range(n_g):
                    gen_states[i], p_act = step_pgm(
                        gens[i], gen_states[i], cmds_g[i], cfg.v_bus_v,
                        cfg.plant_period_s,
                    )
                    p_acts.append(p_act)
                row += [format(st.i_g, ".17g") for st in gen_states]
                row += [format(p, ".17g") for p in p_acts]
                for j in range(n_b):
                    _, i_b, soc_states[j] = step_pcm(
                        batts[j], soc_states[j], cmds_b[j], cfg.v_bus_v,
                        cfg.plant_period_s,
                    )
                    deg_states[j] = update_degradation(
                        deg_states[j], i_b, cfg.plant_period_s
                    )
                    if soc_states[j].clamped:
                        clamp_events += 1
                row += [format(st.q, ".17g") for st in soc_states]
                plant_writer.writerow(row)
        ql_col[k] = [d.q_loss_as for d in deg_states]
        prev_g = np.asarray(cmds_g, dtype=float)
        prev_b = np.asarray(cmds_b, dtype=float)

    trace = SimulationTrace(
        t=t_col,
        p_l=pl_col,
        p_total=ptot_col,
        p_g=pg_col,
        p_b=pb_col,
        q=q_col,
        q_loss=ql_col,
        iters=it_col,
        residual=res_col,
        gen_names=tuple(g.name for g in gens),
        batt_names=tuple(b.name for b in batts),
        batt_capacity_as=tuple(b.capacity_as for b in batts),
    )
    metrics = compute_metrics(trace)
    metrics.clamp_events = clamp_events
    metrics.fallback_ticks = fallback_ticks
    # final degradation states are authoritative for end-of-run health
    for j, b in enumerate(batts):
        metrics.capacity_loss_pct[b.name] = capacity_loss_percent(
            deg_states[j], b.capacity_as
        )
        metrics.throughput_as[b.name] = deg_states[j].throughput
        metrics.soc_final[b.name] = soc_states[j].q
    return trace, metrics


def compute_metrics(trace: SimulationTrace, batt_capacity_as=None) -> Metrics:
    """Metrics derivable from a trace alone.

    Energies are trapezoidal integrals over the traced rows; the tracking
    error is the RMS of (supplied - demanded) at the EM ticks; capacity
    loss uses the last traced loss value against the battery capacity.
    """
    if trace.n_rows == 0:
        raise ValueError("trace is empty")
    caps = batt_capacity_as if batt_capacity_as is not None else trace.batt_capacity_as
    gen_names = trace.gen_names or tuple(
        f"p_g_{i + 1}" for i in range(trace.p_g.shape[1])
    )
    batt_names = trace.batt_names or tuple(
        f"p_b_{j + 1}" for j in range(trace.p_b.shape[1])
    )
    t = trace.t
    gen_energy = {
        name: float(np.trapezoid(trace.p_g[:, i], t)) / 3600.0
        for i, name in enumerate(gen_names)
    }
    batt_energy = {
        name: float(np.trapezoid(trace.p_b[:, j], t)) / 3600.0
        for j, name in enumerate(batt_names)
    }
    batt_abs = {
        name: float(np.trapezoid(np.abs(trace.p_b[:, j]), t)) / 3600.0
        for j, name in enumerate(batt_names)
    }
    rms = float(np.sqrt(np.mean((trace.p_total - trace.p_l) ** 2)))
    caploss = {}
    throughput = {}
    soc_final = {}
    for j, name in enumerate(batt_names):
        if caps is not None:
            cap = caps[j]
            caploss[name] = (cap - trace.q_loss[-1, j]) / cap * 100.0
        soc_final[name] = float(trace.q[-1, j])
    iters = trace.iters
    dual_stats = {
        "median": float(median(iters)) if len(iters) else 0.0,
        "max": int(np.max(iters)) if len(iters) else 0,
        "mean": float(np.mean(iters)) if len(iters) else 0.0,
        "total": int(np.sum(iters)) if len(iters) else 0,
    }
    return Metrics(
        gen_energy_wh=gen_energy,
        batt_energy_wh=batt_energy,
        batt_abs_energy_wh=batt_abs,
        rms_tracking_error_w=rms,
        capacity_loss_pct=caploss,
        throughput_as=throughput,
        soc_final=soc_final,
        dual_iterations=dual_stats,
    )


def trace_header(n_g: int, n_b: int) -> list[str]:
    return (
        ["t", "p_L", "p_total"]
        + [f"p_g_{i + 1}" for i in range(n_g)]
        + [f"p_b_{j + 1}" for j in range(n_b)]
        + [f"q_{j + 1}" for j in range(n_b)]
        + [f"QL_{j + 1}" for j in range(n_b)]
        + ["iters", "residual"]
    )


def write_trace(trace: SimulationTrace, path) -> None:
    """Write the trace as CSV: fixed header, 17 significant digits, LF."""
    n_g = trace.p_g.shape[1]
    n_b = trace.p_b.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(n_g, n_b))
        for k in range(trace.n_rows):
            row = [trace.t[k], trace.p_l[k], trace.p_total[k]]
            row += list(trace.p_g[k])
            row += list(trace.p_b[k])
            row += list(trace.q[k])
            row += list(trace.q_loss[k])
            row += [trace.iters[k], trace.residual[k]]
            w.writerow([format(v, ".17g") for v in row])


def read_trace(path) -> SimulationTrace:
    """Parse a trace CSV back into arrays (bit-exact round trip)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    n_g = sum(1 for c in header if c.startswith("p_g_"))
    n_b = sum(1 for c in header if c.startswith("p_b_"))
    if header != trace_header(n_g, n_b):
        raise ValueError("unrecognized trace header")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    if data.size == 0:
        data = data.reshape(0, len(header))
    c = 3
    return SimulationTrace(
        t=data[:, 0],
        p_l=data[:, 1],
        p_total=data[:, 2],
        p_g=data[:, c : c + n_g],
        p_b=data[:, c + n_g : c + n_g + n_b],
        q=data[:, c + n_g + n_b : c + n_g + 2 * n_b],
        q_loss=data[:, c + n_g + 2 * n_b : c + n_g + 3 * n_b],
        iters=data[:, -2],
        residual=data[:, -1],
    )


def trace_to_csv_bytes(trace: SimulationTrace) -> bytes:
    buf = io.StringIO()
    n_g = trace.p_g.shape[1]
    n_b = trace.p_b.shape[1]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_header(n_g, n_b))
    for k in range(trace.n_rows):
        row = [trace.t[k], trace.p_l[k], trace.p_total[k]]
        row += list(trace.p_g[k]) + list(trace.p_b[k])
        row += list(trace.q[k]) + list(trace.q_loss[k])
        row += [trace.iters[k], trace.residual[k]]
        w.writerow([format(v, ".17g") for v in row])
    return buf.getvalue().encode("utf-8")


SWEEPABLE = ("beta", "gamma_p", "gamma_q", "gamma_j")


def sweep_weights(
    cfg: ScenarioConfig,
    param: str,
    values,
    device_index: int | None = None,
    workers: int = 1,
) -> list[tuple[float, Metrics]]:
    """One full scenario run per weight value, identical load profile.

    ``param`` is one of beta / gamma_p / gamma_q applied fleet-wide, or
    gamma_j (battery-specific gamma_p; requires ``device_index``, 1-based).
    Results are ordered by the input values regardless of worker count.
    """
    if param not in SWEEPABLE:
        raise ValueError(f"unknown sweep parameter '{param}'")
    values = [float(v) for v in values]
    for v in values:
        if not np.isfinite(v) or v < 0.0:
            raise ValueError("sweep values must be finite and non-negative")
    if param == "gamma_j" and device_index is None:
        raise ValueError("gamma_j sweeps require a battery index")

    def configured(value: float) -> ScenarioConfig:
        fleet = cfg.fleet
        if param == "beta":
            gens = tuple(
                replace(g, beta=value)
                if (device_index is None or i == device_index - 1)
                else g
                for i, g in enumerate(fleet.generators)
            )
            return replace(cfg, fleet=replace(fleet, generators=gens))
        key = "gamma_q" if param == "gamma_q" else "gamma_p"
        batts = tuple(
            replace(b, **{key: value})
            if (device_index is None or j == device_index - 1)
            else b
            for j, b in enumerate(fleet.batteries)
        )
        return replace(cfg, fleet=replace(fleet, batteries=batts))

    configs = [configured(v) for v in values]
    if workers <= 1:
        results = [run_scenario(c)[1] for c in configs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: run_scenario(c)[1], configs))
    return list(zip(values, results))
