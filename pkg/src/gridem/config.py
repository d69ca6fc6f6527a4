"""Scenario configuration: schema, validation and unit handling.

All internal quantities are SI (W, V, A, A*s, s). The JSON config document
uses the field units people actually write down for this class of system:
megawatts for power, kilovolts for voltage, ampere-hours for capacity,
seconds for time. Conversion happens exactly once, in :func:`load_config`,
and once more on the way out in :func:`emit_config`. Nothing is ever
clamped; a value outside its declared range is rejected with a
:class:`ConfigError` naming the violated invariant.

Top-level document keys::

    bus_voltage_kv      float, > 0
    horizon_steps       int, >= 1
    mpc_period_s        float, > 0            (EM update period, T_s)
    plant_period_s      float, > 0, divides mpc_period_s
    em                  object, optional      (mode/dual_step/eps_tol_mw/...)
    generators          list of generator objects, >= 1 entry
    batteries           list of battery objects (may be empty)
    flywheels           list of flywheel objects, optional
    load                object                (base_mw/pulses/duration_s/...)
    degradation         object, optional      (zeta1/zeta2_j_per_mol/...)

See the repository README for the per-object fields and their defaults.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

MW = 1.0e6
KV = 1.0e3
AHR = 3600.0

# Defaults applied when the config omits a key.
DEFAULT_BETA = 1.0
DEFAULT_GAMMA_P = 1.0
DEFAULT_GAMMA_Q = 0.0
DEFAULT_DUAL_STEP = 0.1
DEFAULT_EPS_TOL_W = 1.0e3
DEFAULT_MAX_ITERS = 500
DEFAULT_QP_EPS = 1.0e-6
DEFAULT_QP_MAX_ITERS = 20000

GAS_CONSTANT = 8.314  # J/(mol K)
DEFAULT_ZETA1 = 1.0
DEFAULT_ZETA2 = 31700.0  # J/mol
DEFAULT_TEMPERATURE_K = 298.15
DEFAULT_THROUGHPUT_EXPONENT = 1.0

# Generator electrical constants and local current-loop gains; the tables
# this tool is normally fed do not carry them, so they have desk defaults.
DEFAULT_GEN_RESISTANCE = 0.05  # Ohm
DEFAULT_GEN_INDUCTANCE = 0.01  # H
DEFAULT_GEN_KP = 0.05
DEFAULT_GEN_KI = 0.25
DEFAULT_BATT_RESISTANCE = 0.05  # Ohm
VOC_OFFSET_BELOW_BUS = 50.0  # default c2 = v_bus_nominal - 50 V


class ConfigError(ValueError):
    """Raised when a config document is malformed or violates an invariant."""


@dataclass(frozen=True)
class GenParams:
    """One ramp-limited, unidirectional generator (PGM)."""

    name: str
    p_min_w: float
    p_max_w: float
    p_rated_w: float
    ramp_w: float  # max |change| in commanded power per MPC step
    beta: float = DEFAULT_BETA
    resistance_ohm: float = DEFAULT_GEN_RESISTANCE
    inductance_h: float = DEFAULT_GEN_INDUCTANCE
    capacitance_f: float | None = None  # present only for the shunt-cap variant
    kp: float = DEFAULT_GEN_KP
    ki: float = DEFAULT_GEN_KI


@dataclass(frozen=True)
class BattParams:
    """One bidirectional battery storage unit (PCM)."""

    name: str
    capacity_as: float  # A*s
    p_min_w: float  # <= 0, max charge power
    p_max_w: float  # >= 0, max discharge power
    ramp_w: float
    soc_min: float
    soc_max: float
    soc_initial: float
    gamma_p: float = DEFAULT_GAMMA_P
    gamma_q: float = DEFAULT_GAMMA_Q
    resistance_ohm: float = DEFAULT_BATT_RESISTANCE
    voc_c1_v: float = 0.0  # open-circuit law v_oc = c1*q + c2
    voc_c2_v: float = 0.0


@dataclass(frozen=True)
class LoadParams:
    """Electrical constants of the aggregate controllable load."""

    resistance_ohm: float = 1.0
    inductance_h: float = 1.0e-3
    kp: float = 1.0
    ki: float = 10.0


@dataclass(frozen=True)
class FlywheelParams:
    """Rotational storage; inertia may be given directly or as mass+radius."""

    name: str
    inertia_kgm2: float
    omega_max_rad_s: float
    tau_max_nm: float


@dataclass(frozen=True)
class Pulse:
    start_s: float
    end_s: float
    amplitude_w: float


@dataclass(frozen=True)
class PulseLoadSpec:
    """Base demand plus rectangular pulses, evaluated on [0, total_duration]."""

    base_w: float
    pulses: tuple[Pulse, ...]
    total_duration_s: float
    rating_w: float


@dataclass(frozen=True)
class DegradationParams:
    """Arrhenius-form capacity-loss coefficients.

    ``c_rate_per_hr`` may be None in the document, in which case it is
    snapshot from the battery's rated discharge current at load time.
    ``throughput_exponent`` is the exponent on |i| in the throughput
    integrand (1 = plain Ah-throughput, 0.5 = square-root variant).
    """

    zeta1: float = DEFAULT_ZETA1
    zeta2_j_per_mol: float = DEFAULT_ZETA2
    temperature_k: float = DEFAULT_TEMPERATURE_K
    gas_constant: float = GAS_CONSTANT
    c_rate_per_hr: float = 1.0
    throughput_exponent: float = DEFAULT_THROUGHPUT_EXPONENT


@dataclass(frozen=True)
class DeviceFleet:
    generators: tuple[GenParams, ...]
    batteries: tuple[BattParams, ...]
    flywheels: tuple[FlywheelParams, ...] = ()
    load: LoadParams = field(default_factory=LoadParams)


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully validated scenario, in SI units, immutable."""

    fleet: DeviceFleet
    v_bus_v: float
    horizon_steps: int
    mpc_period_s: float
    plant_period_s: float
    load_spec: PulseLoadSpec
    em_mode: str = "centralized"  # "centralized" | "distributed"
    dual_step: float = DEFAULT_DUAL_STEP
    eps_tol_w: float = DEFAULT_EPS_TOL_W
    max_iters: int = DEFAULT_MAX_ITERS
    warm_start: bool = True
    em_failure_budget: int = 0
    qp_eps: float = DEFAULT_QP_EPS
    qp_max_iters: int = DEFAULT_QP_MAX_ITERS
    degradation: DegradationParams = field(default_factory=DegradationParams)

    @property
    def substeps_per_tick(self) -> int:
        return round(self.mpc_period_s / self.plant_period_s)

    def soc_kappa(self, batt: BattParams) -> float:
        """SoC change per watt-step: T_s / (Q * v_bus), units 1/W."""
        return self.mpc_period_s / (batt.capacity_as * self.v_bus_v)


def _require(cond: bool, invariant: str) -> None:
    if not cond:
        raise ConfigError(invariant)


def _get(obj: dict, key: str, kind, default=_require):
    if key not in obj:
        if default is _require:
            raise ConfigError(f"missing required key '{key}'")
        return default
    value = obj[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"key '{key}' must be an integer, got {value!r}")
        return value
    if not isinstance(value, kind):
        raise ConfigError(f"key '{key}' has wrong type {type(value).__name__}")
    return value


def _parse_gen(obj: dict, index: int) -> GenParams:
    name = _get(obj, "name", str, f"pgm{index + 1}")
    p_min = _get(obj, "p_min_mw", float) * MW
    p_max = _get(obj, "p_max_mw", float) * MW
    p_rated = _get(obj, "p_rated_mw", float) * MW
    ramp = _get(obj, "ramp_mw_per_step", float) * MW
    beta = _get(obj, "beta", float, DEFAULT_BETA)
    g = GenParams(
        name=name,
        p_min_w=p_min,
        p_max_w=p_max,
        p_rated_w=p_rated,
        ramp_w=ramp,
        beta=beta,
        resistance_ohm=_get(obj, "resistance_ohm", float, DEFAULT_GEN_RESISTANCE),
        inductance_h=_get(obj, "inductance_h", float, DEFAULT_GEN_INDUCTANCE),
        capacitance_f=_get(obj, "capacitance_f", float, None),
        kp=_get(obj, "kp", float, DEFAULT_GEN_KP),
        ki=_get(obj, "ki", float, DEFAULT_GEN_KI),
    )
    _require(0.0 <= g.p_min_w < g.p_max_w, f"{name}: requires 0 <= p_min < p_max")
    _require(
        0.0 < g.ramp_w <= g.p_max_w - g.p_min_w,
        f"{name}: requires 0 < ramp <= p_max - p_min",
    )
    _require(
        g.p_min_w <= g.p_rated_w <= g.p_max_w,
        f"{name}: requires p_min <= p_rated <= p_max",
    )
    _require(g.beta >= 0.0, f"{name}: requires beta >= 0")
    _require(g.resistance_ohm > 0.0, f"{name}: requires resistance > 0")
    _require(g.inductance_h > 0.0, f"{name}: requires inductance > 0")
    if g.capacitance_f is not None:
        _require(g.capacitance_f > 0.0, f"{name}: requires capacitance > 0")
    return g


def _parse_batt(obj: dict, index: int, v_bus_v: float) -> BattParams:
    name = _get(obj, "name", str, f"pcm{index + 1}")
    b = BattParams(
        name=name,
        capacity_as=_get(obj, "capacity_ahr", float) * AHR,
        p_min_w=_get(obj, "p_min_mw", float) * MW,
        p_max_w=_get(obj, "p_max_mw", float) * MW,
        ramp_w=_get(obj, "ramp_mw_per_step", float) * MW,
        soc_min=_get(obj, "soc_min", float),
        soc_max=_get(obj, "soc_max", float),
        soc_initial=_get(obj, "soc_initial", float),
        gamma_p=_get(obj, "gamma_p", float, DEFAULT_GAMMA_P),
        gamma_q=_get(obj, "gamma_q", float, DEFAULT_GAMMA_Q),
        resistance_ohm=_get(obj, "resistance_ohm", float, DEFAULT_BATT_RESISTANCE),
        voc_c1_v=_get(obj, "voc_c1_kv", float, 0.0) * KV,
        voc_c2_v=_get(obj, "voc_c2_kv", float, (v_bus_v - VOC_OFFSET_BELOW_BUS) / KV)
        * KV,
    )
    _require(b.capacity_as > 0.0, f"{name}: requires capacity > 0")
    _require(b.p_min_w < 0.0 < b.p_max_w, f"{name}: requires p_min < 0 < p_max")
    _require(b.ramp_w > 0.0, f"{name}: requires ramp > 0")
    _require(
        0.0 <= b.soc_min < b.soc_max <= 1.0,
        f"{name}: requires 0 <= q_min < q_max <= 1 (got q_min={b.soc_min}, q_max={b.soc_max})",
    )
    _require(
        b.soc_min < b.soc_initial <= b.soc_max,
        f"{name}: requires q_min < q0 <= q_max",
    )
    _require(b.gamma_p >= 0.0 and b.gamma_q >= 0.0, f"{name}: requires gamma >= 0")
    _require(b.resistance_ohm > 0.0, f"{name}: requires resistance > 0")
    return b


def _parse_flywheel(obj: dict, index: int) -> FlywheelParams:
    name = _get(obj, "name", str, f"fes{index + 1}")
    if "inertia_kgm2" in obj:
        inertia = _get(obj, "inertia_kgm2", float)
    else:
        mass = _get(obj, "mass_kg", float)
        radius = _get(obj, "radius_m", float)
        _require(mass > 0.0 and radius > 0.0, f"{name}: requires mass, radius > 0")
        inertia = 0.5 * mass * radius * radius
    f = FlywheelParams(
        name=name,
        inertia_kgm2=inertia,
        omega_max_rad_s=_get(obj, "omega_max_rad_s", float),
        tau_max_nm=_get(obj, "tau_max_nm", float),
    )
    _require(f.inertia_kgm2 > 0.0, f"{name}: requires inertia > 0")
    _require(f.omega_max_rad_s > 0.0, f"{name}: requires omega_max > 0")
    _require(f.tau_max_nm > 0.0, f"{name}: requires tau_max > 0")
    return f


def _parse_load_params(obj: dict) -> LoadParams:
    lp = LoadParams(
        resistance_ohm=_get(obj, "resistance_ohm", float, 1.0),
        inductance_h=_get(obj, "inductance_h", float, 1.0e-3),
        kp=_get(obj, "kp", float, 1.0),
        ki=_get(obj, "ki", float, 10.0),
    )
    _require(lp.resistance_ohm > 0.0, "load: requires resistance > 0")
    _require(lp.inductance_h > 0.0, "load: requires inductance > 0")
    return lp


def _parse_load_spec(obj: dict) -> PulseLoadSpec:
    duration = _get(obj, "duration_s", float)
    base = _get(obj, "base_mw", float) * MW
    rating = _get(obj, "rating_mw", float) * MW
    pulses = []
    for i, p in enumerate(_get(obj, "pulses", list, [])):
        pulse = Pulse(
            start_s=_get(p, "start_s", float),
            end_s=_get(p, "end_s", float),
            amplitude_w=_get(p, "amplitude_mw", float) * MW,
        )
        _require(
            0.0 <= pulse.start_s < pulse.end_s <= duration,
            f"load pulse {i + 1}: requires 0 <= start < end <= duration",
        )
        pulses.append(pulse)
    spec = PulseLoadSpec(
        base_w=base,
        pulses=tuple(pulses),
        total_duration_s=duration,
        rating_w=rating,
    )
    _require(duration > 0.0, "load: requires duration > 0")
    _require(base >= 0.0, "load: requires base >= 0")
    # Worst-case simultaneous overlap must stay inside the load rating.
    edges = sorted({0.0, duration}
                   | {p.start_s for p in pulses}
                   | {p.end_s for p in pulses})
    for t in edges[:-1]:
        total = base + sum(
            p.amplitude_w for p in pulses if p.start_s <= t < p.end_s
        )
        _require(
            total <= rating + 1e-9,
            f"load: base plus overlapping pulses ({total / MW:g} MW) exceeds rating",
        )
    return spec


def _parse_degradation(obj: dict, fallback_c_rate: float) -> DegradationParams:
    c_rate = obj.get("c_rate_per_hr")
    if c_rate is None:
        c_rate = fallback_c_rate
    d = DegradationParams(
        zeta1=_get(obj, "zeta1", float, DEFAULT_ZETA1),
        zeta2_j_per_mol=_get(obj, "zeta2_j_per_mol", float, DEFAULT_ZETA2),
        temperature_k=_get(obj, "temperature_k", float, DEFAULT_TEMPERATURE_K),
        gas_constant=_get(obj, "gas_constant", float, GAS_CONSTANT),
        c_rate_per_hr=float(c_rate),
        throughput_exponent=_get(
            obj, "throughput_exponent", float, DEFAULT_THROUGHPUT_EXPONENT
        ),
    )
    _require(d.zeta1 >= 0.0, "degradation: requires zeta1 >= 0")
    _require(d.temperature_k > 0.0, "degradation: requires temperature > 0")
    _require(d.gas_constant > 0.0, "degradation: requires gas constant > 0")
    _require(d.throughput_exponent > 0.0, "degradation: requires exponent > 0")
    return d


def load_config_dict(doc: dict) -> ScenarioConfig:
    """Validate a parsed config document and return a ScenarioConfig in SI."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    v_bus = _get(doc, "bus_voltage_kv", float) * KV
    _require(v_bus > 0.0, "requires bus voltage > 0")
    horizon = _get(doc, "horizon_steps", int)
    _require(horizon >= 1, "requires horizon_steps >= 1")
    t_s = _get(doc, "mpc_period_s", float)
    t_plant = _get(doc, "plant_period_s", float)
    _require(t_s > 0.0 and t_plant > 0.0, "requires positive periods")
    _require(t_plant <= t_s, "requires plant_period_s <= mpc_period_s")
    ratio = t_s / t_plant
    _require(
        abs(ratio - round(ratio)) < 1e-9,
        "requires mpc_period_s to be an integer multiple of plant_period_s",
    )

    gens = tuple(
        _parse_gen(g, i) for i, g in enumerate(_get(doc, "generators", list))
    )
    _require(len(gens) >= 1, "requires at least one generator")
    batts = tuple(
        _parse_batt(b, i, v_bus)
        for i, b in enumerate(_get(doc, "batteries", list, []))
    )
    names = [g.name for g in gens] + [b.name for b in batts]
    _require(len(names) == len(set(names)), "device names must be unique")
    flys = tuple(
        _parse_flywheel(f, i) for i, f in enumerate(_get(doc, "flywheels", list, []))
    )
    load_obj = _get(doc, "load", dict)
    load_params = _parse_load_params(load_obj)
    load_spec = _parse_load_spec(load_obj)

    em = _get(doc, "em", dict, {})
    mode = _get(em, "mode", str, "centralized")
    _require(mode in ("centralized", "distributed"), "em.mode must be centralized or distributed")
    dual_step = _get(em, "dual_step", float, DEFAULT_DUAL_STEP)
    if mode == "distributed":
        _require(dual_step > 0.0, "em.dual_step must be > 0 in distributed mode")
    else:
        _require(dual_step >= 0.0, "em.dual_step must be >= 0")
    eps_tol = _get(em, "eps_tol_mw", float, DEFAULT_EPS_TOL_W / MW) * MW
    _require(eps_tol > 0.0, "em.eps_tol_mw must be > 0")
    max_iters = _get(em, "max_iters", int, DEFAULT_MAX_ITERS)
    _require(max_iters >= 1, "em.max_iters must be >= 1")
    qp_eps = _get(em, "qp_eps", float, DEFAULT_QP_EPS)
    _require(qp_eps > 0.0, "em.qp_eps must be > 0")
    qp_max_iters = _get(em, "qp_max_iters", int, DEFAULT_QP_MAX_ITERS)
    budget = _get(em, "failure_budget", int, 0)
    _require(budget >= 0, "em.failure_budget must be >= 0")
    warm = _get(em, "warm_start", bool, True)

    # Default C-rate snapshot: rated discharge current of the largest battery
    # relative to its capacity, converted to a per-hour rate.
    if batts:
        ref = max(batts, key=lambda b: b.p_max_w)
        fallback_c_rate = (ref.p_max_w / v_bus) / ref.capacity_as * 3600.0
    else:
        fallback_c_rate = 1.0
    degradation = _parse_degradation(_get(doc, "degradation", dict, {}), fallback_c_rate)

    return ScenarioConfig(
        fleet=DeviceFleet(generators=gens, batteries=batts, flywheels=flys, load=load_params),
        v_bus_v=v_bus,
        horizon_steps=horizon,
        mpc_period_s=t_s,
        plant_period_s=t_plant,
        load_spec=load_spec,
        em_mode=mode,
        dual_step=dual_step,
        eps_tol_w=eps_tol,
        max_iters=max_iters,
        warm_start=warm,
        em_failure_budget=budget,
        qp_eps=qp_eps,
        qp_max_iters=qp_max_iters,
        degradation=degradation,
    )


def load_config(text: str) -> ScenarioConfig:
    """Parse and validate a JSON config document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config document: {exc}") from exc
    return load_config_dict(doc)


def load_config_file(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return load_config(fh.read())


def emit_config(cfg: ScenarioConfig) -> str:
    """Serialize a ScenarioConfig back to a JSON document (config units)."""
    doc = {
        "bus_voltage_kv": cfg.v_bus_v / KV,
        "horizon_steps": cfg.horizon_steps,
        "mpc_period_s": cfg.mpc_period_s,
        "plant_period_s": cfg.plant_period_s,
        "em": {
            "mode": cfg.em_mode,
            "dual_step": cfg.dual_step,
            "eps_tol_mw": cfg.eps_tol_w / MW,
            "max_iters": cfg.max_iters,
            "warm_start": cfg.warm_start,
            "failure_budget": cfg.em_failure_budget,
            "qp_eps": cfg.qp_eps,
            "qp_max_iters": cfg.qp_max_iters,
        },
        "generators": [
            {
                "name": g.name,
                "p_min_mw": g.p_min_w / MW,
                "p_max_mw": g.p_max_w / MW,
                "p_rated_mw": g.p_rated_w / MW,
                "ramp_mw_per_step": g.ramp_w / MW,
                "beta": g.beta,
                "resistance_ohm": g.resistance_ohm,
                "inductance_h": g.inductance_h,
                **(
                    {"capacitance_f": g.capacitance_f}
                    if g.capacitance_f is not None
                    else {}
                ),
                "kp": g.kp,
                "ki": g.ki,
            }
            for g in cfg.fleet.generators
        ],
        "batteries": [
            {
                "name": b.name,
                "capacity_ahr": b.capacity_as / AHR,
                "p_min_mw": b.p_min_w / MW,
                "p_max_mw": b.p_max_w / MW,
                "ramp_mw_per_step": b.ramp_w / MW,
                "soc_min": b.soc_min,
                "soc_max": b.soc_max,
                "soc_initial": b.soc_initial,
                "gamma_p": b.gamma_p,
                "gamma_q": b.gamma_q,
                "resistance_ohm": b.resistance_ohm,
                "voc_c1_kv": b.voc_c1_v / KV,
                "voc_c2_kv": b.voc_c2_v / KV,
            }
            for b in cfg.fleet.batteries
        ],
        "flywheels": [
            {
                "name": f.name,
                "inertia_kgm2": f.inertia_kgm2,
                "omega_max_rad_s": f.omega_max_rad_s,
                "tau_max_nm": f.tau_max_nm,
            }
            for f in cfg.fleet.flywheels
        ],
        "load": {
            "base_mw": cfg.load_spec.base_w / MW,
            "rating_mw": cfg.load_spec.rating_w / MW,
            "duration_s": cfg.load_spec.total_duration_s,
            "pulses": [
                {
                    "start_s": p.start_s,
                    "end_s": p.end_s,
                    "amplitude_mw": p.amplitude_w / MW,
                }
                for p in cfg.load_spec.pulses
            ],
            "resistance_ohm": cfg.fleet.load.resistance_ohm,
            "inductance_h": cfg.fleet.load.inductance_h,
            "kp": cfg.fleet.load.kp,
            "ki": cfg.fleet.load.ki,
        },
        "degradation": {
            "zeta1": cfg.degradation.zeta1,
            "zeta2_j_per_mol": cfg.degradation.zeta2_j_per_mol,
            "temperature_k": cfg.degradation.temperature_k,
            "gas_constant": cfg.degradation.gas_constant,
            "c_rate_per_hr": cfg.degradation.c_rate_per_hr,
            "throughput_exponent": cfg.degradation.throughput_exponent,
        },
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.path=value`` overrides to a raw config document.

    Paths must reference existing keys (list indices included); values are
    parsed as JSON, falling back to a bare string. Returns a new document.
    """
    doc = json.loads(json.dumps(doc))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        path, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = path.split(".")
        node = doc
        for i, part in enumerate(parts):
            last = i == len(parts) - 1
            if isinstance(node, list):
                try:
                    idx = int(part)
                except ValueError:
                    raise ConfigError(f"override '{path}': '{part}' is not a list index")
                if not 0 <= idx < len(node):
                    raise ConfigError(f"override '{path}': index {idx} out of range")
                if last:
                    node[idx] = value
                else:
                    node = node[idx]
            elif isinstance(node, dict):
                if part not in node:
                    raise ConfigError(f"override '{path}': unknown key '{part}'")
                if last:
                    node[part] = value
                else:
                    node = node[part]
            else:
                raise ConfigError(f"override '{path}': '{part}' does not nest")
    return doc


def with_weights(
    cfg: ScenarioConfig,
    beta: float | None = None,
    gamma_p: float | None = None,
    gamma_q: float | None = None,
) -> ScenarioConfig:
    """Copy of ``cfg`` with objective weights replaced fleet-wide."""
    gens = cfg.fleet.generators
    batts = cfg.fleet.batteries
    if beta is not None:
        gens = tuple(replace(g, beta=beta) for g in gens)
    if gamma_p is not None:
        batts = tuple(replace(b, gamma_p=gamma_p) for b in batts)
    if gamma_q is not None:
        batts = tuple(replace(b, gamma_q=gamma_q) for b in batts)
    return replace(cfg, fleet=replace(cfg.fleet, generators=gens, batteries=batts))


def zeta_effective(d: DegradationParams) -> float:
    """Arrhenius coefficient multiplying accumulated current throughput."""
    t = d.temperature_k
    return d.zeta1 * math.exp(
        (-d.zeta2_j_per_mol + t * d.c_rate_per_hr) / (d.gas_constant * t)
    )
