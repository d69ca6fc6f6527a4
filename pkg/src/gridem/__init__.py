"""Predictive energy management for islanded DC microgrids.

Simulates a shipboard-style DC grid (ramp-limited generators, battery
storage, pulsed loads) under centralized or distributed (dual-ascent)
model-predictive energy management, with battery degradation accounting.
"""

from .config import (
    BattParams,
    ConfigError,
    DegradationParams,
    DeviceFleet,
    FlywheelParams,
    GenParams,
    LoadParams,
    Pulse,
    PulseLoadSpec,
    ScenarioConfig,
    emit_config,
    load_config,
    load_config_file,
)
from .dispatch import QuadCost, economic_dispatch
from .em_central import (
    Allocation,
    CentralEm,
    Measurements,
    build_central_qp,
    scenario_weights,
    solve_central_mpc,
)
from .em_distributed import DistributedEm, coordinate, dual_update
from .harness import (
    Metrics,
    SimulationTrace,
    compute_metrics,
    pulse_load_profile,
    read_trace,
    run_scenario,
    sweep_weights,
    write_trace,
)
from .plant import (
    DegradationState,
    FlywheelState,
    GenState,
    SimulationFault,
    SocState,
    capacity_loss_percent,
    soc_discrete_update,
    step_flywheel,
    step_pcm,
    step_pgm,
    update_degradation,
)
from .qpsolve import QpProblem, QpSolution, Settings, kkt_residuals, project_box, solve_qp

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "BattParams",
    "CentralEm",
    "ConfigError",
    "DegradationParams",
    "DegradationState",
    "DeviceFleet",
    "DistributedEm",
    "FlywheelParams",
    "FlywheelState",
    "GenParams",
    "GenState",
    "LoadParams",
    "Measurements",
    "Metrics",
    "Pulse",
    "PulseLoadSpec",
    "QpProblem",
    "QpSolution",
    "QuadCost",
    "ScenarioConfig",
    "Settings",
    "SimulationFault",
    "SimulationTrace",
    "SocState",
    "build_central_qp",
    "capacity_loss_percent",
    "compute_metrics",
    "coordinate",
    "dual_update",
    "economic_dispatch",
    "emit_config",
    "kkt_residuals",
    "load_config",
    "load_config_file",
    "project_box",
    "pulse_load_profile",
    "read_trace",
    "run_scenario",
    "scenario_weights",
    "soc_discrete_update",
    "solve_central_mpc",
    "solve_qp",
    "step_flywheel",
    "step_pcm",
    "step_pgm",
    "sweep_weights",
    "update_degradation",
    "write_trace",
]
