"""Minimal-switch step tracking for switched systems, with an induction-motor plant
and a direct torque control baseline."""

from .core import (
    HybridState,
    ModifiedOutput,
    NumericalDivergenceError,
    ScanReport,
    SolvabilityError,
    StabilityError,
    SwitchedSystem,
    TrackingSpec,
    admissible_modes,
    check_sign_coverage,
    flow,
    grid_states,
    modified_output_build,
    modified_output_error_bound,
    random_states,
    select_next_mode,
    solvability_scan,
    time_to_boundary_exact,
    time_to_boundary_linear,
)
from .motor import DEFAULT_PARAMS, REFERENCE_PARAMS, MotorParams, MotorState, motor_system
from .sim import SimConfig, SimTrace, export_csv, load_config, run_simulation

__version__ = "0.1.0"
