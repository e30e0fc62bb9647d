"""Fixed-step closed-loop simulation of the motor under a switching controller."""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .core import NumericalDivergenceError, SolvabilityError, TrackingSpec, flow, select_next_mode
from .dtc import DtcConfig, DtcMemory, dtc_step, load_table
from .motor import (
    DEFAULT_PARAMS,
    PARAM_KEYS,
    MotorParams,
    MotorState,
    initial_state_for_targets,
    load_params,
    motor_system,
)

__all__ = [
    "ConfigError",
    "SimulationAbort",
    "SimConfig",
    "SimTrace",
    "DEFAULT_SPEC",
    "load_config",
    "run_simulation",
    "export_csv",
    "read_csv",
    "tracking_violations",
]

CONTROLLERS = ("minswitch", "dtc")
CSV_HEADER = ("t", "mode", "omega", "lambda_ds", "lambda_qs", "lambda_dr", "lambda_qr", "tau", "lambda_sm", "switched")
SUMMARY_HEADER = ("switch_count", "max_err_tau", "max_err_flux", "mean_err_tau", "mean_err_flux")

DEFAULT_SPEC = TrackingSpec(y_d=[50.0, 2.0], eps=[0.1, 0.01])

Policy = Callable[[int, np.ndarray, int], int]


class ConfigError(ValueError):
    pass


class SimulationAbort(RuntimeError):
    """The closed loop could not continue at ``step``."""

    def __init__(self, step: int, state: np.ndarray, cause: Exception):
        self.step = step
        self.state = np.array(state, dtype=float)
        self.cause = cause
        super().__init__(f"simulation aborted at step {step}: {cause}")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.5e-6
    steps: int = 10_000
    controller: str = "minswitch"
    spec: TrackingSpec = DEFAULT_SPEC
    params: MotorParams = DEFAULT_PARAMS
    initial: Union[MotorState, str] = "auto"
    substeps: int = 1
    initial_mode: int = 0
    dtc: Optional[DtcConfig] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.steps < 0:
            raise ConfigError("steps must be non-negative")
        if self.substeps < 1:
            raise ConfigError("substeps must be at least 1")
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"controller must be one of {CONTROLLERS}, got {self.controller!r}")
        if self.initial != "auto" and not isinstance(self.initial, MotorState):
            raise ConfigError("initial must be 'auto' or a MotorState")

    def dtc_config(self) -> DtcConfig:
        if self.dtc is not None:
            return self.dtc
        return DtcConfig(torque_band=float(self.spec.eps[0]), flux_band=float(self.spec.eps[1]))

    def initial_state(self) -> MotorState:
        if isinstance(self.initial, MotorState):
            return self.initial
        y_d = self.spec.y_d
        return initial_state_for_targets(self.params, float(y_d[0]), float(y_d[1]))


@dataclass
class SimTrace:
    """Per-step record; row ``k`` holds the state at ``t[k]`` and the mode applied over the next step."""

    t: np.ndarray
    mode: np.ndarray
    xi: np.ndarray
    tau: np.ndarray
    lambda_sm: np.ndarray
    switched: np.ndarray
    spec: TrackingSpec = field(default=DEFAULT_SPEC)
    final_state: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def switch_count(self) -> int:
        return int(np.count_nonzero(self.switched))

    @property
    def errors(self) -> np.ndarray:
        return np.column_stack((self.tau, self.lambda_sm)) - self.spec.y_d

    def summary(self) -> dict:
        if len(self) == 0:
            return dict(zip(SUMMARY_HEADER, (0, 0.0, 0.0, 0.0, 0.0)))
        err = np.abs(self.errors)
        return {
            "switch_count": self.switch_count,
            "max_err_tau": float(err[:, 0].max()),
            "max_err_flux": float(err[:, 1].max()),
            "mean_err_tau": float(err[:, 0].mean()),
            "mean_err_flux": float(err[:, 1].mean()),
        }


def _minswitch_policy(config: SimConfig) -> Policy:
    system = motor_system(config.params)
    spec = config.spec

    def policy(k, xi, current):
        return select_next_mode(system, spec, current, xi)

    return policy


def _dtc_policy(config: SimConfig) -> Policy:
    dtc = config.dtc_config()
    spec, params = config.spec, config.params
    y_d = spec.y_d
    memory = [None]

    def policy(k, xi, current):
        if memory[0] is None:
            flux = float(np.hypot(xi[1], xi[2]))
            memory[0] = DtcMemory(flux_cmp=1 if y_d[1] - flux >= 0 else -1)
        mode, memory[0] = dtc_step(xi, dtc, spec, params, memory[0])
        return mode

    return policy


def run_simulation(config: SimConfig, policy: Optional[Policy] = None) -> SimTrace:
    """Sample the controller, then integrate one period, ``config.steps`` times.

    ``policy(k, xi, current_mode) -> mode`` overrides the configured controller.
    """
    system = motor_system(config.params)
    if policy is None:
        policy = _minswitch_policy(config) if config.controller == "minswitch" else _dtc_policy(config)
    n = config.steps
    t = config.dt * np.arange(n)
    modes = np.zeros(n, dtype=int)
    xis = np.zeros((n, 5))
    xi = config.initial_state().to_vector()
    current = config.initial_mode
    for k in range(n):
        try:
            mode = int(policy(k, xi, current))
        except (SolvabilityError, ValueError) as exc:
            raise SimulationAbort(k, xi, exc) from exc
        modes[k] = mode
        xis[k] = xi
        try:
            xi = flow(system, mode, xi, config.dt, config.substeps)
        except NumericalDivergenceError as exc:
            raise SimulationAbort(k, xi, exc) from exc
        current = mode
    outputs = np.array([system.output(x) for x in xis]).reshape(n, 2)
    prev = np.concatenate(([config.initial_mode], modes[:-1])) if n else modes
    return SimTrace(
        t=t,
        mode=modes,
        xi=xis,
        tau=outputs[:, 0],
        lambda_sm=outputs[:, 1],
        switched=modes != prev,
        spec=config.spec,
        final_state=xi,
    )


def tracking_violations(trace: SimTrace, dt: float) -> np.ndarray:
    """Indices ``k`` where some output is outside its band (plus slack) and its error grew over step k.

    The slack per output is ``2 * dt * max|dy/dt|`` with the rate estimated
    from consecutive samples.
    """
    if len(trace) < 2:
        return np.zeros(0, dtype=int)
    err = np.abs(trace.errors)
    y = np.column_stack((trace.tau, trace.lambda_sm))
    slack = 2.0 * np.max(np.abs(np.diff(y, axis=0)), axis=0)
    inside = err[1:] < trace.spec.eps + slack
    shrinking = err[1:] < err[:-1]
    bad = ~np.all(inside | shrinking, axis=1)
    return np.flatnonzero(bad)


def _fmt(x: float) -> str:
    return repr(float(x))


def export_csv(trace: SimTrace, path) -> Path:
    """Write the trace to ``path`` and the summary to ``<path>.summary``."""
    path = Path(path)
    summary_path = path.with_name(path.name + ".summary")
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for k in range(len(trace)):
                w.writerow(
                    [_fmt(trace.t[k]), int(trace.mode[k])]
                    + [_fmt(v) for v in trace.xi[k]]
                    + [_fmt(trace.tau[k]), _fmt(trace.lambda_sm[k]), int(bool(trace.switched[k]))]
                )
        s = trace.summary()
        with open(summary_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_HEADER)
            w.writerow([s["switch_count"]] + [_fmt(s[k]) for k in SUMMARY_HEADER[1:]])
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc
    return path


def read_csv(path) -> dict:
    """Load a trace CSV back into column arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = {}
    for name in CSV_HEADER:
        values = [r[name] for r in rows]
        dtype = int if name in ("mode", "switched") else float
        cols[name] = np.array(values, dtype=dtype)
    return cols


def _floats(text: str) -> list:
    return [float(v) for v in text.replace(",", " ").split()]


def load_config(path, params_path=None) -> SimConfig:
    """Read a simulation config from an INI-style file.

    Sections: ``[motor]`` (any of the parameter keys, overriding the 450 V
    default profile), ``[sim]`` (dt, steps, substeps, initial_mode),
    ``[spec]`` (tau_d, flux_d, eps_tau, eps_flux), ``[controller]`` (kind,
    torque_band, flux_band, table) and ``[initial]`` (state = auto or five
    numbers). ``params_path`` replaces ``[motor]`` with a full parameter file.
    """
    path = Path(path)
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        if not parser.read(path):
            raise ConfigError(f"cannot read config file {path}")
        return _config_from_parser(parser, path.parent, params_path)
    except (configparser.Error, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc


def _config_from_parser(parser, base: Path, params_path=None) -> SimConfig:
    if params_path is not None:
        params = load_params(params_path)
    else:
        params = DEFAULT_PARAMS
        if parser.has_section("motor"):
            section = parser["motor"]
            unknown = [k for k in section if k not in PARAM_KEYS]
            if unknown:
                raise ConfigError(f"unknown motor keys {unknown}")
            kw = {k: float(v) for k, v in section.items()}
            if "P" in kw:
                kw["P"] = int(kw["P"])
            params = replace(params, **kw)

    sim = parser["sim"] if parser.has_section("sim") else {}
    spec_s = parser["spec"] if parser.has_section("spec") else {}
    ctrl = parser["controller"] if parser.has_section("controller") else {}
    init = parser["initial"] if parser.has_section("initial") else {}

    d = DEFAULT_SPEC
    spec = TrackingSpec(
        y_d=[float(spec_s.get("tau_d", d.y_d[0])), float(spec_s.get("flux_d", d.y_d[1]))],
        eps=[float(spec_s.get("eps_tau", d.eps[0])), float(spec_s.get("eps_flux", d.eps[1]))],
    )

    dtc = None
    if any(k in ctrl for k in ("torque_band", "flux_band", "table")):
        kw = {
            "torque_band": float(ctrl.get("torque_band", spec.eps[0])),
            "flux_band": float(ctrl.get("flux_band", spec.eps[1])),
        }
        if "table" in ctrl:
            kw["table"] = load_table(base / ctrl["table"])
        dtc = DtcConfig(**kw)

    initial = init.get("state", "auto").strip()
    if initial != "auto":
        values = _floats(initial)
        if len(values) != 5:
            raise ConfigError("initial state needs 5 values: omega, lambda_ds, lambda_qs, lambda_dr, lambda_qr")
        initial = MotorState(values[0], tuple(values[1:]))

    return SimConfig(
        dt=float(sim.get("dt", 0.5e-6)),
        steps=int(sim.get("steps", 10_000)),
        substeps=int(sim.get("substeps", 1)),
        initial_mode=int(sim.get("initial_mode", 0)),
        controller=ctrl.get("kind", "minswitch").strip(),
        spec=spec,
        params=params,
        initial=initial,
        dtc=dtc,
    )
