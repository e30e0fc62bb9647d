"""Classical direct torque control: hysteresis comparators and a six-sector switching table.

The stator-flux plane is split into six 60 degree sectors, sector 0 centred
on the d-axis. Active inverter vectors sit at multiples of 60 degrees, with
ModeId ``j + 1`` at ``60 * j`` degrees and ModeId 0 the zero vector.
Comparator memory is held by the caller and passed in and out explicitly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .core import TrackingSpec
from .motor import FLUX_EPS, MotorParams, SingularFluxError, _as_state, motor_outputs

__all__ = [
    "DtcConfig",
    "DtcMemory",
    "default_table",
    "load_table",
    "flux_sector",
    "update_comparators",
    "dtc_step",
]

INCREASE, HOLD, DECREASE = 1, 0, -1
ZERO_VECTOR = 0


def default_table() -> dict:
    """Takahashi table keyed by ``(sector, torque_cmp, flux_cmp)``, values are ModeIds."""
    # active vector offset from the sector index, by (torque_cmp, flux_cmp)
    offsets = {(1, 1): 1, (1, -1): 2, (-1, 1): -1, (-1, -1): -2}
    table = {}
    for sector in range(6):
        for flux_cmp in (1, -1):
            table[(sector, HOLD, flux_cmp)] = ZERO_VECTOR
            for torque_cmp in (1, -1):
                j = (sector + offsets[(torque_cmp, flux_cmp)]) % 6
                table[(sector, torque_cmp, flux_cmp)] = j + 1
    return table


def _validate_table(table: Mapping) -> dict:
    table = {tuple(int(v) for v in k): int(m) for k, m in table.items()}
    for sector in range(6):
        for t in (INCREASE, HOLD, DECREASE):
            for f in (1, -1):
                mode = table.get((sector, t, f))
                if mode is None:
                    raise ValueError(f"switching table has no entry for {(sector, t, f)}")
                if not 0 <= mode < 7:
                    raise ValueError(f"invalid ModeId {mode} in switching table")
    return table


def load_table(path) -> dict:
    """Read a switching table from CSV with columns ``sector,torque_cmp,flux_cmp,mode``.

    ``sector`` is 1..6 and ``mode`` uses the inverter table numbering 1..7, as
    in the literature; both are converted to zero-based indices.
    """
    path = Path(path)
    table = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (int(row["sector"]) - 1, int(row["torque_cmp"]), int(row["flux_cmp"]))
            table[key] = int(row["mode"]) - 1
    return _validate_table(table)


@dataclass(frozen=True)
class DtcConfig:
    torque_band: float = 0.1
    flux_band: float = 0.01
    table: dict = field(default_factory=default_table)

    def __post_init__(self):
        if not (self.torque_band > 0 and self.flux_band > 0):
            raise ValueError("hysteresis bands must be positive")
        object.__setattr__(self, "table", _validate_table(self.table))


@dataclass(frozen=True)
class DtcMemory:
    torque_cmp: int = HOLD
    flux_cmp: int = INCREASE


def flux_sector(lam_ds: float, lam_qs: float) -> int:
    """Sector index 0..5 of the stator flux angle; sector k spans ``60k +- 30`` degrees."""
    angle = math.atan2(lam_qs, lam_ds)
    return int(math.floor((angle + math.pi / 6) / (math.pi / 3))) % 6


def update_comparators(
    tau_err: float, flux_err: float, config: DtcConfig, memory: DtcMemory
) -> DtcMemory:
    """Advance both comparators; errors are ``reference - measured``.

    The torque comparator is three-level: it asks to increase above the
    upper band edge, to decrease below the lower one, and returns to hold
    when the error crosses zero from the active side. The flux comparator
    is two-level with memory inside the band.
    """
    t = memory.torque_cmp
    if tau_err > config.torque_band:
        t = INCREASE
    elif tau_err < -config.torque_band:
        t = DECREASE
    elif (t == INCREASE and tau_err <= 0) or (t == DECREASE and tau_err >= 0):
        t = HOLD

    f = memory.flux_cmp
    if flux_err > config.flux_band:
        f = INCREASE
    elif flux_err < -config.flux_band:
        f = DECREASE
    return DtcMemory(t, f)


def dtc_step(
    state, config: DtcConfig, spec: TrackingSpec, params: MotorParams, memory: DtcMemory
) -> tuple[int, DtcMemory]:
    """One DTC decision; returns the ModeId to apply and the new comparator memory."""
    xi = _as_state(state)
    tau, flux = motor_outputs(xi, params)
    if flux < FLUX_EPS:
        raise SingularFluxError(f"stator flux magnitude {flux:.3g} Wb below {FLUX_EPS:g}")
    y_d = np.asarray(spec.y_d, dtype=float)
    memory = update_comparators(y_d[0] - tau, y_d[1] - flux, config, memory)
    sector = flux_sector(xi[1], xi[2])
    return config.table[(sector, memory.torque_cmp, memory.flux_cmp)], memory
