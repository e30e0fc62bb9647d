"""dq-frame induction motor fed by a two-level inverter, as a 7-mode switched system.

The continuous state is ``xi = [omega, lambda_ds, lambda_qs, lambda_dr, lambda_qr]``
and the controlled outputs are the electromagnetic torque and the stator
flux magnitude. Modes 1..7 of the inverter table are ModeId 0..6 here.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .core import ModifiedOutput, SwitchedSystem, modified_output_build

__all__ = [
    "MotorParams",
    "MotorState",
    "SingularFluxError",
    "REFERENCE_PARAMS",
    "DEFAULT_PARAMS",
    "N_MODES",
    "inverter_voltage",
    "voltage_table",
    "currents",
    "torque",
    "torque_from_currents",
    "motor_field",
    "motor_outputs",
    "output_derivative",
    "output_derivatives",
    "output_jacobian",
    "motor_system",
    "aligned_flux_samples",
    "region_states",
    "vdc_lower_bound",
    "min_vdc_for_sign_coverage",
    "initial_state_for_targets",
    "speed_output_system",
    "speed_modified_output",
    "load_params",
    "save_params",
]

N_MODES = 7
FLUX_EPS = 1e-9

PARAM_KEYS = ("L_s", "L_r", "L_m", "R_s", "R_r", "P", "J", "b", "tau_L", "V_DC")

# inverter vectors as multiples of V_DC: (v_d, v_q), zero vector first
_SQRT3_2 = math.sqrt(3.0) / 2.0
_VECTOR_TABLE = (
    (0.0, 0.0),
    (1.0, 0.0),
    (0.5, _SQRT3_2),
    (-0.5, _SQRT3_2),
    (-1.0, 0.0),
    (-0.5, -_SQRT3_2),
    (0.5, -_SQRT3_2),
)


class SingularFluxError(ValueError):
    """Stator flux magnitude too small for the flux-magnitude output to be differentiable."""


@dataclass(frozen=True)
class MotorParams:
    L_s: float
    L_r: float
    L_m: float
    R_s: float
    R_r: float
    P: int
    J: float
    b: float
    tau_L: float
    V_DC: float

    def __post_init__(self):
        for name in ("L_s", "L_r", "R_s", "R_r", "J", "V_DC"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        # L_m = 0 is allowed: a magnetically decoupled machine
        if self.L_m < 0:
            raise ValueError("L_m must be non-negative")
        if int(self.P) != self.P or self.P < 2 or self.P % 2:
            raise ValueError("P must be an even integer >= 2")
        if self.L_s * self.L_r - self.L_m**2 == 0:
            raise ValueError("inductance matrix is singular (L_s*L_r == L_m**2)")

    def with_vdc(self, V_DC: float) -> "MotorParams":
        return replace(self, V_DC=V_DC)

    @cached_property
    def L(self) -> np.ndarray:
        Ls, Lr, Lm = self.L_s, self.L_r, self.L_m
        return np.array(
            [[Ls, 0, Lm, 0], [0, Ls, 0, Lm], [Lm, 0, Lr, 0], [0, Lm, 0, Lr]], dtype=float
        )

    @cached_property
    def L_inv(self) -> np.ndarray:
        Ls, Lr, Lm = self.L_s, self.L_r, self.L_m
        D = Ls * Lr - Lm**2
        return np.array(
            [[Lr, 0, -Lm, 0], [0, Lr, 0, -Lm], [-Lm, 0, Ls, 0], [0, -Lm, 0, Ls]], dtype=float
        ) / D

    @cached_property
    def R(self) -> np.ndarray:
        return np.diag([self.R_s, self.R_s, self.R_r, self.R_r])

    @cached_property
    def C(self) -> np.ndarray:
        C = np.zeros((4, 4))
        C[2, 3] = -1.0
        C[3, 2] = 1.0
        return C

    @cached_property
    def B(self) -> np.ndarray:
        B = np.zeros((4, 2))
        B[0, 0] = B[1, 1] = 1.0
        return B

    @cached_property
    def torque_gain(self) -> float:
        return 3.0 * self.P / 4.0

    @cached_property
    def M1(self) -> np.ndarray:
        return self.C @ self.L_inv - self.L_inv @ self.C

    @cached_property
    def RL_inv(self) -> np.ndarray:
        return self.R @ self.L_inv

    @cached_property
    def voltages(self) -> np.ndarray:
        """``(7, 2)`` array of inverter voltages indexed by ModeId."""
        return self.V_DC * np.array(_VECTOR_TABLE)


@dataclass(frozen=True)
class MotorState:
    omega: float
    lam: tuple

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lam)
        if len(lam) != 4:
            raise ValueError("flux vector must have 4 entries")
        if not all(math.isfinite(v) for v in (self.omega, *lam)):
            raise ValueError("motor state must be finite")
        object.__setattr__(self, "lam", lam)

    def to_vector(self) -> np.ndarray:
        return np.array([self.omega, *self.lam], dtype=float)

    @classmethod
    def from_vector(cls, xi) -> "MotorState":
        xi = np.asarray(xi, dtype=float)
        return cls(float(xi[0]), tuple(xi[1:5]))


REFERENCE_PARAMS = MotorParams(
    L_s=0.5676, L_r=0.5676, L_m=0.55, R_s=1.19, R_r=1.04, P=4, J=0.04, b=0.07, tau_L=5.0, V_DC=225.0
)
# the flux/torque experiment runs at 450 V, above the computed solvability bound
DEFAULT_PARAMS = REFERENCE_PARAMS.with_vdc(450.0)


def inverter_voltage(mode: int, params: MotorParams) -> tuple[float, float]:
    """Stator voltage ``(v_d, v_q)`` of inverter mode ``mode`` in 1..7 (1 is the zero vector)."""
    if isinstance(mode, bool) or int(mode) != mode or not 1 <= mode <= N_MODES:
        raise ValueError(f"inverter mode must be in 1..{N_MODES}, got {mode!r}")
    d, q = _VECTOR_TABLE[int(mode) - 1]
    return (d * params.V_DC, q * params.V_DC)


def voltage_table(params: MotorParams) -> np.ndarray:
    return params.voltages


def _as_state(state) -> np.ndarray:
    if isinstance(state, MotorState):
        return state.to_vector()
    return np.asarray(state, dtype=float)


def currents(lam, params: MotorParams) -> np.ndarray:
    return params.L_inv @ np.asarray(lam, dtype=float)


def torque(lam, params: MotorParams) -> float:
    lam = np.asarray(lam, dtype=float)
    return float(params.torque_gain * lam @ params.C @ params.L_inv @ lam)


def torque_from_currents(lam, params: MotorParams) -> float:
    """Torque from ``i_qs*lambda_ds - i_ds*lambda_qs``; equal to :func:`torque`."""
    lam = np.asarray(lam, dtype=float)
    i = currents(lam, params)
    return float(1.5 * params.P * 0.5 * (i[1] * lam[0] - i[0] * lam[1]))


def motor_field(params: MotorParams, mode: int):
    """Vector field of ModeId ``mode`` as a function of the 5-vector state."""
    if not 0 <= mode < N_MODES:
        raise ValueError(f"ModeId must be in 0..{N_MODES - 1}, got {mode}")
    Q = params.C @ params.L_inv
    A = -params.RL_inv
    C = params.C
    Bv = params.B @ params.voltages[mode]
    k, J, b, tau_L = params.torque_gain, params.J, params.b, params.tau_L

    def f(xi):
        xi = _as_state(xi)
        w, lam = xi[0], xi[1:]
        dw = (-b * w + k * (lam @ Q @ lam) - tau_L) / J
        dlam = A @ lam + w * (C @ lam) + Bv
        return np.concatenate(([dw], dlam))

    return f


def motor_outputs(state, params: MotorParams) -> tuple[float, float]:
    """``(tau, lambda_sm)`` for a state."""
    xi = _as_state(state)
    lam = xi[1:]
    return torque(lam, params), math.hypot(lam[0], lam[1])


def _flux_mag(lam) -> float:
    s = math.hypot(lam[0], lam[1])
    if s < FLUX_EPS:
        raise SingularFluxError(f"stator flux magnitude {s:.3g} Wb below {FLUX_EPS:g}")
    return s


def output_jacobian(state, params: MotorParams) -> np.ndarray:
    xi = _as_state(state)
    lam = xi[1:]
    s = _flux_mag(lam)
    Q = params.C @ params.L_inv
    jac = np.zeros((2, 5))
    jac[0, 1:] = params.torque_gain * (Q + Q.T) @ lam
    jac[1, 1] = lam[0] / s
    jac[1, 2] = lam[1] / s
    return jac


def output_derivatives(state, params: MotorParams) -> np.ndarray:
    """``(7, 2)`` array of ``(d tau/dt, d lambda_sm/dt)`` for every mode, closed form."""
    xi = _as_state(state)
    w, lam = xi[0], xi[1:]
    s = _flux_mag(lam)
    lam_M1 = lam @ params.M1
    drift = -params.RL_inv @ lam + w * (params.C @ lam)
    V = params.voltages
    tau_rate = params.torque_gain * (lam_M1 @ drift + V @ lam_M1[:2])
    flux_rate = (V @ lam[:2] - lam[:2] @ (params.RL_inv @ lam)[:2]) / s
    return np.column_stack((tau_rate, flux_rate))


def output_derivative(state, mode: int, params: MotorParams) -> np.ndarray:
    return output_derivatives(state, params)[mode]


def motor_system(params: MotorParams = DEFAULT_PARAMS) -> SwitchedSystem:
    """The motor as a 7-mode switched system with outputs ``(tau, lambda_sm)``."""
    return SwitchedSystem(
        n=5,
        m=2,
        fields=tuple(motor_field(params, x) for x in range(N_MODES)),
        output=lambda xi: np.array(motor_outputs(xi, params)),
        output_jacobian=lambda xi: output_jacobian(xi, params),
        rates=lambda xi: output_derivatives(xi, params),
    )


def _rotate(v: np.ndarray, angle) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.stack((c * v[..., 0] - s * v[..., 1], s * v[..., 0] + c * v[..., 1]), axis=-1)


def aligned_flux_samples(
    count: int, flux_max: float, band: float = 0.0, seed: int = 0, on_boundary: bool = False
) -> np.ndarray:
    """Flux vectors with rotor flux close to stator flux, ``||lambda|| <= flux_max``.

    The rotor flux is the stator flux rotated by an angle in ``[-band, band]``
    radians and scaled by a factor in ``[1 - band, 1 + band]``. With
    ``band = 0`` the samples lie exactly on ``lambda_r = lambda_s``.
    """
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.0, 2 * np.pi, count)
    ls = np.column_stack((np.cos(phi), np.sin(phi)))
    lr = _rotate(ls, rng.uniform(-band, band, count)) * rng.uniform(1 - band, 1 + band, count)[:, None]
    lam = np.hstack((ls, lr))
    lam /= np.linalg.norm(lam, axis=1, keepdims=True)
    radius = np.ones(count) if on_boundary else rng.random(count) ** 0.25
    return lam * (flux_max * radius)[:, None]


def region_states(
    count: int, omega_max: float, flux_max: float, band: float = 0.05, seed: int = 0
) -> np.ndarray:
    """Pseudorandom 5-vector states with ``0 < omega < omega_max`` and near-aligned flux."""
    rng = np.random.default_rng(seed)
    omega = rng.uniform(0.0, omega_max, count)
    lam = aligned_flux_samples(count, flux_max, band=band, seed=seed + 1)
    return np.column_stack((omega, lam))


def _bound_terms(params: MotorParams, omega: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Worst-case ratios of the flux and torque sign conditions, shape ``(len(omega), len(lam))``."""
    M1, C, B = params.M1, params.C, params.B
    M1lam = lam @ M1.T
    # lam^T M1 M2 lam with M2 = R L^-1 - omega C
    base = np.einsum("ki,ki->k", M1lam, lam @ params.RL_inv.T)
    rot = np.einsum("ki,ki->k", M1lam, lam @ C.T)
    num1 = base[None, :] - omega[:, None] * rot[None, :]
    den1 = np.linalg.norm(M1lam @ B, axis=1)
    num2 = np.einsum("ki,ki->k", lam @ B, (lam @ params.RL_inv.T) @ B)
    den2 = np.linalg.norm(lam @ B, axis=1)
    ok = (den1 > 1e-12) & (den2 > 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = num1 / den1[None, :]
        t2 = np.broadcast_to(num2 / den2, t1.shape)
    out = np.maximum(t1, t2)
    return np.where(ok[None, :], out, -np.inf)


def vdc_lower_bound(
    params: MotorParams,
    omega_max: float = 50.0,
    flux_max: float = 5.0,
    n_omega: int = 50,
    n_flux: int = 10_000,
    band: float = 0.0,
    seed: int = 0,
) -> float:
    """Smallest DC-link voltage satisfying the worst-case angle sign condition.

    Searches ``omega`` on a grid in ``(0, omega_max]`` and near-aligned flux
    vectors with ``||lambda|| <= flux_max`` (see :func:`aligned_flux_samples`),
    and returns ``max(term) / cos(5*pi/12)``. Samples whose denominators
    vanish are skipped.
    """
    if not (omega_max > 0 and flux_max > 0 and n_omega >= 1 and n_flux >= 1):
        raise ValueError("sampling region must be nonempty with positive bounds")
    omega = omega_max * np.arange(1, n_omega + 1) / n_omega
    lam = aligned_flux_samples(n_flux, flux_max, band=band, seed=seed, on_boundary=True)
    terms = _bound_terms(params, omega, lam)
    worst = float(np.max(terms))
    if not math.isfinite(worst):
        raise ValueError("no valid samples in the region")
    return worst / math.cos(5 * math.pi / 12)


def min_vdc_for_sign_coverage(params: MotorParams, state) -> float:
    """Smallest V_DC at which every sign pattern of (tau rate, flux rate) is reachable.

    Output rates are affine in V_DC for each mode, so each pattern/mode pair
    gives a threshold; the result is the max over patterns of the min over
    modes. Returns ``inf`` when some pattern is unreachable at any voltage.
    """
    xi = _as_state(state)
    unit = params.with_vdc(1.0)
    zero = output_derivatives(xi, unit)[0]
    gain = output_derivatives(xi, unit)[1:] - zero
    worst = 0.0
    for mu in ((-1, -1), (-1, 1), (1, -1), (1, 1)):
        mu = np.array(mu)
        g = mu * gain
        a = -mu * zero
        # need g * V > a componentwise; g < 0 only holds below a ceiling, treated as unreachable
        with np.errstate(divide="ignore", invalid="ignore"):
            need = np.where(g > 0, a / g, np.where((g == 0) & (a < 0), 0.0, np.inf))
        best = float(np.min(np.max(np.maximum(need, 0.0), axis=1)))
        if np.all(mu * zero > 0):
            best = 0.0
        worst = max(worst, best)
    return worst


def initial_state_for_targets(
    params: MotorParams, tau_d: float, lambda_sm_d: float, omega_max: float = 50.0
) -> MotorState:
    """A state whose outputs equal ``(tau_d, lambda_sm_d)``.

    Stator flux lies on the d-axis, rotor d-flux is ``(L_m/L_s)`` times the
    stator flux, and the rotor q-flux is found by bisection on the torque.
    Speed is the mechanical steady state clamped to ``[0, omega_max]``.
    """
    lam_ds = float(lambda_sm_d)
    lam_dr = params.L_m / params.L_s * lam_ds

    def tau_err(lam_qr):
        return torque((lam_ds, 0.0, lam_dr, lam_qr), params) - tau_d

    span = 10.0 * max(1.0, abs(lam_ds))
    lo, hi = -span, span
    f_lo, f_hi = tau_err(lo), tau_err(hi)
    if f_lo == 0:
        hi = lo
    elif f_hi == 0:
        lo = hi
    elif np.sign(f_lo) == np.sign(f_hi):
        raise ValueError(f"targets unreachable: no rotor flux gives torque {tau_d}")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        f_mid = tau_err(mid)
        if f_mid == 0:
            lo = hi = mid
        elif np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    lam_qr = 0.5 * (lo + hi)
    omega = min(max((tau_d - params.tau_L) / params.b, 0.0), omega_max)
    return MotorState(omega, (lam_ds, 0.0, lam_dr, lam_qr))


def speed_output_system(params: MotorParams = DEFAULT_PARAMS) -> SwitchedSystem:
    """The motor with rotor speed as its single output."""
    jac = np.zeros((1, 5))
    jac[0, 0] = 1.0
    return SwitchedSystem(
        n=5,
        m=1,
        fields=tuple(motor_field(params, x) for x in range(N_MODES)),
        output=lambda xi: np.array([_as_state(xi)[0]]),
        output_jacobian=lambda xi: jac,
    )


def speed_modified_output(
    params: MotorParams = DEFAULT_PARAMS, a: float = 1.0
) -> tuple[SwitchedSystem, ModifiedOutput]:
    """Motor with output ``omega + a * d(omega)/dt`` and the matching :class:`ModifiedOutput`."""
    if not a > 0:
        raise ValueError("a must be positive")
    J, b, tau_L = params.J, params.b, params.tau_L
    Q = params.C @ params.L_inv
    k = params.torque_gain

    def h(xi):
        xi = _as_state(xi)
        w, lam = xi[0], xi[1:]
        return np.array([w + a * (-(b / J) * w + (k * (lam @ Q @ lam) - tau_L) / J)])

    def dh(xi):
        xi = _as_state(xi)
        jac = np.zeros((1, 5))
        jac[0, 0] = 1.0 - a * b / J
        jac[0, 1:] = (a / J) * k * (Q + Q.T) @ xi[1:]
        return jac

    system = SwitchedSystem(
        n=5,
        m=1,
        fields=tuple(motor_field(params, x) for x in range(N_MODES)),
        output=h,
        output_jacobian=dh,
    )
    return system, modified_output_build((1.0, a))


def load_params(path, section: str = "motor") -> MotorParams:
    """Read motor parameters from an INI-style file.

    The keys must be exactly ``L_s, L_r, L_m, R_s, R_r, P, J, b, tau_L, V_DC``
    in SI units, under ``[motor]``.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str
    path = Path(path)
    if not parser.read(path):
        raise FileNotFoundError(f"cannot read parameter file {path}")
    return params_from_mapping(parser[section])


def params_from_mapping(values) -> MotorParams:
    missing = [k for k in PARAM_KEYS if k not in values]
    unknown = [k for k in values if k not in PARAM_KEYS]
    if missing or unknown:
        raise ValueError(f"bad motor keys: missing {missing}, unknown {unknown}")
    kw = {k: float(values[k]) for k in PARAM_KEYS}
    if not kw["P"].is_integer():
        raise ValueError("P must be an integer")
    kw["P"] = int(kw["P"])
    return MotorParams(**kw)


def save_params(params: MotorParams, path) -> None:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser["motor"] = {k: repr(v) for k, v in asdict(params).items()}
    with open(path, "w") as fh:
        parser.write(fh)
