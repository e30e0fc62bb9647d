"""Switched systems under step-tracking restriction.

A switched system is a finite family of vector fields ``f_x`` indexed by the
mode ``x`` plus an output map ``h``. The tracking restriction keeps each
output error ``h(xi) - y_d`` inside its band ``eps`` or moving toward it; the
mode is the only actuation. The functions here compute which modes keep
that condition (the admissible set), how long a mode can stay admissible,
and which mode to jump to so that the next jump is as late as possible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import integrate, linalg

VectorField = Callable[[np.ndarray], np.ndarray]

__all__ = [
    "NumericalDivergenceError",
    "SolvabilityError",
    "StabilityError",
    "SwitchedSystem",
    "TrackingSpec",
    "HybridState",
    "ModifiedOutput",
    "ScanReport",
    "flow",
    "admissible_modes",
    "time_to_boundary_linear",
    "time_to_boundary_exact",
    "select_next_mode",
    "check_sign_coverage",
    "solvability_scan",
    "grid_states",
    "random_states",
    "modified_output_build",
    "modified_output_error_bound",
]


class NumericalDivergenceError(ArithmeticError):
    """A vector field returned a non-finite value."""

    def __init__(self, mode: int, state: np.ndarray, message: str = ""):
        self.mode = mode
        self.state = np.array(state, dtype=float)
        super().__init__(message or f"non-finite derivative in mode {mode} at state {self.state.tolist()}")


class SolvabilityError(RuntimeError):
    """No mode satisfies the tracking condition at some state."""

    def __init__(self, state: np.ndarray, errors: np.ndarray, rates: np.ndarray):
        self.state = np.array(state, dtype=float)
        self.errors = np.array(errors, dtype=float)
        # rates[x, i] is the output rate of component i under mode x
        self.rates = np.array(rates, dtype=float)
        super().__init__(
            f"no admissible mode at state {self.state.tolist()} "
            f"(output error {self.errors.tolist()})"
        )


class StabilityError(ValueError):
    """A modified-output polynomial has a root with non-negative real part."""

    def __init__(self, roots: np.ndarray):
        self.roots = np.asarray(roots)
        super().__init__(f"modified output is not stable, roots: {self.roots.tolist()}")


@dataclass(frozen=True)
class SwitchedSystem:
    """Mode-indexed family of vector fields with an output map.

    Parameters
    ----------
    n, m : int
        Continuous-state and output dimensions.
    fields : sequence of callables
        ``fields[x](xi)`` is the vector field of mode ``x``.
    output : callable
        ``output(xi)`` returns the m-vector ``h(xi)``.
    output_jacobian : callable
        ``output_jacobian(xi)`` returns the ``(m, n)`` Jacobian of ``output``.
    rates : callable, optional
        ``rates(xi)`` returns the ``(mode_count, m)`` array of output rates
        ``(dh/dxi) f_x(xi)`` for every mode. Plants with a closed form supply
        it; otherwise it is assembled from the Jacobian and the fields.
    """

    n: int
    m: int
    fields: Sequence[VectorField]
    output: Callable[[np.ndarray], np.ndarray]
    output_jacobian: Callable[[np.ndarray], np.ndarray]
    rates: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if len(self.fields) < 2:
            raise ValueError("a switched system needs at least two modes")
        if self.n < 1 or self.m < 1:
            raise ValueError("state and output dimensions must be positive")

    @property
    def mode_count(self) -> int:
        return len(self.fields)

    def output_rates(self, xi: np.ndarray) -> np.ndarray:
        if self.rates is not None:
            return np.asarray(self.rates(xi), dtype=float)
        jac = np.asarray(self.output_jacobian(xi), dtype=float)
        return np.stack([jac @ f(xi) for f in self.fields])


@dataclass(frozen=True)
class TrackingSpec:
    """Desired constant output and strictly positive error bounds."""

    y_d: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        y_d = np.atleast_1d(np.asarray(self.y_d, dtype=float))
        eps = np.atleast_1d(np.asarray(self.eps, dtype=float))
        if y_d.shape != eps.shape:
            raise ValueError("y_d and eps must have the same shape")
        if not np.all(eps > 0):
            raise ValueError("error bounds must be strictly positive")
        object.__setattr__(self, "y_d", y_d)
        object.__setattr__(self, "eps", eps)


@dataclass(frozen=True)
class HybridState:
    mode: int
    state: np.ndarray


@dataclass(frozen=True)
class ModifiedOutput:
    """Output ``y = sum_i coeffs[i] * z^(i)`` built from a signal and its derivatives."""

    coeffs: np.ndarray
    roots: np.ndarray

    @property
    def q(self) -> int:
        return len(self.coeffs) - 1


def _check_mode(system: SwitchedSystem, mode: int) -> None:
    if not 0 <= mode < system.mode_count:
        raise ValueError(f"mode {mode} out of range for {system.mode_count} modes")


def _eval(system: SwitchedSystem, mode: int, xi: np.ndarray) -> np.ndarray:
    d = np.asarray(system.fields[mode](xi), dtype=float)
    if not np.all(np.isfinite(d)):
        raise NumericalDivergenceError(mode, xi)
    return d


def flow(system: SwitchedSystem, mode: int, xi, dt: float, substeps: int = 1) -> np.ndarray:
    """Integrate mode ``mode`` for ``dt`` seconds with classical RK4."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    _check_mode(system, mode)
    x = np.array(xi, dtype=float)
    if dt == 0:
        return x
    h = dt / substeps
    for _ in range(substeps):
        k1 = _eval(system, mode, x)
        k2 = _eval(system, mode, x + 0.5 * h * k1)
        k3 = _eval(system, mode, x + 0.5 * h * k2)
        k4 = _eval(system, mode, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x)):
        raise NumericalDivergenceError(mode, x)
    return x


def _admissible_mask(errors: np.ndarray, rates: np.ndarray, eps: np.ndarray) -> np.ndarray:
    inside = np.abs(errors) < eps
    toward = np.sign(errors) * rates < 0
    return np.all(inside | toward, axis=1)


def admissible_modes(system: SwitchedSystem, spec: TrackingSpec, xi) -> frozenset:
    """Modes whose flow keeps every output inside its band or heading into it.

    An empty set is a legal answer; it means the tracking problem is not
    solvable at ``xi``.
    """
    xi = np.asarray(xi, dtype=float)
    errors = np.asarray(system.output(xi), dtype=float) - spec.y_d
    mask = _admissible_mask(errors, system.output_rates(xi), spec.eps)
    return frozenset(int(x) for x in np.flatnonzero(mask))


def _linear_times(errors: np.ndarray, rates: np.ndarray, eps: np.ndarray) -> np.ndarray:
    # time until each error component, moving at constant rate, leaves the band
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = -(errors - np.sign(rates) * eps) / rates
    theta = np.where(rates == 0, np.inf, theta)
    theta = np.maximum(theta, 0.0)
    return theta.min(axis=-1)


def time_to_boundary_linear(system: SwitchedSystem, spec: TrackingSpec, mode: int, xi) -> float:
    """Time until ``mode`` stops being admissible, assuming constant output rates."""
    _check_mode(system, mode)
    xi = np.asarray(xi, dtype=float)
    errors = np.asarray(system.output(xi), dtype=float) - spec.y_d
    rates = system.output_rates(xi)[mode]
    return float(_linear_times(errors, rates, spec.eps))


def time_to_boundary_exact(
    system: SwitchedSystem,
    spec: TrackingSpec,
    mode: int,
    xi,
    horizon: float,
    step: float,
    substeps: int = 1,
) -> float:
    """First time the flow of ``mode`` leaves the admissible region.

    The flow is sampled every ``step`` seconds and the first exit is refined
    by bisection down to ``step / 64``. Returns ``horizon`` when no exit is
    found.
    """
    if horizon <= 0 or step <= 0:
        raise ValueError("horizon and step must be positive")
    _check_mode(system, mode)

    def ok(state):
        return mode in admissible_modes(system, spec, state)

    x = np.array(xi, dtype=float)
    if not ok(x):
        return 0.0
    t = 0.0
    while t < horizon:
        h = min(step, horizon - t)
        x_next = flow(system, mode, x, h, substeps)
        if not ok(x_next):
            lo, hi, x_lo = 0.0, h, x
            while hi - lo > step / 64:
                mid = 0.5 * (lo + hi)
                x_mid = flow(system, mode, x_lo, mid - lo, substeps)
                if ok(x_mid):
                    lo, x_lo = mid, x_mid
                else:
                    hi = mid
            return min(t + hi, horizon)
        t += h
        x = x_next
    return float(horizon)


def select_next_mode(system: SwitchedSystem, spec: TrackingSpec, current: int, xi) -> int:
    """Keep ``current`` while admissible, else jump to the mode that stays admissible longest.

    Ties in the linear exit time go to the lowest mode index.
    """
    xi = np.asarray(xi, dtype=float)
    errors = np.asarray(system.output(xi), dtype=float) - spec.y_d
    rates = system.output_rates(xi)
    mask = _admissible_mask(errors, rates, spec.eps)
    if 0 <= current < len(mask) and mask[current]:
        return int(current)
    candidates = np.flatnonzero(mask)
    if candidates.size == 0:
        raise SolvabilityError(xi, errors, rates)
    theta = _linear_times(errors, rates[candidates], spec.eps)
    # argmax returns the first maximum, i.e. the lowest mode index
    return int(candidates[int(np.argmax(theta))])


def check_sign_coverage(system: SwitchedSystem, xi) -> tuple[bool, dict]:
    """Check that every strict sign pattern of the output rates is reachable.

    Returns ``(covered, witnesses)`` where ``witnesses`` maps each reachable
    pattern (tuple of +1/-1) to the lowest mode producing it. A zero rate
    matches neither sign.
    """
    signs = np.sign(system.output_rates(np.asarray(xi, dtype=float)))
    witnesses = {}
    for pattern in itertools.product((-1, 1), repeat=system.m):
        hits = np.flatnonzero(np.all(signs == np.array(pattern), axis=1))
        if hits.size:
            witnesses[pattern] = int(hits[0])
    return len(witnesses) == 2**system.m, witnesses


@dataclass
class ScanReport:
    """Outcome of a sampled solvability check."""

    condition: str
    n_samples: int = 0
    n_pass: int = 0
    failing_states: list = field(default_factory=list)

    @property
    def n_fail(self) -> int:
        return self.n_samples - self.n_pass

    @property
    def all_pass(self) -> bool:
        return self.n_samples > 0 and self.n_fail == 0

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "n_samples": self.n_samples,
            "n_pass": self.n_pass,
            "n_fail": self.n_fail,
            "failing_states": [np.asarray(s).tolist() for s in self.failing_states],
        }


def solvability_scan(
    system: SwitchedSystem,
    spec: Optional[TrackingSpec],
    states: Iterable,
    max_failures: int = 100,
) -> ScanReport:
    """Evaluate a solvability condition at sampled states.

    With a ``spec`` the admissible set must be nonempty at every state.
    Without one, the y_d-independent sign-coverage condition is used. This
    is a sampled check, not a proof over the whole region.
    """
    if spec is None:
        report = ScanReport(condition="sign_coverage")
        test = lambda s: check_sign_coverage(system, s)[0]  # noqa: E731
    else:
        report = ScanReport(condition="admissible_nonempty")
        test = lambda s: bool(admissible_modes(system, spec, s))  # noqa: E731
    for state in states:
        state = np.asarray(state, dtype=float)
        report.n_samples += 1
        if test(state):
            report.n_pass += 1
        elif len(report.failing_states) < max_failures:
            report.failing_states.append(state)
    if report.n_samples < 1:
        raise ValueError("solvability scan needs at least one state")
    return report


def grid_states(lower, upper, num) -> np.ndarray:
    """Uniform grid over the box ``[lower, upper]`` with ``num`` points per axis."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    num = np.broadcast_to(num, lower.shape)
    axes = [np.linspace(lo, hi, int(k)) for lo, hi, k in zip(lower, upper, num)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lower.size)


def random_states(lower, upper, count: int, seed: int = 0) -> np.ndarray:
    """Pseudorandom uniform samples from the box ``[lower, upper]``."""
    rng = np.random.default_rng(seed)
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    return rng.uniform(lower, upper, size=(count, lower.size))


def modified_output_build(coeffs) -> ModifiedOutput:
    """Validate a modified-output polynomial ``sum_i a_i s^i``; its roots must be stable."""
    a = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if a.size == 0 or a[-1] == 0:
        raise ValueError("coefficients must be nonempty with a nonzero leading entry")
    roots = np.roots(a[::-1]) if a.size > 1 else np.array([], dtype=complex)
    if np.any(roots.real >= 0):
        raise StabilityError(roots)
    return ModifiedOutput(coeffs=a, roots=roots)


def _impulse_l1_norm(a: np.ndarray, rtol: float = 1e-9) -> float:
    """Integral of ``|h(t)|`` for the impulse response of ``1 / sum_i a_i s^i``."""
    q = a.size - 1
    if q == 0:
        return 1.0 / abs(a[0])
    # controllable companion form; h(t) = c expm(A t) b
    monic = a / a[-1]
    A = np.zeros((q, q))
    A[:-1, 1:] = np.eye(q - 1)
    A[-1, :] = -monic[:-1]
    b = np.zeros(q)
    b[-1] = 1.0 / a[-1]
    c = np.zeros(q)
    c[0] = 1.0

    def h_abs(t):
        return abs(c @ linalg.expm(A * t) @ b)

    slowest = np.min(np.abs(np.roots(a[::-1]).real))
    chunk = 1.0 / slowest
    total, t0 = 0.0, 0.0
    while True:
        piece, _ = integrate.quad(h_abs, t0, t0 + chunk, limit=200, epsabs=1e-15, epsrel=1e-12)
        total += piece
        t0 += chunk
        # the remaining tail decays at least as fast as the slowest mode
        if piece <= rtol * total and t0 > 10 * chunk:
            break
    return total


def modified_output_error_bound(mo: ModifiedOutput, eps_y: float) -> float:
    """Error bound on the underlying signal given bound ``eps_y`` on the modified output."""
    if eps_y <= 0:
        raise ValueError("eps_y must be positive")
    if np.any(np.asarray(mo.roots).real >= 0):
        raise StabilityError(mo.roots)
    return eps_y * _impulse_l1_norm(np.asarray(mo.coeffs, dtype=float))
