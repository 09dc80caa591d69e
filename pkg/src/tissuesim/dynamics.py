"""Critically damped harmonic oscillators.

Every smoothly fluctuating quantity of the simulator (profile sizes, rotation
angles, control points of the spring lattice) follows

    a_n     = f_n - lam * v_n - k * (x_n - x_eq)
    v_{n+1} = v_n + dt * a_n
    x_{n+1} = x_n + dt * v_{n+1}

with unit mass and critical damping ``lam = 2 / tau``, ``k = 1 / tau**2``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

__all__ = [
    "OscillatorState",
    "critical_params",
    "oscillator_step",
    "calibrate_force_std",
    "stationary_variance",
]


def critical_params(tau: float) -> tuple[float, float]:
    """Return ``(lam, k)`` for a critically damped oscillator of critical time `tau`.

    >>> critical_params(10.0)
    (0.2, 0.01)
    """
    tau = float(tau)
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    return 2.0 / tau, 1.0 / tau**2


@dataclass(frozen=True)
class OscillatorState:
    """Value, velocity and equilibrium of a (possibly vector valued) oscillator.

    Arrays of any shape are accepted as long as all three agree; the
    simulator uses ``(n_profiles, n_components)`` arrays to drive a whole
    population at once.
    """

    value: np.ndarray
    velocity: np.ndarray
    equilibrium: np.ndarray
    tau: float = 10.0

    def __post_init__(self):
        value = np.asarray(self.value, dtype=float)
        velocity = np.asarray(self.velocity, dtype=float)
        equilibrium = np.asarray(self.equilibrium, dtype=float)
        if not (value.shape == velocity.shape == equilibrium.shape):
            raise ValueError(
                "value, velocity and equilibrium must share a shape, got "
                f"{value.shape}, {velocity.shape}, {equilibrium.shape}"
            )
        critical_params(self.tau)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "velocity", velocity)
        object.__setattr__(self, "equilibrium", equilibrium)

    @classmethod
    def at_rest(cls, equilibrium, tau: float = 10.0) -> "OscillatorState":
        equilibrium = np.array(equilibrium, dtype=float)
        return cls(equilibrium.copy(), np.zeros_like(equilibrium), equilibrium, tau)

    @property
    def damping(self) -> float:
        return critical_params(self.tau)[0]

    @property
    def stiffness(self) -> float:
        return critical_params(self.tau)[1]

    @property
    def offset(self) -> np.ndarray:
        return self.value - self.equilibrium

    def energy(self) -> np.ndarray:
        """Kinetic plus potential energy, per component."""
        return 0.5 * self.velocity**2 + 0.5 * self.stiffness * self.offset**2


def oscillator_step(state: OscillatorState, force=0.0, dt: float = 1.0) -> OscillatorState:
    """Advance `state` by one semi-implicit Euler step under `force`."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    force = np.asarray(force, dtype=float)
    if force.ndim and force.shape != state.value.shape:
        raise ValueError(f"force shape {force.shape} does not match state shape {state.value.shape}")
    lam, k = critical_params(state.tau)
    acceleration = force - lam * state.velocity - k * (state.value - state.equilibrium)
    velocity = state.velocity + dt * acceleration
    value = state.value + dt * velocity
    return replace(state, value=value, velocity=velocity)


def _transition(tau: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    # Linear map of (offset, velocity) for one step, and the force input vector.
    lam, k = critical_params(tau)
    a = np.array(
        [
            [1.0 - dt * dt * k, dt * (1.0 - dt * lam)],
            [-dt * k, 1.0 - dt * lam],
        ]
    )
    b = np.array([[dt * dt], [dt]])
    return a, b


def stationary_variance(tau: float, dt: float = 1.0) -> float:
    """Stationary variance of ``value - equilibrium`` per unit force variance.

    Solves the discrete Lyapunov equation ``P = A P A^T + b b^T`` of the
    one-step recurrence.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    a, b = _transition(tau, dt)
    if np.max(np.abs(np.linalg.eigvals(a))) >= 1.0:
        raise ValueError(f"recurrence is not stable for tau={tau}, dt={dt}")
    cov = solve_discrete_lyapunov(a, b @ b.T)
    return float(cov[0, 0])


def calibrate_force_std(target_std: float, tau: float = 10.0, dt: float = 1.0) -> float:
    """Std of i.i.d. Gaussian forces giving a stationary spread of `target_std`.

    Parameters
    ----------
    target_std : float
        Desired stationary standard deviation of ``value - equilibrium``.
    tau : float
        Critical time in frames.
    dt : float
        Integration step in frames.

    Returns
    -------
    float
        Force standard deviation, linear in `target_std`.
    """
    if target_std < 0:
        raise ValueError(f"target_std must be >= 0, got {target_std}")
    return float(target_std) / np.sqrt(stationary_variance(tau, dt))
