"""Discrete-time longitudinal dynamics of a homogeneous vehicle platoon.

Single-vehicle state is (position, speed, acceleration). The command u is
mapped through a gain/offset channel (alpha*u + beta, a desired speed) and
the acceleration update chases it with a first-order lag of time constant
tau. Platoon matrices are Kronecker expansions of the single-vehicle ones
under grouped-by-quantity stacking [p1..pI, v1..vI, a1..aI], so the block
structure is literal: A_I = A (x) E_I.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, StructuralError


@dataclass(frozen=True)
class VehicleParams:
    """Time step, inertial lag, and the command-to-speed channel constants."""

    dt: float
    tau: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        if not self.tau > 0:
            raise ParameterError("tau must be positive")
        if self.alpha == 0:
            raise ParameterError("alpha must be nonzero")


@dataclass(frozen=True)
class VehicleState:
    p: float
    v: float
    a: float


@dataclass(frozen=True)
class PlatoonState:
    """Per-vehicle positions/speeds/accelerations, index 0 = front vehicle."""

    positions: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        object.__setattr__(self, "velocities", np.asarray(self.velocities, dtype=float))
        object.__setattr__(self, "accelerations", np.asarray(self.accelerations, dtype=float))
        n = self.positions.shape
        if self.velocities.shape != n or self.accelerations.shape != n or len(n) != 1 or n[0] < 1:
            raise StructuralError("positions/velocities/accelerations must be equal-length vectors")

    @property
    def size(self):
        return self.positions.shape[0]

    def stacked(self):
        """Flat [all p, all v, all a] vector."""
        return np.concatenate([self.positions, self.velocities, self.accelerations])

    @classmethod
    def from_stacked(cls, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] % 3 != 0 or x.shape[0] == 0:
            raise StructuralError("stacked state length must be a positive multiple of 3")
        n = x.shape[0] // 3
        return cls(x[:n], x[n : 2 * n], x[2 * n :])


@dataclass(frozen=True)
class PlatoonModel:
    """Kronecker-expanded platoon matrices X' = A X + B U + C."""

    A: np.ndarray  # (3I, 3I)
    B: np.ndarray  # (3I, I)
    C: np.ndarray  # (3I,)
    size: int
    params: VehicleParams


def build_single_matrices(params):
    """Single-vehicle (A, B, C) of the state update x' = A x + B u + C.

    A = [[1, dt, dt^2/2], [0, 1, dt], [0, -dt/tau, 0]],
    B = [0, 0, alpha*dt/tau], C = [0, 0, beta*dt/tau].
    """
    dt, tau = params.dt, params.tau
    A = np.array(
        [
            [1.0, dt, 0.5 * dt * dt],
            [0.0, 1.0, dt],
            [0.0, -dt / tau, 0.0],
        ]
    )
    B = np.array([0.0, 0.0, params.alpha * dt / tau])
    C = np.array([0.0, 0.0, params.beta * dt / tau])
    return A, B, C


def step_vehicle(state, u, params):
    """One step of the single-vehicle model."""
    A, B, C = build_single_matrices(params)
    x = np.array([state.p, state.v, state.a])
    p, v, a = A @ x + B * u + C
    return VehicleState(p, v, a)


def build_platoon_model(params, size):
    """Homogeneous platoon matrices via A_I = A (x) E_I, B_I = B (x) E_I."""
    if size < 1:
        raise ParameterError("platoon size must be at least 1")
    A, B, C = build_single_matrices(params)
    eye = np.eye(size)
    A_I = np.kron(A, eye)
    B_I = np.kron(B.reshape(3, 1), eye)
    C_I = np.kron(C, np.ones(size))
    return PlatoonModel(A=A_I, B=B_I, C=C_I, size=size, params=params)


def step_platoon(X, U, model):
    """One step of the stacked platoon model; equals vehicle-wise stepping."""
    U = np.asarray(U, dtype=float)
    if X.size != model.size or U.shape != (model.size,):
        raise StructuralError("state/command size does not match the model")
    x_next = model.A @ X.stacked() + model.B @ U + model.C
    return PlatoonState.from_stacked(x_next)


def platoon_error(X, X_ref):
    """Stacked componentwise error X - X_ref."""
    if X.size != X_ref.size:
        raise StructuralError("platoon states differ in size")
    return X.stacked() - X_ref.stacked()
