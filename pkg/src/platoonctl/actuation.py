"""Command-to-response channel: gain/offset model, its inverse, disturbances.

The channel maps a raw command u to a realized desired speed alpha*u + beta
plus an unmodeled residual. Compensation inverts the channel around a
residual estimate. Disturbance models corrupt the command on the plant side
(after compensation), which makes the induced residual the quantity the
online learner has to pick up.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ParameterError

AFFINE_COEFFS = (1.1, -3.0)
QUADRATIC_COEFFS = (0.01, 1.0, -3.0)


@dataclass(frozen=True)
class ActuationParams:
    alpha: float
    beta: float
    profile_name: str = "custom"

    def __post_init__(self):
        if self.alpha == 0:
            raise ParameterError("alpha must be nonzero")


# MPC commands are speed commands under the simulation profile; the robot
# profile reproduces the scaled-platform motor channel.
SIMULATION_PROFILE = ActuationParams(alpha=1.0, beta=0.0, profile_name="simulation")
ROBOT_PROFILE = ActuationParams(alpha=615.4, beta=25.0, profile_name="robot")


@dataclass(frozen=True)
class DisturbanceModel:
    """Plant-side command corruption with i.i.d. Gaussian noise per call."""

    kind: str  # none | affine | quadratic
    noise_sigma: float = 1.0
    seed: int = 0
    coefficients: Tuple[float, ...] = None

    def __post_init__(self):
        if self.kind not in ("none", "affine", "quadratic"):
            raise ParameterError(f"unknown disturbance kind {self.kind!r}")
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be nonnegative")
        if self.coefficients is None:
            default = {"none": (), "affine": AFFINE_COEFFS, "quadratic": QUADRATIC_COEFFS}
            object.__setattr__(self, "coefficients", default[self.kind])


def forward_actuation(u, params, residual_truth=0.0):
    """Realized desired speed alpha*u + beta + residual."""
    return params.alpha * u + params.beta + residual_truth


def invert_actuation(v_desired, params, residual_estimate=0.0):
    """Command realizing v_desired when the channel residual matches the estimate."""
    return (v_desired - params.beta - residual_estimate) / params.alpha


def apply_disturbance(u, model, rng):
    """Corrupt a command; draws one normal deviate for the noisy kinds."""
    if model.kind == "none":
        return u
    noise = model.noise_sigma * rng.normal()
    if model.kind == "affine":
        slope, offset = model.coefficients
        return slope * u + offset + noise
    a2, a1, a0 = model.coefficients
    return a2 * u * u + a1 * u + a0 + noise
