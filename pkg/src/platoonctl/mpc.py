"""Receding-horizon platoon controller in condensed form.

Future platoon states over an N-step window are written as an affine map of
the current state, the previously applied command, and the stacked command
deltas: pred = Phi X + Lam U_prev + Gamma dU + offset. Substituting into the
tracking cost gives a strictly convex QP in dU alone; only the first delta
block of the minimizer is applied each step.

Spacing limits couple consecutive vehicle pairs (I-1 rows per step); speed
and acceleration limits apply per vehicle. The state-error weight over the
window zeroes the final block, so xN enters constraints but not the cost.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import qp
from .dynamics import PlatoonModel, PlatoonState
from .errors import ParameterError, StructuralError


@dataclass(frozen=True)
class MpcWeights:
    q1: float  # position error
    q2: float  # velocity error
    q3: float  # acceleration error
    q4: float  # command delta

    def __post_init__(self):
        if min(self.q1, self.q2, self.q3) < 0:
            raise ParameterError("state-error weights must be nonnegative")
        if not self.q4 > 0:
            raise ParameterError("q4 must be positive (strict convexity)")


@dataclass(frozen=True)
class MpcLimits:
    d_min: float
    d_max: float
    v_min: float
    v_max: float
    a_min: float
    a_max: float

    def __post_init__(self):
        for lo, hi, name in (
            (self.d_min, self.d_max, "spacing"),
            (self.v_min, self.v_max, "speed"),
            (self.a_min, self.a_max, "acceleration"),
        ):
            if not lo < hi:
                raise ParameterError(f"{name} bounds must satisfy min < max")


@dataclass(frozen=True)
class MpcConfig:
    horizon: int
    weights: MpcWeights
    limits: MpcLimits

    def __post_init__(self):
        if self.horizon < 1:
            raise ParameterError("horizon must be at least 1")


@dataclass(frozen=True)
class PredictionMatrices:
    """Blocks of the condensed N-step prediction map."""

    Phi: np.ndarray  # (3IN, 3I)
    Lam: np.ndarray  # (3IN, I)
    Gamma: np.ndarray  # (3IN, IN), block lower-triangular
    offset: np.ndarray  # (3IN,)
    size: int
    horizon: int


@dataclass(frozen=True)
class ControlPlan:
    delta_u: np.ndarray  # (IN,)
    u_next: np.ndarray  # (I,)
    status: str  # optimal | infeasible | max-iterations
    solution: qp.QpSolution
    predicted: np.ndarray  # (3IN,) window under delta_u


def build_prediction(model, horizon):
    """Phi/Lam/Gamma/offset of the window map (see module docstring).

    Block n (0-based, predicting step k+n+1) is:
      Phi_n = A^(n+1), Lam_n = (sum_{j<=n} A^j) B,
      Gamma_{n,m} = (sum_{j<=n-m} A^j) B for m <= n, offset_n = (sum_{j<=n} A^j) C.
    """
    if horizon < 1:
        raise ParameterError("horizon must be at least 1")
    A, B, C = model.A, model.B, model.C
    I = model.size
    nx, nu = 3 * I, I
    power = np.eye(nx)
    cum = np.zeros((nx, nx))
    cums = []  # cums[j] = sum_{i=0..j} A^i
    powers = []  # powers[j] = A^(j+1)
    for _ in range(horizon):
        cum = cum + power
        cums.append(cum.copy())
        power = A @ power
        powers.append(power.copy())

    Phi = np.zeros((nx * horizon, nx))
    Lam = np.zeros((nx * horizon, nu))
    Gamma = np.zeros((nx * horizon, nu * horizon))
    offset = np.zeros(nx * horizon)
    for n in range(horizon):
        rows = slice(n * nx, (n + 1) * nx)
        Phi[rows] = powers[n]
        Lam[rows] = cums[n] @ B
        offset[rows] = cums[n] @ C
        for m in range(n + 1):
            Gamma[rows, m * nu : (m + 1) * nu] = cums[n - m] @ B
    return PredictionMatrices(Phi=Phi, Lam=Lam, Gamma=Gamma, offset=offset, size=I, horizon=horizon)


def predict_window(pred, x, u_prev, delta_u):
    """Stacked window for a given delta sequence."""
    return pred.Phi @ x + pred.Lam @ u_prev + pred.Gamma @ delta_u + pred.offset


def window_weight_diag(size, horizon, weights):
    """Diagonal of the window state-error weight; final block zeroed."""
    q_step = np.concatenate(
        [
            np.full(size, weights.q1),
            np.full(size, weights.q2),
            np.full(size, weights.q3),
        ]
    )
    w = np.tile(q_step, horizon)
    w[-3 * size :] = 0.0
    return w


def cost_hessian(pred, weights):
    w = window_weight_diag(pred.size, pred.horizon, weights)
    H = weights.q4 * np.eye(pred.size * pred.horizon) + pred.Gamma.T @ (w[:, None] * pred.Gamma)
    return 0.5 * (H + H.T)


def cost_linear(pred, weights, x, u_prev, ref_window):
    w = window_weight_diag(pred.size, pred.horizon, weights)
    e = pred.Phi @ x + pred.Lam @ u_prev + pred.offset - ref_window
    return pred.Gamma.T @ (w * e)


def build_cost(pred, weights, x, u_prev, ref_window):
    """(H, f) of the condensed objective dU'H dU + 2 f'dU."""
    x = np.asarray(x, dtype=float)
    ref_window = np.asarray(ref_window, dtype=float)
    if ref_window.shape[0] != 3 * pred.size * pred.horizon:
        raise StructuralError("reference window length must be 3*I*N")
    return cost_hessian(pred, weights), cost_linear(pred, weights, x, u_prev, ref_window)


def spacing_matrix(size):
    """(I-1, I) map p -> trailing-minus-leading position differences."""
    L = np.zeros((size - 1, size))
    for i in range(size - 1):
        L[i, i] = -1.0
        L[i, i + 1] = 1.0
    return L


def step_constraint_block(size, limits):
    """Per-step (Gc, g) with rows reading Gc x + g <= 0 on a stacked state."""
    I = size
    eye = np.eye(I)
    zero = np.zeros((I, I))
    rows = []
    g_parts = []
    if I >= 2:
        L = spacing_matrix(I)
        zpad = np.zeros((I - 1, I))
        rows.append(np.hstack([L, zpad, zpad]))
        g_parts.append(np.full(I - 1, limits.d_min))
        rows.append(np.hstack([-L, zpad, zpad]))
        g_parts.append(np.full(I - 1, -limits.d_max))
    rows.append(np.hstack([zero, -eye, zero]))
    g_parts.append(np.full(I, limits.v_min))
    rows.append(np.hstack([zero, eye, zero]))
    g_parts.append(np.full(I, -limits.v_max))
    rows.append(np.hstack([zero, zero, -eye]))
    g_parts.append(np.full(I, limits.a_min))
    rows.append(np.hstack([zero, zero, eye]))
    g_parts.append(np.full(I, -limits.a_max))
    return np.vstack(rows), np.concatenate(g_parts)


def constraint_matrix(pred, limits):
    Gc, _ = step_constraint_block(pred.size, limits)
    Gbar = np.kron(np.eye(pred.horizon), Gc)
    return Gbar @ pred.Gamma


def constraint_bound(pred, limits, x, u_prev):
    Gc, g = step_constraint_block(pred.size, limits)
    Gbar = np.kron(np.eye(pred.horizon), Gc)
    gbar = np.tile(g, pred.horizon)
    free = pred.Phi @ x + pred.Lam @ u_prev + pred.offset
    return -Gbar @ free - gbar


def build_constraints(pred, limits, x, u_prev):
    """(G, h) with G dU <= h over the whole window."""
    return constraint_matrix(pred, limits), constraint_bound(pred, limits, x, u_prev)


class MpcController:
    """Per-scenario condensed matrices plus the warm-start state.

    The Hessian and constraint matrix depend only on the model and config,
    so they are assembled once; each solve refreshes the linear pieces.
    """

    def __init__(self, config, model, tol=1e-8, max_iter=5000):
        self.config = config
        self.model = model
        self.tol = tol
        self.max_iter = max_iter
        self.pred = build_prediction(model, config.horizon)
        self._H = cost_hessian(self.pred, config.weights)
        self._G = constraint_matrix(self.pred, config.limits)
        self._warm: Optional[np.ndarray] = None

    def solve(self, state, u_prev, ref_window):
        x = state.stacked() if isinstance(state, PlatoonState) else np.asarray(state, dtype=float)
        u_prev = np.asarray(u_prev, dtype=float)
        ref_window = np.asarray(ref_window, dtype=float)
        I = self.pred.size
        if ref_window.shape[0] != 3 * I * self.pred.horizon:
            raise StructuralError("reference window length must be 3*I*N")
        f = cost_linear(self.pred, self.config.weights, x, u_prev, ref_window)
        h = constraint_bound(self.pred, self.config.limits, x, u_prev)
        problem = qp.QpProblem(self._H, f, self._G, h)
        sol = qp.solve(problem, tol=self.tol, max_iter=self.max_iter, warm_start=self._warm)
        if sol.status == "optimal":
            delta = sol.x
            # Shift by one block for the next step's warm start.
            self._warm = np.concatenate([delta[I:], np.zeros(I)])
        else:
            delta = np.zeros(I * self.pred.horizon)
            self._warm = None
        return ControlPlan(
            delta_u=delta,
            u_next=u_prev + delta[:I],
            status=sol.status,
            solution=sol,
            predicted=predict_window(self.pred, x, u_prev, delta),
        )


def solve_mpc(config, model, state, u_prev, ref_window):
    """One-shot solve without persistent warm-start state."""
    return MpcController(config, model).solve(state, u_prev, ref_window)
