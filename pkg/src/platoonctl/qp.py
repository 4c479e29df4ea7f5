"""Dense solver for strictly convex quadratic programs.

Minimizes  x' H x + 2 f' x  subject to  G x <= h  with H symmetric positive
definite. The method is a dual active-set iteration in the Goldfarb-Idnani
style: start at the unconstrained minimizer, repeatedly pick a violated
constraint and take mixed primal-dual steps until it enters the active set,
dropping any active constraint whose multiplier would turn negative along
the way. Every inner solve reuses a single Cholesky factorization of H, so
problems of the size produced by the controller (tens of variables, a few
hundred rows) solve in well under a millisecond.

Infeasibility surfaces as a violated constraint whose normal lies in the
span of the active normals with no blocking multiplier (a Farkas-style
certificate); the offending row index is reported.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import NotPositiveDefiniteError, StructuralError

_TINY = 1e-13


@dataclass(frozen=True)
class KktResiduals:
    stationarity: float
    primal_violation: float
    complementarity: float

    def max(self):
        return max(self.stationarity, self.primal_violation, self.complementarity)


@dataclass
class QpProblem:
    """min x'Hx + 2f'x  s.t.  Gx <= h. H is symmetrized on construction."""

    H: np.ndarray
    f: np.ndarray
    G: np.ndarray = field(default=None)
    h: np.ndarray = field(default=None)

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.f = np.asarray(self.f, dtype=float).ravel()
        n = self.f.shape[0]
        if self.H.shape != (n, n):
            raise StructuralError("H must be square and match f")
        self.H = 0.5 * (self.H + self.H.T)
        if self.G is None:
            self.G = np.zeros((0, n))
        self.G = np.asarray(self.G, dtype=float).reshape(-1, n)
        if self.h is None:
            self.h = np.zeros(0)
        self.h = np.asarray(self.h, dtype=float).ravel()
        if self.h.shape[0] != self.G.shape[0]:
            raise StructuralError("G and h row counts differ")

    @property
    def n(self):
        return self.f.shape[0]

    @property
    def m(self):
        return self.G.shape[0]

    def objective(self, x):
        return float(x @ self.H @ x + 2.0 * self.f @ x)


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    status: str  # optimal | infeasible | max-iterations
    iterations: int
    kkt: KktResiduals
    multipliers: np.ndarray
    violated_row: Optional[int] = None


def check_kkt(problem, x, mu):
    """KKT residual triple for a candidate primal/dual pair (pure function)."""
    x = np.asarray(x, dtype=float).ravel()
    mu = np.asarray(mu, dtype=float).ravel()
    if x.shape[0] != problem.n or mu.shape[0] != problem.m:
        raise StructuralError("candidate point dimensions do not match the problem")
    grad = 2.0 * problem.H @ x + 2.0 * problem.f
    if problem.m:
        grad = grad + problem.G.T @ mu
        slack = problem.G @ x - problem.h
        primal = float(max(0.0, slack.max()))
        comp = float(np.abs(mu * slack).max())
    else:
        primal = 0.0
        comp = 0.0
    return KktResiduals(float(np.abs(grad).max()), primal, comp)


def solve(problem, tol=1e-8, max_iter=5000, warm_start=None):
    """Solve the QP; see module docstring for the method.

    warm_start only biases the order in which violated constraints enter the
    active set (rows tight or violated at the warm point are tried first);
    the returned minimizer is independent of it.
    """
    if tol <= 0:
        raise StructuralError("tol must be positive")
    H, f, G, h = problem.H, problem.f, problem.G, problem.h
    n, m = problem.n, problem.m
    try:
        chol = cho_factor(H)
    except LinAlgError as exc:
        raise NotPositiveDefiniteError("H is not positive definite") from exc

    x = -cho_solve(chol, f)
    mu_full = np.zeros(m)
    if m == 0:
        return QpSolution(x, "optimal", 1, check_kkt(problem, x, mu_full), mu_full)

    warm_rows = None
    if warm_start is not None:
        w = np.asarray(warm_start, dtype=float).ravel()
        if w.shape[0] != n:
            raise StructuralError("warm start length does not match the problem")
        warm_rows = (G @ w - h) >= -1e-7

    active = []  # row indices, in insertion order
    mu_act = np.zeros(0)
    iters = 0

    def finish(status, violated=None):
        mu = np.zeros(m)
        if active:
            mu[np.array(active)] = np.maximum(mu_act, 0.0)
        return QpSolution(x, status, iters, check_kkt(problem, x, mu), mu, violated)

    while True:
        iters += 1
        if iters > max_iter:
            return finish("max-iterations")
        slack = G @ x - h
        if slack.max() <= tol:
            return finish("optimal")
        if warm_rows is not None and np.any(warm_rows & (slack > tol)):
            masked = np.where(warm_rows, slack, -np.inf)
            p = int(np.argmax(masked))
        else:
            p = int(np.argmax(slack))
        n_p = -G[p]
        mu_p = 0.0

        while True:
            iters += 1
            if iters > max_iter:
                return finish("max-iterations")
            qinv_np = 0.5 * cho_solve(chol, n_p)
            if active:
                N_act = -G[np.array(active)].T  # (n, a)
                qinv_N = 0.5 * cho_solve(chol, N_act)
                S = N_act.T @ qinv_N
                try:
                    r = np.linalg.solve(S, N_act.T @ qinv_np)
                except np.linalg.LinAlgError:
                    r = np.linalg.lstsq(S, N_act.T @ qinv_np, rcond=None)[0]
                z = qinv_np - qinv_N @ r
            else:
                r = np.zeros(0)
                z = qinv_np

            # Full primal step length that makes constraint p feasible.
            z_dot_np = float(z @ n_p)
            viol_p = float(G[p] @ x - h[p])
            t_full = viol_p / z_dot_np if z_dot_np > _TINY else np.inf
            # Largest step before an active multiplier hits zero.
            blocking = np.where(r > _TINY)[0]
            if blocking.size:
                ratios = mu_act[blocking] / r[blocking]
                j = int(blocking[np.argmin(ratios)])
                t_dual = float(ratios.min())
            else:
                j = -1
                t_dual = np.inf

            if not np.isfinite(t_full) and not np.isfinite(t_dual):
                worst = int(np.argmax(G @ x - h))
                return finish("infeasible", violated=worst)

            if t_full <= t_dual:
                x = x + t_full * z
                mu_act = mu_act - t_full * r
                mu_p += t_full
                active.append(p)
                mu_act = np.append(mu_act, mu_p)
                break
            # Partial step: drop the blocking constraint and retry p.
            if np.isfinite(t_dual):
                x = x + t_dual * z
                mu_act = mu_act - t_dual * r
                mu_p += t_dual
                del active[j]
                mu_act = np.delete(mu_act, j)
