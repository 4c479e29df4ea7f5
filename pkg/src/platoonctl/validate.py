"""Embedded self-check suite: independent oracles for the core numerics.

Each check reimplements the quantity under test through a different route
(exhaustive enumeration, finite differences, step-by-step rollout, closed
forms) and never calls the code path it verifies to produce its expected
values.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import learner as nn
from . import mpc, qp
from .actuation import DisturbanceModel, apply_disturbance
from .dynamics import VehicleParams, VehicleState, build_platoon_model, step_vehicle
from .reference import IdmParams, constant_lead_profile, equilibrium_gap, generate_idm_reference, idm_accel
from .rng import SplitMix64


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    detail: str = ""


def brute_force_qp(problem, tol=1e-9):
    """Active-set enumeration oracle.

    Solves the equality-constrained KKT system for every constraint subset of
    size <= n, keeps the best feasible candidate, and reports (x, objective)
    or None when no subset produces a feasible point (infeasible problem).
    """
    n, m = problem.n, problem.m
    H2 = 2.0 * problem.H
    best = None
    for size in range(0, min(n, m) + 1):
        for subset in combinations(range(m), size):
            idx = list(subset)
            Gs = problem.G[idx]
            kkt = np.zeros((n + size, n + size))
            kkt[:n, :n] = H2
            if size:
                kkt[:n, n:] = Gs.T
                kkt[n:, :n] = Gs
            rhs = np.concatenate([-2.0 * problem.f, problem.h[idx]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            x = sol[:n]
            if m and (problem.G @ x - problem.h).max() > tol:
                continue
            obj = problem.objective(x)
            if best is None or obj < best[1]:
                best = (x, obj)
    return best


def random_qp_instance(rng, feasible=True):
    """Random strictly convex QP with n <= 8 variables, m <= 12 rows."""
    n = 1 + rng.next_u64() % 8
    m = rng.next_u64() % 13
    M = rng.normals(n * n).reshape(n, n)
    H = M.T @ M + 0.5 * np.eye(n)
    f = rng.normals(n)
    G = rng.normals(m * n).reshape(m, n) if m else np.zeros((0, n))
    x0 = rng.normals(n)
    if m:
        slack = np.array([2.0 * rng.uniform() for _ in range(m)])
        if not feasible:
            slack -= 0.5
        h = G @ x0 + slack
    else:
        h = np.zeros(0)
    return qp.QpProblem(H, f, G, h)


def check_qp_oracle(n_instances=300, seed=2024, tol=1e-6):
    """Solver objective vs enumeration oracle; KKT residuals on optima."""
    rng = SplitMix64(seed)
    worst_gap = 0.0
    worst_kkt = 0.0
    disagreements = 0
    for trial in range(n_instances):
        problem = random_qp_instance(rng, feasible=(trial % 5 != 0))
        sol = qp.solve(problem, tol=1e-8)
        oracle = brute_force_qp(problem)
        if sol.status == "optimal":
            if oracle is None:
                disagreements += 1
                continue
            worst_gap = max(worst_gap, abs(problem.objective(sol.x) - oracle[1]))
            worst_kkt = max(worst_kkt, sol.kkt.max())
        else:
            if oracle is not None:
                disagreements += 1
    passed = disagreements == 0 and worst_gap <= tol and worst_kkt <= 1e-8
    return PropertyResult(
        "qp-oracle-equivalence",
        passed,
        f"{n_instances} instances, max objective gap {worst_gap:.2e}, max KKT {worst_kkt:.2e}, "
        f"{disagreements} status disagreements",
    )


def check_gradients(n_cases=100, seed=7):
    """Analytic backprop vs central finite differences."""
    rng = SplitMix64(seed)
    worst = 0.0
    for case in range(n_cases):
        cfg = nn.MlpConfig(hidden_units=8, init_seed=rng.next_u64())
        net = nn.init_mlp(cfg)
        # Random nonzero output layer so every path carries gradient.
        net.w2 = rng.normals(cfg.hidden_units)
        net.b2 = rng.normal()
        x = rng.normals(3)
        y = rng.normal()
        worst = max(worst, nn.gradient_check(net, x, y))
    return PropertyResult(
        "mlp-gradient-check", worst < 1e-4, f"{n_cases} cases, max relative error {worst:.2e}"
    )


def check_prediction_consistency(n_cases=100, seed=11, builder=mpc.build_prediction):
    """Condensed window vs step-by-step rollout; builder injectable for tests."""
    rng = SplitMix64(seed)
    worst = 0.0
    for _ in range(n_cases):
        I = 1 + rng.next_u64() % 3
        N = 1 + rng.next_u64() % 5
        params = VehicleParams(
            dt=0.05 + 0.1 * rng.uniform(),
            tau=0.3 + rng.uniform(),
            alpha=0.5 + rng.uniform(),
            beta=2.0 * rng.normal(),
        )
        model = build_platoon_model(params, I)
        pred = builder(model, N)
        x = rng.normals(3 * I)
        u_prev = rng.normals(I)
        delta = rng.normals(I * N)
        window = mpc.predict_window(pred, x, u_prev, delta)
        # Rollout oracle.
        state = x.copy()
        u = u_prev.copy()
        expected = []
        for step in range(N):
            u = u + delta[step * I : (step + 1) * I]
            state = model.A @ state + model.B @ u + model.C
            expected.append(state.copy())
        worst = max(worst, float(np.abs(window - np.concatenate(expected)).max()))
    return PropertyResult(
        "prediction-vs-rollout", worst <= 1e-9, f"{n_cases} cases, max deviation {worst:.2e}"
    )


def check_idm_equilibria():
    params = IdmParams()
    jam = idm_accel(0.0, 0.0, params.s0, params)
    free = idm_accel(params.v0, 0.0, 1e9, params)
    lead_speed = 20.0
    lead = constant_lead_profile(0.1, 10.0, lead_speed)
    traj = generate_idm_reference(lead, 3, params, 0.1)
    drift = float(np.abs(traj.v - lead_speed).max())
    passed = jam == 0.0 and abs(free) < 1e-6 and drift < 1e-3
    return PropertyResult(
        "idm-fixed-points",
        passed,
        f"jam accel {jam:.2e}, free-flow accel {free:.2e}, equilibrium drift {drift:.2e} m/s",
    )


def check_disturbance_formulas():
    rng = SplitMix64(0)
    affine = DisturbanceModel(kind="affine", noise_sigma=0.0)
    quad = DisturbanceModel(kind="quadratic", noise_sigma=0.0)
    cases = [
        (apply_disturbance(10.0, affine, rng), 8.0),
        (apply_disturbance(10.0, quad, rng), 8.0),
        (apply_disturbance(20.0, affine, rng), 19.0),
        (apply_disturbance(20.0, quad, rng), 21.0),
    ]
    worst = max(abs(got - want) for got, want in cases)
    return PropertyResult("disturbance-formulas", worst == 0.0, f"max deviation {worst:.2e}")


def check_dynamics_batch(n_cases=50, seed=3):
    """Stacked platoon step vs per-vehicle stepping."""
    from .dynamics import PlatoonState, step_platoon

    rng = SplitMix64(seed)
    worst = 0.0
    for _ in range(n_cases):
        I = 1 + rng.next_u64() % 4
        params = VehicleParams(dt=0.1, tau=0.5, alpha=1.0 + rng.uniform(), beta=rng.normal())
        model = build_platoon_model(params, I)
        X = PlatoonState(rng.normals(I) * 10, rng.normals(I) * 5, rng.normals(I))
        U = rng.normals(I) * 5
        batch = step_platoon(X, U, model)
        for i in range(I):
            single = step_vehicle(
                VehicleState(X.positions[i], X.velocities[i], X.accelerations[i]), U[i], params
            )
            worst = max(
                worst,
                abs(batch.positions[i] - single.p),
                abs(batch.velocities[i] - single.v),
                abs(batch.accelerations[i] - single.a),
            )
    return PropertyResult(
        "platoon-vs-vehicle-step", worst <= 1e-12, f"{n_cases} cases, max deviation {worst:.2e}"
    )


def run_all(qp_instances=300):
    return [
        check_dynamics_batch(),
        check_prediction_consistency(),
        check_qp_oracle(n_instances=qp_instances),
        check_gradients(),
        check_idm_equilibria(),
        check_disturbance_formulas(),
    ]
