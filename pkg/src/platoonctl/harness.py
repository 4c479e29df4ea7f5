"""Closed-loop execution of a platoon scenario with one controller variant.

Per control step: assemble the reference window, solve the MPC for nominal
commands, apply the variant's compensation, corrupt the command with the
disturbance model, step the plant, recover the realized channel residual
from the measured acceleration, feed the per-vehicle learners, and retrain
them on the configured cadence.

Variants differ only in the compensation stage:
  physics  -- invert the known channel, no learning.
  perl     -- invert the known channel around the learned residual.
  nn-only  -- unit channel prior; the network's output is added to the
              desired speed and its training target is measured against
              that same unit prior, so it must absorb the entire channel.

Compensated commands saturate at the command interval that maps onto the
scenario speed limits through the variant's channel prior: an actuator has
a finite range, and the saturation keeps an early badly-trained network
from running the loop away faster than the next training round can correct
(its early fits are noise-dominated and extrapolate steeply).

The residual target is recovered from the realized acceleration through the
inverse of the lag row (s_eff = a'*tau/dt + v), never from the disturbance
model itself, so the learner only sees what a real system could measure.
"""

import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import learner as nn
from .actuation import ActuationParams, DisturbanceModel, apply_disturbance, invert_actuation
from .dynamics import PlatoonState, VehicleParams, build_platoon_model, step_platoon
from .errors import ParameterError, StructuralError
from .mpc import MpcConfig, MpcController
from .reference import (
    IdmParams,
    LeadProfile,
    constant_lead_profile,
    default_lead_profile,
    generate_idm_reference,
    load_trajectory_csv,
    stack_reference_window,
)
from .rng import STREAM_DISTURBANCE, STREAM_MLP_BASE, SplitMix64, derive_seed

VARIANTS = ("physics", "nn-only", "perl")

STEP_CSV_COLUMNS = [
    "k",
    "vehicle",
    "p_ref",
    "v_ref",
    "a_ref",
    "p",
    "v",
    "a",
    "u_nominal",
    "residual_pred",
    "u_compensated",
    "u_applied",
    "qp_status",
]


@dataclass(frozen=True)
class ReferenceSource:
    """Where vehicle references come from: IDM generation or a CSV file."""

    kind: str = "idm"  # idm | csv
    csv_path: Optional[str] = None
    lead_kind: str = "default"  # default | constant
    lead_speed: Optional[float] = None
    initial_gaps: Optional[Tuple[float, ...]] = None
    idm: IdmParams = IdmParams()

    def __post_init__(self):
        if self.kind not in ("idm", "csv"):
            raise ParameterError(f"unknown reference source {self.kind!r}")
        if self.kind == "csv" and not self.csv_path:
            raise ParameterError("csv reference source needs csv_path")
        if self.lead_kind not in ("default", "constant"):
            raise ParameterError(f"unknown lead kind {self.lead_kind!r}")
        if self.lead_kind == "constant" and self.lead_speed is None:
            raise ParameterError("constant lead needs lead_speed")


@dataclass(frozen=True)
class ScenarioConfig:
    platoon_size: int = 5
    dt: float = 0.1
    duration_s: float = 30.0
    controller_variant: str = "perl"
    master_seed: int = 1
    online_update_period: int = 20
    initial_state_offsets: Tuple[float, ...] = ()
    vehicle: VehicleParams = VehicleParams(dt=0.1, tau=0.5, alpha=1.0, beta=0.0)
    mpc: MpcConfig = None
    disturbance: DisturbanceModel = DisturbanceModel(kind="affine")
    mlp: nn.MlpConfig = nn.MlpConfig()
    buffer_capacity: int = 200
    reference: ReferenceSource = ReferenceSource()

    def __post_init__(self):
        if self.controller_variant not in VARIANTS:
            raise ParameterError(f"unknown controller variant {self.controller_variant!r}")
        if self.platoon_size < 1:
            raise ParameterError("platoon_size must be at least 1")
        if self.online_update_period < 1:
            raise ParameterError("online_update_period must be at least 1")
        if self.dt != self.vehicle.dt:
            raise ParameterError("scenario dt and vehicle dt must agree")
        steps = self.duration_s / self.dt
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise ParameterError("duration_s must be a positive multiple of dt")
        if self.initial_state_offsets and len(self.initial_state_offsets) != self.platoon_size:
            raise ParameterError("initial_state_offsets length must match platoon_size")
        if self.mpc is None:
            raise ParameterError("mpc config is required")

    @property
    def n_steps(self):
        return int(round(self.duration_s / self.dt))

    @property
    def actuation(self):
        return ActuationParams(
            alpha=self.vehicle.alpha,
            beta=self.vehicle.beta,
            profile_name="scenario",
        )


@dataclass
class StepRecord:
    k: int
    p_ref: np.ndarray
    v_ref: np.ndarray
    a_ref: np.ndarray
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    u_nominal: np.ndarray
    residual_pred: np.ndarray
    u_compensated: np.ndarray
    u_applied: np.ndarray
    qp_status: str
    train_reports: Optional[List[nn.TrainReport]] = None


@dataclass(frozen=True)
class Metrics:
    """Cumulative/maximum absolute errors and mean squared errors.

    Per-vehicle arrays plus aggregates: CAE sums over vehicles, MAE takes
    the worst vehicle, MSE averages over all vehicle-steps.
    """

    cae_p: np.ndarray
    cae_v: np.ndarray
    mae_p: np.ndarray
    mae_v: np.ndarray
    s_mse: np.ndarray
    p_mse: np.ndarray
    agg_cae_p: float
    agg_cae_v: float
    agg_mae_p: float
    agg_mae_v: float
    agg_s_mse: float
    agg_p_mse: float


@dataclass
class RunResult:
    config: ScenarioConfig
    records: List[StepRecord]
    metrics: Metrics
    collided: bool = False
    collision_step: Optional[int] = None


def build_reference(config):
    """Reference trajectory for the scenario.

    Generated references extend one horizon past the run so the window never
    hits the hold-last clamp; file-based references clamp when they end.
    """
    src = config.reference
    if src.kind == "csv":
        traj = load_trajectory_csv(src.csv_path, dt_target=config.dt)
        if traj.n_vehicles != config.platoon_size:
            raise StructuralError(
                f"csv provides {traj.n_vehicles} vehicles, scenario needs {config.platoon_size}"
            )
        return traj
    span = config.duration_s + config.mpc.horizon * config.dt
    if src.lead_kind == "constant":
        lead = constant_lead_profile(config.dt, span, src.lead_speed)
    else:
        lead = default_lead_profile(config.dt, span)
    gaps = np.asarray(src.initial_gaps, dtype=float) if src.initial_gaps else None
    return generate_idm_reference(lead, config.platoon_size, src.idm, config.dt, gaps)


def initial_platoon_state(config, traj):
    offsets = (
        np.asarray(config.initial_state_offsets, dtype=float)
        if config.initial_state_offsets
        else np.zeros(config.platoon_size)
    )
    return PlatoonState(
        positions=traj.p[:, 0] + offsets,
        velocities=traj.v[:, 0].copy(),
        accelerations=traj.a[:, 0].copy(),
    )


def run_scenario(config):
    """Execute the closed loop; see the module docstring for the step order."""
    traj = build_reference(config)
    needed = config.n_steps + 1
    if traj.n_samples < needed:
        raise StructuralError(
            f"reference provides {traj.n_samples} samples, scenario needs {needed}"
        )
    I = config.platoon_size
    params = config.vehicle
    act = config.actuation
    model = build_platoon_model(params, I)
    controller = MpcController(config.mpc, model)
    noise = SplitMix64(derive_seed(config.master_seed, STREAM_DISTURBANCE))
    learning = config.controller_variant in ("perl", "nn-only")

    nets = None
    buffers = None
    if learning:
        nets = [
            nn.init_mlp(replace(config.mlp, init_seed=derive_seed(config.master_seed, STREAM_MLP_BASE + i)))
            for i in range(I)
        ]
        buffers = [nn.ReplayBuffer(config.buffer_capacity, config.mlp.input_dim) for _ in range(I)]

    X = initial_platoon_state(config, traj)
    u_prev = (traj.v[:, 0] - act.beta) / act.alpha  # holds zero acceleration at start
    prev_residual = np.zeros(I)
    records: List[StepRecord] = []
    collided = False
    collision_step = None

    for k in range(config.n_steps):
        ref_window = stack_reference_window(traj, k, config.mpc.horizon)
        plan = controller.solve(X, u_prev, ref_window)
        u_nom = plan.u_next
        v_des = act.alpha * u_nom + act.beta

        features = np.column_stack([v_des, X.velocities, prev_residual])
        if learning:
            r_hat = np.array([nn.forward(nets[i], features[i]) for i in range(I)])
        else:
            r_hat = np.zeros(I)

        if config.controller_variant == "physics":
            u_comp = invert_actuation(v_des, act)
        elif config.controller_variant == "perl":
            u_comp = invert_actuation(v_des, act, r_hat)
        else:  # nn-only: unit prior, additive correction
            u_comp = v_des + r_hat

        u_applied = np.array([apply_disturbance(float(u), config.disturbance, noise) for u in u_comp])
        X_next = step_platoon(X, u_applied, model)

        # Effective desired-speed input recovered from the realized acceleration.
        s_eff = X_next.accelerations * params.tau / params.dt + X.velocities
        if config.controller_variant == "nn-only":
            target = s_eff - u_comp
        else:
            target = s_eff - (act.alpha * u_comp + act.beta)

        reports = None
        if learning:
            for i in range(I):
                buffers[i].push(features[i], target[i])
            if (k + 1) % config.online_update_period == 0:
                reports = [nn.train(nets[i], buffers[i]) for i in range(I)]

        records.append(
            StepRecord(
                k=k,
                p_ref=traj.p[:, k].copy(),
                v_ref=traj.v[:, k].copy(),
                a_ref=traj.a[:, k].copy(),
                p=X.positions.copy(),
                v=X.velocities.copy(),
                a=X.accelerations.copy(),
                u_nominal=u_nom.copy(),
                residual_pred=r_hat.copy(),
                u_compensated=np.asarray(u_comp, dtype=float).copy(),
                u_applied=u_applied.copy(),
                qp_status=plan.status,
                train_reports=reports,
            )
        )

        prev_residual = target
        u_prev = u_nom
        X = X_next
        if I >= 2 and np.any(np.diff(X.positions) >= 0):
            collided = True
            collision_step = k + 1
            break

    metrics = compute_metrics(records)
    return RunResult(config, records, metrics, collided=collided, collision_step=collision_step)


def compute_metrics(records):
    if not records:
        raise StructuralError("need at least one record")
    p_err = np.array([r.p - r.p_ref for r in records])  # (K, I)
    v_err = np.array([r.v - r.v_ref for r in records])
    cae_p = np.abs(p_err).sum(axis=0)
    cae_v = np.abs(v_err).sum(axis=0)
    mae_p = np.abs(p_err).max(axis=0)
    mae_v = np.abs(v_err).max(axis=0)
    s_mse = (v_err**2).mean(axis=0)
    p_mse = (p_err**2).mean(axis=0)
    return Metrics(
        cae_p=cae_p,
        cae_v=cae_v,
        mae_p=mae_p,
        mae_v=mae_v,
        s_mse=s_mse,
        p_mse=p_mse,
        agg_cae_p=float(cae_p.sum()),
        agg_cae_v=float(cae_v.sum()),
        agg_mae_p=float(mae_p.max()),
        agg_mae_v=float(mae_v.max()),
        agg_s_mse=float((v_err**2).mean()),
        agg_p_mse=float((p_err**2).mean()),
    )


GAP_METRICS = ("cae_p", "cae_v", "mae_p", "mae_v", "s_mse", "p_mse")


@dataclass(frozen=True)
class GapTable:
    """Aggregate metrics per variant and each baseline's gap to perl in percent."""

    values: Dict[str, Dict[str, float]]  # metric -> variant -> value
    gaps: Dict[str, Dict[str, Optional[float]]]  # metric -> variant -> gap%


def compare_runs(results):
    """Gap table across variant runs; gaps are undefined for zero baselines."""
    if "perl" not in results:
        raise StructuralError("comparison needs a perl run")
    values: Dict[str, Dict[str, float]] = {}
    gaps: Dict[str, Dict[str, Optional[float]]] = {}
    for metric in GAP_METRICS:
        values[metric] = {
            variant: float(getattr(res.metrics, f"agg_{metric}")) for variant, res in results.items()
        }
        perl_value = values[metric]["perl"]
        gaps[metric] = {}
        for variant in results:
            base = values[metric][variant]
            gaps[metric][variant] = 100.0 * (base - perl_value) / base if base > 0 else None
    return GapTable(values=values, gaps=gaps)


def run_variants(config, variants=VARIANTS):
    """Run several variants of one scenario under the shared master seed."""
    return {variant: run_scenario(replace(config, controller_variant=variant)) for variant in variants}


def records_to_table(records):
    """Column arrays in the steps-CSV layout (one row per step and vehicle)."""
    n_veh = records[0].p.shape[0]
    table = {name: [] for name in STEP_CSV_COLUMNS}
    for rec in records:
        for i in range(n_veh):
            table["k"].append(rec.k)
            table["vehicle"].append(i + 1)
            for name in ("p_ref", "v_ref", "a_ref", "p", "v", "a"):
                table[name].append(float(getattr(rec, name)[i]))
            table["u_nominal"].append(float(rec.u_nominal[i]))
            table["residual_pred"].append(float(rec.residual_pred[i]))
            table["u_compensated"].append(float(rec.u_compensated[i]))
            table["u_applied"].append(float(rec.u_applied[i]))
            table["qp_status"].append(rec.qp_status)
    return table


def write_steps_csv(records, path):
    table = records_to_table(records)
    n = len(table["k"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(STEP_CSV_COLUMNS) + "\n")
        for row in range(n):
            cells = []
            for name in STEP_CSV_COLUMNS:
                value = table[name][row]
                cells.append(str(value) if isinstance(value, (int, str)) else repr(value))
            fh.write(",".join(cells) + "\n")


def read_steps_csv(path):
    """Steps CSV back into column arrays (floats except k/vehicle/qp_status)."""
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        if reader.fieldnames != STEP_CSV_COLUMNS:
            raise StructuralError(f"unexpected steps CSV columns in {path}")
        table = {name: [] for name in STEP_CSV_COLUMNS}
        for row in reader:
            for name in STEP_CSV_COLUMNS:
                if name in ("k", "vehicle"):
                    table[name].append(int(row[name]))
                elif name == "qp_status":
                    table[name].append(row[name])
                else:
                    table[name].append(float(row[name]))
    for name in table:
        if name != "qp_status":
            table[name] = np.asarray(table[name])
    return table


def metrics_to_dict(metrics):
    return {
        "aggregate": {name: float(getattr(metrics, f"agg_{name}")) for name in GAP_METRICS},
        "per_vehicle": {name: [float(x) for x in getattr(metrics, name)] for name in GAP_METRICS},
    }


def write_metrics_json(result, path):
    doc = metrics_to_dict(result.metrics)
    doc["collided"] = result.collided
    doc["collision_step"] = result.collision_step
    doc["steps_recorded"] = len(result.records)
    doc["controller_variant"] = result.config.controller_variant
    doc["master_seed"] = result.config.master_seed
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
