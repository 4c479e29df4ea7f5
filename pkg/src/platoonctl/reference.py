"""Reference trajectories for the platoon: car-following generation and CSV ingestion.

Synthetic references come from the intelligent driver model: vehicle 1
follows a lead speed profile, each later vehicle follows its predecessor.
Recorded references load from CSV (one speed column per vehicle, positions
optional) and are resampled onto the controller time step.

Every emitted trajectory is kinematically consistent: stored accelerations
are forward differences of the speed series and positions integrate them
exactly, so p[k+1] = p[k] + v[k]*dt + a[k]*dt^2/2 holds to rounding.
"""

import csv
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import CollisionError, ParameterError, StructuralError, TrajectoryFormatError


@dataclass(frozen=True)
class IdmParams:
    v0: float = 33.3  # desired speed (m/s)
    T: float = 1.6  # safe time headway (s)
    a_max: float = 0.73  # maximum acceleration (m/s^2)
    b: float = 1.67  # desired deceleration (m/s^2)
    delta: float = 4.0  # acceleration exponent
    s0: float = 2.0  # jam distance (m)
    s1: float = 0.0  # speed-dependent jam distance (m)

    def __post_init__(self):
        if min(self.v0, self.T, self.a_max, self.b) <= 0 or self.s0 <= 0:
            raise ParameterError("IDM parameters must be positive")
        if self.s1 < 0 or self.delta < 1:
            raise ParameterError("require s1 >= 0 and delta >= 1")


@dataclass(frozen=True)
class LeadProfile:
    """Lead-vehicle speed series at dt resolution plus its initial position."""

    speeds: np.ndarray
    initial_position: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "speeds", np.asarray(self.speeds, dtype=float))
        if self.speeds.ndim != 1 or self.speeds.shape[0] < 1:
            raise StructuralError("lead profile needs at least one sample")
        if not np.all(np.isfinite(self.speeds)) or np.any(self.speeds < 0):
            raise ParameterError("lead speeds must be finite and nonnegative")


@dataclass(frozen=True)
class ReferenceTrajectory:
    """(I, K+1) per-vehicle arrays; vehicle 0 is the front of the platoon."""

    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    dt: float

    def __post_init__(self):
        for name in ("p", "v", "a"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        if not (self.p.shape == self.v.shape == self.a.shape):
            raise StructuralError("p/v/a arrays must share one shape")

    @property
    def n_vehicles(self):
        return self.p.shape[0]

    @property
    def n_samples(self):
        return self.p.shape[1]


def idm_accel(v, dv, s, params):
    """IDM acceleration from speed, approach rate dv = v - v_lead, and gap s."""
    if s <= 0:
        raise ParameterError("gap must be positive (collision state)")
    s_star = (
        params.s0
        + params.s1 * math.sqrt(max(v, 0.0) / params.v0)
        + params.T * v
        + v * dv / (2.0 * math.sqrt(params.a_max * params.b))
    )
    return params.a_max * (1.0 - (v / params.v0) ** params.delta - (s_star / s) ** 2)


def equilibrium_gap(v, params):
    """Gap at which idm_accel(v, 0, gap) = 0 for v below the desired speed."""
    if not 0 <= v < params.v0:
        raise ParameterError("equilibrium gap needs 0 <= v < v0")
    s_star = params.s0 + params.s1 * math.sqrt(v / params.v0) + params.T * v
    return s_star / math.sqrt(1.0 - (v / params.v0) ** params.delta)


def _consistent_kinematics(speeds, p0, dt):
    """Positions and accelerations that integrate the speed series exactly."""
    v = np.asarray(speeds, dtype=float)
    a = np.empty_like(v)
    a[:-1] = np.diff(v) / dt
    a[-1] = a[-2] if v.shape[0] > 1 else 0.0
    p = np.empty_like(v)
    p[0] = p0
    increments = v[:-1] * dt + 0.5 * a[:-1] * dt * dt
    p[1:] = p0 + np.cumsum(increments)
    return p, a


def generate_idm_reference(lead, n_vehicles, params, dt, initial_gaps=None):
    """Per-vehicle references behind a lead profile.

    Vehicle 1 follows the lead via the IDM, vehicle i follows vehicle i-1.
    Speeds are clamped at zero; stored accelerations are recomputed from the
    realized speeds so the emitted kinematics are exactly consistent.
    """
    if n_vehicles < 1:
        raise ParameterError("need at least one vehicle")
    if dt <= 0:
        raise ParameterError("dt must be positive")
    n = lead.speeds.shape[0]
    v_lead0 = float(lead.speeds[0])
    if initial_gaps is None:
        initial_gaps = np.full(n_vehicles, equilibrium_gap(v_lead0, params))
    initial_gaps = np.asarray(initial_gaps, dtype=float)
    if initial_gaps.shape != (n_vehicles,):
        raise StructuralError("initial_gaps length must match the platoon size")
    if np.any(initial_gaps <= params.s0):
        raise ParameterError("initial gaps must exceed the jam distance")

    front_p, _ = _consistent_kinematics(lead.speeds, lead.initial_position, dt)
    front_v = lead.speeds.copy()

    p = np.zeros((n_vehicles, n))
    v = np.zeros((n_vehicles, n))
    a = np.zeros((n_vehicles, n))
    for i in range(n_vehicles):
        vi = np.zeros(n)
        pi = np.zeros(n)
        vi[0] = v_lead0
        pi[0] = front_p[0] - initial_gaps[i]
        for k in range(n - 1):
            gap = front_p[k] - pi[k]
            if gap <= 0:
                raise CollisionError(k, f"vehicle {i + 1} reached zero gap during generation")
            acc = idm_accel(vi[k], vi[k] - front_v[k], gap, params)
            vi[k + 1] = max(0.0, vi[k] + acc * dt)
            a_eff = (vi[k + 1] - vi[k]) / dt
            pi[k + 1] = pi[k] + vi[k] * dt + 0.5 * a_eff * dt * dt
        p[i], a[i] = _consistent_kinematics(vi, pi[0], dt)
        v[i] = vi
        front_p, front_v = p[i], v[i]
    return ReferenceTrajectory(p=p, v=v, a=a, dt=dt)


def default_lead_profile(dt, duration_s, initial_position=0.0):
    """Synthetic 30 s shape: cruise 20, slow to 12, cruise, speed up to 25, cruise.

    Extends the final cruise speed when the requested duration is longer.
    """
    anchors_t = [0.0, 5.0, 10.0, 15.0, 25.0, 30.0]
    anchors_v = [20.0, 20.0, 12.0, 12.0, 25.0, 25.0]
    n = int(round(duration_s / dt)) + 1
    t = np.arange(n) * dt
    speeds = np.interp(t, anchors_t, anchors_v)
    return LeadProfile(speeds=speeds, initial_position=initial_position)


def constant_lead_profile(dt, duration_s, speed, initial_position=0.0):
    n = int(round(duration_s / dt)) + 1
    return LeadProfile(speeds=np.full(n, float(speed)), initial_position=initial_position)


_SPEED_COL = re.compile(r"^v(\d+)_speed_mps$")


def load_trajectory_csv(path, column_map=None, dt_target=0.1):
    """Load per-vehicle references from CSV and resample to dt_target.

    Default layout: required `time_s` plus `v<i>_speed_mps` columns numbered
    from 1; optional `v<i>_pos_m`. A column_map overrides the layout:
    {"time": name, "speed": [names...], "position": [names...] or None}.
    Positions absent from the file are reconstructed by integrating speed
    from zero. Accelerations are speed differences over dt.
    """
    if dt_target <= 0:
        raise ParameterError("dt_target must be positive")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TrajectoryFormatError("empty file") from None
        rows = list(reader)
    if not rows:
        raise TrajectoryFormatError("no data rows")
    index = {name.strip(): i for i, name in enumerate(header)}

    if column_map is None:
        numbered = sorted(
            (int(m.group(1)), name) for name, m in ((n, _SPEED_COL.match(n)) for n in index) if m
        )
        if not numbered or [i for i, _ in numbered] != list(range(1, len(numbered) + 1)):
            raise TrajectoryFormatError("expected v1_speed_mps, v2_speed_mps, ... columns")
        column_map = {
            "time": "time_s",
            "speed": [name for _, name in numbered],
            "position": [
                f"v{i}_pos_m" if f"v{i}_pos_m" in index else None for i, _ in numbered
            ],
        }
    for required in [column_map["time"], *column_map["speed"]]:
        if required not in index:
            raise TrajectoryFormatError(f"missing column {required!r}")
    pos_names = column_map.get("position") or [None] * len(column_map["speed"])

    def cell(row, row_no, name):
        try:
            value = float(row[index[name]])
        except (ValueError, IndexError):
            raise TrajectoryFormatError(f"unparseable value in column {name!r}", row=row_no) from None
        if not np.isfinite(value):
            raise TrajectoryFormatError(f"non-finite value in column {name!r}", row=row_no)
        return value

    times = []
    speeds = [[] for _ in column_map["speed"]]
    positions = [[] if name else None for name in pos_names]
    for row_no, row in enumerate(rows, start=2):  # header is row 1
        t = cell(row, row_no, column_map["time"])
        if times and t <= times[-1]:
            raise TrajectoryFormatError("time column is not strictly increasing", row=row_no)
        times.append(t)
        for j, name in enumerate(column_map["speed"]):
            speeds[j].append(cell(row, row_no, name))
        for j, name in enumerate(pos_names):
            if name:
                positions[j].append(cell(row, row_no, name))

    times = np.asarray(times)
    n_out = int(np.floor((times[-1] - times[0]) / dt_target + 1e-9)) + 1
    t_out = times[0] + np.arange(n_out) * dt_target
    if n_out < 2:
        raise TrajectoryFormatError("file spans less than one target time step")

    p_list, v_list, a_list = [], [], []
    for j in range(len(speeds)):
        v_res = np.interp(t_out, times, np.asarray(speeds[j]))
        if positions[j] is not None:
            p_res = np.interp(t_out, times, np.asarray(positions[j]))
            a_res = np.empty_like(v_res)
            a_res[:-1] = np.diff(v_res) / dt_target
            a_res[-1] = a_res[-2]
        else:
            p_res, a_res = _consistent_kinematics(v_res, 0.0, dt_target)
        p_list.append(p_res)
        v_list.append(v_res)
        a_list.append(a_res)
    return ReferenceTrajectory(p=np.array(p_list), v=np.array(v_list), a=np.array(a_list), dt=dt_target)


def export_trajectory_csv(traj, path):
    """Symmetric writer for load_trajectory_csv's default layout."""
    n_veh, n = traj.n_vehicles, traj.n_samples
    header = ["time_s"]
    for i in range(1, n_veh + 1):
        header += [f"v{i}_speed_mps", f"v{i}_pos_m"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(n):
            row = [repr(float(k * traj.dt))]
            for i in range(n_veh):
                row += [repr(float(traj.v[i, k])), repr(float(traj.p[i, k]))]
            writer.writerow(row)


def stack_reference_window(traj, k, horizon):
    """Stacked references for steps k+1..k+horizon, clamped at the final sample."""
    n = traj.n_samples
    blocks = []
    for step in range(k + 1, k + horizon + 1):
        idx = min(step, n - 1)
        blocks.append(np.concatenate([traj.p[:, idx], traj.v[:, idx], traj.a[:, idx]]))
    return np.concatenate(blocks)
