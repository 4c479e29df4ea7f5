"""Strict JSON config documents for scenario runs.

Every key is optional (defaults reproduce the shipped experiment) but
unknown keys are rejected, and violations name the dotted field path so the
CLI can point at the exact problem. Parsing and serialization round-trip:
parse(serialize(parse(doc))) == parse(doc).
"""

import json

from .actuation import DisturbanceModel
from .dynamics import VehicleParams
from .errors import ConfigError
from .harness import ReferenceSource, ScenarioConfig, VARIANTS
from .learner import MlpConfig
from .mpc import MpcConfig, MpcLimits, MpcWeights
from .reference import IdmParams

ACTUATION_PROFILES = {"simulation": (1.0, 0.0), "robot": (615.4, 25.0)}


def _check_keys(doc, allowed, path):
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}" if path else sorted(unknown)[0], "unknown key")


def _get(doc, key, default, path, types, check=None, message=None):
    value = doc.get(key, default)
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ConfigError(f"{path}.{key}", "wrong type")
    if not isinstance(value, types):
        raise ConfigError(f"{path}.{key}", "wrong type")
    if check is not None and not check(value):
        raise ConfigError(f"{path}.{key}", message or "invalid value")
    return value


def _number(doc, key, default, path, check=None, message=None):
    return float(_get(doc, key, default, path, (int, float), check, message))


def parse_config(doc):
    """Validated (ScenarioConfig, output file names) from a JSON document."""
    if not isinstance(doc, dict):
        raise ConfigError("", "config must be a JSON object")
    _check_keys(doc, {"scenario", "output"}, "")
    sc = doc.get("scenario", {})
    if not isinstance(sc, dict):
        raise ConfigError("scenario", "must be an object")
    _check_keys(
        sc,
        {
            "platoon_size",
            "dt",
            "duration_s",
            "controller_variant",
            "master_seed",
            "online_update_period",
            "initial_state_offsets",
            "vehicle",
            "mpc",
            "disturbance",
            "mlp",
            "reference",
        },
        "scenario",
    )
    platoon_size = _get(sc, "platoon_size", 5, "scenario", int, lambda v: v >= 1, "must be >= 1")
    dt = _number(sc, "dt", 0.1, "scenario", lambda v: v > 0, "must be positive")
    duration_s = _number(sc, "duration_s", 30.0, "scenario", lambda v: v > 0, "must be positive")
    variant = _get(
        sc, "controller_variant", "perl", "scenario", str, lambda v: v in VARIANTS, f"must be one of {VARIANTS}"
    )
    master_seed = _get(sc, "master_seed", 1, "scenario", int, lambda v: v >= 0, "must be >= 0")
    period = _get(sc, "online_update_period", 20, "scenario", int, lambda v: v >= 1, "must be >= 1")
    offsets = _get(sc, "initial_state_offsets", [], "scenario", list)
    for i, off in enumerate(offsets):
        if isinstance(off, bool) or not isinstance(off, (int, float)):
            raise ConfigError(f"scenario.initial_state_offsets[{i}]", "wrong type")
    if offsets and len(offsets) != platoon_size:
        raise ConfigError("scenario.initial_state_offsets", "length must match platoon_size")

    veh = _get(sc, "vehicle", {}, "scenario", dict)
    _check_keys(veh, {"tau", "actuation_profile", "alpha", "beta"}, "scenario.vehicle")
    tau = _number(veh, "tau", 0.5, "scenario.vehicle", lambda v: v > 0, "must be positive")
    profile = _get(
        veh,
        "actuation_profile",
        "simulation",
        "scenario.vehicle",
        str,
        lambda v: v in ACTUATION_PROFILES,
        f"must be one of {sorted(ACTUATION_PROFILES)}",
    )
    alpha_default, beta_default = ACTUATION_PROFILES[profile]
    alpha = _number(veh, "alpha", alpha_default, "scenario.vehicle", lambda v: v != 0, "must be nonzero")
    beta = _number(veh, "beta", beta_default, "scenario.vehicle")

    mpc_doc = _get(sc, "mpc", {}, "scenario", dict)
    _check_keys(mpc_doc, {"horizon", "weights", "limits"}, "scenario.mpc")
    horizon = _get(mpc_doc, "horizon", 10, "scenario.mpc", int, lambda v: v >= 1, "must be >= 1")
    w = _get(mpc_doc, "weights", {}, "scenario.mpc", dict)
    _check_keys(w, {"q1", "q2", "q3", "q4"}, "scenario.mpc.weights")
    weights = MpcWeights(
        q1=_number(w, "q1", 1.0, "scenario.mpc.weights", lambda v: v >= 0, "must be >= 0"),
        q2=_number(w, "q2", 1.0, "scenario.mpc.weights", lambda v: v >= 0, "must be >= 0"),
        q3=_number(w, "q3", 0.1, "scenario.mpc.weights", lambda v: v >= 0, "must be >= 0"),
        q4=_number(w, "q4", 0.1, "scenario.mpc.weights", lambda v: v > 0, "must be positive"),
    )
    lim = _get(mpc_doc, "limits", {}, "scenario.mpc", dict)
    _check_keys(lim, {"d_min", "d_max", "v_min", "v_max", "a_min", "a_max"}, "scenario.mpc.limits")
    limits = MpcLimits(
        d_min=_number(lim, "d_min", 5.0, "scenario.mpc.limits"),
        d_max=_number(lim, "d_max", 80.0, "scenario.mpc.limits"),
        v_min=_number(lim, "v_min", 5.0, "scenario.mpc.limits"),
        v_max=_number(lim, "v_max", 50.0, "scenario.mpc.limits"),
        a_min=_number(lim, "a_min", -5.0, "scenario.mpc.limits"),
        a_max=_number(lim, "a_max", 5.0, "scenario.mpc.limits"),
    )

    dist = _get(sc, "disturbance", {}, "scenario", dict)
    _check_keys(dist, {"kind", "noise_sigma"}, "scenario.disturbance")
    disturbance = DisturbanceModel(
        kind=_get(
            dist,
            "kind",
            "affine",
            "scenario.disturbance",
            str,
            lambda v: v in ("none", "affine", "quadratic"),
            "must be none, affine, or quadratic",
        ),
        noise_sigma=_number(
            dist, "noise_sigma", 1.0, "scenario.disturbance", lambda v: v >= 0, "must be >= 0"
        ),
        seed=master_seed,
    )

    mlp_doc = _get(sc, "mlp", {}, "scenario", dict)
    _check_keys(
        mlp_doc,
        {"hidden_units", "learning_rate", "epochs", "validation_split", "buffer_capacity"},
        "scenario.mlp",
    )
    mlp = MlpConfig(
        hidden_units=_get(mlp_doc, "hidden_units", 64, "scenario.mlp", int, lambda v: v >= 1, "must be >= 1"),
        learning_rate=_number(
            mlp_doc, "learning_rate", 0.001, "scenario.mlp", lambda v: v > 0, "must be positive"
        ),
        epochs=_get(mlp_doc, "epochs", 100, "scenario.mlp", int, lambda v: v >= 1, "must be >= 1"),
        validation_split=_number(
            mlp_doc, "validation_split", 0.2, "scenario.mlp", lambda v: 0 <= v < 1, "must be in [0, 1)"
        ),
    )
    buffer_capacity = _get(
        mlp_doc, "buffer_capacity", 200, "scenario.mlp", int, lambda v: v >= 1, "must be >= 1"
    )

    ref = _get(sc, "reference", {}, "scenario", dict)
    _check_keys(ref, {"source", "csv_path", "lead", "initial_gaps"}, "scenario.reference")
    source = _get(
        ref, "source", "idm", "scenario.reference", str, lambda v: v in ("idm", "csv"), "must be idm or csv"
    )
    csv_path = ref.get("csv_path")
    if csv_path is not None and not isinstance(csv_path, str):
        raise ConfigError("scenario.reference.csv_path", "wrong type")
    if source == "csv" and not csv_path:
        raise ConfigError("scenario.reference.csv_path", "required for csv source")
    lead = _get(ref, "lead", {}, "scenario.reference", dict)
    _check_keys(lead, {"kind", "speed_mps"}, "scenario.reference.lead")
    lead_kind = _get(
        lead,
        "kind",
        "default",
        "scenario.reference.lead",
        str,
        lambda v: v in ("default", "constant"),
        "must be default or constant",
    )
    lead_speed = None
    if lead_kind == "constant":
        if "speed_mps" not in lead:
            raise ConfigError("scenario.reference.lead.speed_mps", "required for constant lead")
        lead_speed = _number(
            lead, "speed_mps", 0.0, "scenario.reference.lead", lambda v: v >= 0, "must be >= 0"
        )
    gaps = ref.get("initial_gaps")
    if gaps is not None:
        if not isinstance(gaps, list) or not all(
            isinstance(g, (int, float)) and not isinstance(g, bool) for g in gaps
        ):
            raise ConfigError("scenario.reference.initial_gaps", "must be a list of numbers")
        gaps = tuple(float(g) for g in gaps)

    out = doc.get("output", {})
    if not isinstance(out, dict):
        raise ConfigError("output", "must be an object")
    _check_keys(out, {"steps_csv", "metrics_json"}, "output")
    output = {
        "steps_csv": _get(out, "steps_csv", "steps.csv", "output", str),
        "metrics_json": _get(out, "metrics_json", "metrics.json", "output", str),
    }

    try:
        scenario = ScenarioConfig(
            platoon_size=platoon_size,
            dt=dt,
            duration_s=duration_s,
            controller_variant=variant,
            master_seed=master_seed,
            online_update_period=period,
            initial_state_offsets=tuple(float(v) for v in offsets),
            vehicle=VehicleParams(dt=dt, tau=tau, alpha=alpha, beta=beta),
            mpc=MpcConfig(horizon=horizon, weights=weights, limits=limits),
            disturbance=disturbance,
            mlp=mlp,
            buffer_capacity=buffer_capacity,
            reference=ReferenceSource(
                kind=source,
                csv_path=csv_path,
                lead_kind=lead_kind,
                lead_speed=lead_speed,
                initial_gaps=gaps,
                idm=IdmParams(),
            ),
        )
    except ValueError as exc:
        raise ConfigError("scenario", str(exc)) from exc
    return scenario, output


def serialize_config(scenario, output=None):
    """Canonical JSON document for a ScenarioConfig."""
    doc = {
        "scenario": {
            "platoon_size": scenario.platoon_size,
            "dt": scenario.dt,
            "duration_s": scenario.duration_s,
            "controller_variant": scenario.controller_variant,
            "master_seed": scenario.master_seed,
            "online_update_period": scenario.online_update_period,
            "initial_state_offsets": list(scenario.initial_state_offsets),
            "vehicle": {
                "tau": scenario.vehicle.tau,
                "alpha": scenario.vehicle.alpha,
                "beta": scenario.vehicle.beta,
            },
            "mpc": {
                "horizon": scenario.mpc.horizon,
                "weights": {
                    "q1": scenario.mpc.weights.q1,
                    "q2": scenario.mpc.weights.q2,
                    "q3": scenario.mpc.weights.q3,
                    "q4": scenario.mpc.weights.q4,
                },
                "limits": {
                    "d_min": scenario.mpc.limits.d_min,
                    "d_max": scenario.mpc.limits.d_max,
                    "v_min": scenario.mpc.limits.v_min,
                    "v_max": scenario.mpc.limits.v_max,
                    "a_min": scenario.mpc.limits.a_min,
                    "a_max": scenario.mpc.limits.a_max,
                },
            },
            "disturbance": {
                "kind": scenario.disturbance.kind,
                "noise_sigma": scenario.disturbance.noise_sigma,
            },
            "mlp": {
                "hidden_units": scenario.mlp.hidden_units,
                "learning_rate": scenario.mlp.learning_rate,
                "epochs": scenario.mlp.epochs,
                "validation_split": scenario.mlp.validation_split,
                "buffer_capacity": scenario.buffer_capacity,
            },
            "reference": {
                "source": scenario.reference.kind,
                "csv_path": scenario.reference.csv_path,
                "lead": {"kind": scenario.reference.lead_kind},
                "initial_gaps": list(scenario.reference.initial_gaps)
                if scenario.reference.initial_gaps
                else None,
            },
        },
        "output": dict(output) if output else {"steps_csv": "steps.csv", "metrics_json": "metrics.json"},
    }
    if scenario.reference.lead_kind == "constant":
        doc["scenario"]["reference"]["lead"]["speed_mps"] = scenario.reference.lead_speed
    return doc


def load_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("", f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    return parse_config(doc)
