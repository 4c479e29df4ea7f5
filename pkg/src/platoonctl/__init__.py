"""Closed-loop vehicle platoon control: condensed MPC over linear platoon
dynamics, an actuation channel with disturbance injection, and online
residual learning that corrects the channel inside the loop."""

from .actuation import (
    ActuationParams,
    DisturbanceModel,
    ROBOT_PROFILE,
    SIMULATION_PROFILE,
    apply_disturbance,
    forward_actuation,
    invert_actuation,
)
from .dynamics import (
    PlatoonModel,
    PlatoonState,
    VehicleParams,
    VehicleState,
    build_platoon_model,
    build_single_matrices,
    platoon_error,
    step_platoon,
    step_vehicle,
)
from .harness import (
    Metrics,
    ReferenceSource,
    RunResult,
    ScenarioConfig,
    StepRecord,
    compare_runs,
    compute_metrics,
    run_scenario,
    run_variants,
)
from .learner import Mlp, MlpConfig, ReplayBuffer, TrainReport, forward, gradient_check, init_mlp, train
from .mpc import (
    ControlPlan,
    MpcConfig,
    MpcController,
    MpcLimits,
    MpcWeights,
    PredictionMatrices,
    build_constraints,
    build_cost,
    build_prediction,
    solve_mpc,
)
from .qp import KktResiduals, QpProblem, QpSolution, check_kkt, solve
from .reference import (
    IdmParams,
    LeadProfile,
    ReferenceTrajectory,
    default_lead_profile,
    equilibrium_gap,
    export_trajectory_csv,
    generate_idm_reference,
    idm_accel,
    load_trajectory_csv,
)

__version__ = "0.1.0"
