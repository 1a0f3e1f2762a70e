"""Optimal generalized Nash equilibrium selection in monotone games.

Double-layer Tikhonov-regularized preconditioned forward-backward solver with
HSDM-FBF and plain-FBF baselines, independent brute-force oracles and a
reproducible benchmark harness.
"""

from .game import (
    AgentSpec,
    GameInstance,
    JointPoint,
    LinearPseudogradient,
    OraclePseudogradient,
    OracleSelection,
    QuadraticSelection,
    SelectionSpec,
    ValidationError,
    ValidationReport,
    game_from_json,
    game_to_json,
    initial_point,
    load_game,
    pseudogradient,
    save_game,
    selection_grad,
    selection_value,
    validate_game,
)
from .operators import (
    ResolventError,
    SplitOperators,
    apply_B,
    apply_C,
    forward_operator_G,
    hsdm_operator,
    kkt_residual,
    pfb_step,
    project_Omega,
    tik_operator,
    verify_pfb_inclusion,
)
from .precond import (
    ConfigurationError,
    PhiOperator,
    PreconditionerConfig,
    build_phi,
    choose_stepsizes,
    compute_beta,
    compute_L_G,
    compute_radii,
    make_config,
)
from .tikhonov import (
    InnerLoopError,
    ScheduleParams,
    SolveResult,
    epsilon_schedule,
    gamma_schedule,
    inner_iteration_bound,
    inner_solve,
    solve,
)
from .baselines import BaselineResult, HsdmParams, bc_lipschitz, fbf_solve, hsdm_fbf_solve
from .qp_oracle import (
    OracleError,
    OracleProblem,
    check_potential_game_selection,
    check_zero_pseudogradient_selection,
    qp_solve,
)
from .bench import ExperimentConfig, generate_instance, instance_hash, run_comparison, run_sweep
from .traces import SolverTrace, read_aggregate_csv, read_trace_csv

__version__ = "0.1.0"
