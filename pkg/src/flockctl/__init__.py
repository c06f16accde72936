"""Leader-follower flocking control: kinematics, connectivity graph,
RLS-based policy/value-iteration tracking, velocity consensus, and
Takagi-Sugeno separation, plus a deterministic simulation engine."""

__version__ = "0.1.0"

from .agents import (
    AgentState,
    ControlSignal,
    LeaderCommand,
    LeaderState,
    Limits,
    step_agent,
    step_leader,
    update_error_window,
)
from .consensus import consensus_control
from .critic import (
    DegenerateCriticError,
    RlsState,
    UtilityParams,
    feature_map,
    greedy_policy,
    psi_to_theta,
    rls_update,
    theta_to_psi,
    utility,
)
from .engine import SimResult, run
from .graph import (
    ConnectivityParams,
    GraphWeights,
    alpha_norm,
    build_full_graph,
    build_graph,
    edge_weight,
    pump,
)
from .scenario import Scenario, ScenarioError, load_scenario, save_scenario
from .separation import (
    FuzzyRuleBase,
    adapt_consequences,
    aggregate_separation,
    default_rule_base,
    ts_infer,
)
from .tracking import (
    Algorithm1Result,
    PiConfig,
    PiTracker,
    ViTracker,
    default_theta0,
    pi_step,
    run_algorithm1,
    vi_step,
)
