"""Task planning for co-safe temporal logic specifications in partially revealed grids."""

from .scltl import (
    Dfa, accepts, compile_dfa, dist_to_accept, eval_scltl, guard, parse_spec, progress, simplify,
    transition_encoding,
)
from .world import BeliefMap, Frontier, GridMap, extract_frontiers, lts_view, reveal
from .scenarios import gen_delivery, gen_firefighting
from .product import ProductState, initial_product_state, known_space_completion, pa_dijkstra, z_reach
from .actions import HighLevelAction, enumerate_actions, z_next
from .estimate import EstimateTriple, FeatureModel, heuristic_estimate, oracle_estimate, train_feature_model
from .planner import PlannerConfig, PlanningProblem, exact_expectimax, pouct_search
from .baseline import baseline_select
from .sim import TrialConfig, TrialResult, run_bench, run_trial

__version__ = "0.1.0"
