"""Sparse-graph SDP slot assignment for uplink wireless time-sensitive networks."""

__version__ = "0.1.0"

from .assign import (SearchResult, SimplexBasis, SlotAssignment, binary_search, check_constraints,
                     round_gram, simplex_basis)
from .baselines import HeuristicKind, RandSolver, greedy_assign, rand_gram
from .canonical import CanonicalSdp, GramSolution, format_canonical, violations
from .errors import InvalidArgument, NumericalFailure, SigSdpError
from .graph import NetworkState, SlotBounds, build_state, slot_bounds
from .mmw import GapReport, MmwConfig, MmwSolver, duality_gap, sketch_expm, solve
from .scenario import (PhyConfig, PowerProfile, Scenario, decoding_error_rate, generate_scenario,
                       power_profile, solve_sinr_threshold)
from .simulator import (ErrorReport, MobilityModel, OnlineConfig, evaluate, run_online,
                        step_mobility)

__all__ = [
    "CanonicalSdp", "ErrorReport", "GapReport", "GramSolution", "HeuristicKind", "InvalidArgument",
    "MmwConfig", "MmwSolver", "MobilityModel", "NetworkState", "NumericalFailure", "OnlineConfig",
    "PhyConfig", "PowerProfile", "RandSolver", "Scenario", "SearchResult", "SigSdpError",
    "SimplexBasis", "SlotAssignment", "SlotBounds", "binary_search", "build_state",
    "check_constraints", "decoding_error_rate", "duality_gap", "evaluate", "format_canonical",
    "generate_scenario", "greedy_assign", "power_profile", "rand_gram", "round_gram", "run_online",
    "simplex_basis", "sketch_expm", "slot_bounds", "solve", "solve_sinr_threshold", "step_mobility",
    "violations",
]
