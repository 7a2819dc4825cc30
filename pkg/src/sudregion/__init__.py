"""Single-user-detection rate regions of MISO interference channels."""

from .channel import (Beamformer, InterferenceBudget, MisoNetwork, beamformer_to_covariance,
                      builtin_network, interference_map, load_network, rate_vector,
                      single_user_rates, validate_network)
from .completion import CompletionInput, CompletionResult, complete_matrix, completion_bound
from .reduction import ReducedProblem, lift_solution, reduce_user_problem
from .region import ParetoSet, RegionGrid, pareto_filter, project_2d, trace_region, weighted_boundary
from .solver import (KktCertificate, QcqpProblem, SolveResult, UserSolution, certify_kkt,
                     extract_beamformer, solve_power_split, solve_reduced_sdp, solve_user)

__all__ = [
    "Beamformer", "InterferenceBudget", "MisoNetwork", "beamformer_to_covariance",
    "builtin_network", "interference_map", "load_network", "rate_vector",
    "single_user_rates", "validate_network",
    "CompletionInput", "CompletionResult", "complete_matrix", "completion_bound",
    "ReducedProblem", "lift_solution", "reduce_user_problem",
    "ParetoSet", "RegionGrid", "pareto_filter", "project_2d", "trace_region",
    "weighted_boundary",
    "KktCertificate", "QcqpProblem", "SolveResult", "UserSolution", "certify_kkt",
    "extract_beamformer", "solve_power_split", "solve_reduced_sdp", "solve_user",
]
