"""Constant-gap rate-splitting regions for K-user MIMO broadcast channels."""

from ._kernels import BACKEND
from .channel import (
    Channel,
    OneRingParams,
    load_channel,
    one_ring,
    pathological_three_user,
    rayleigh,
    save_channel,
    triangular_two_user,
    two_group_defaults,
)
from .lp import LinearProgram, LpResult, feasible, maximize
from .regions import (
    Collection,
    RateConstraint,
    capacity_term,
    collection_covariance,
    duality_gap_bound,
    enumerate_minimal_collections,
    exact_constraints,
    mac_weighted_max,
    maximal_of,
    mmse_covariance,
    reduce_to_minimal,
    rs_constraints,
)
from .streams import (
    StreamOrdering,
    WMatrixResult,
    eliminate,
    min_threshold,
    order_streams,
    sum_rate_with_streams,
    w_matrix,
)
from .sumrate import (
    SumRateReport,
    dpc_sum_capacity,
    gdof_slope,
    k_user_upper_bound,
    precoder_ratio_bounds_hold,
    lp_only_sum_rate_bound,
    rs_sum_rate,
    rs_sum_rate_best_subset,
    rs_weighted_max,
    three_user_closed_form,
    three_user_min_term,
    three_user_split_solution,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Channel",
    "Collection",
    "LinearProgram",
    "LpResult",
    "OneRingParams",
    "RateConstraint",
    "StreamOrdering",
    "SumRateReport",
    "WMatrixResult",
    "capacity_term",
    "collection_covariance",
    "dpc_sum_capacity",
    "duality_gap_bound",
    "eliminate",
    "enumerate_minimal_collections",
    "exact_constraints",
    "feasible",
    "gdof_slope",
    "k_user_upper_bound",
    "precoder_ratio_bounds_hold",
    "load_channel",
    "lp_only_sum_rate_bound",
    "mac_weighted_max",
    "maximal_of",
    "maximize",
    "min_threshold",
    "mmse_covariance",
    "one_ring",
    "order_streams",
    "pathological_three_user",
    "rayleigh",
    "reduce_to_minimal",
    "rs_constraints",
    "rs_sum_rate",
    "rs_sum_rate_best_subset",
    "rs_weighted_max",
    "save_channel",
    "sum_rate_with_streams",
    "three_user_closed_form",
    "three_user_min_term",
    "three_user_split_solution",
    "triangular_two_user",
    "two_group_defaults",
    "w_matrix",
]
