"""Cost-sharing mechanisms over combinatorial cost functions.

Library layout mirrors the problem families: ``facloc`` (facility location),
``steiner`` (rooted Steiner tree), ``ssrob`` (single-sink rent-or-buy),
``setcover``; the ``moulin`` engine screens bids against any cross-monotonic
cost-share method, ``dmvfl`` runs the ghost-growing facility mechanism, and
``analysis`` hosts summability measurement, the layered lower-bound network,
and incentive verifiers.
"""

from .core import (
    Caps,
    CapacityError,
    CostOracle,
    CostShareMethod,
    EPS,
    InfeasibleError,
    InvalidInputError,
    MechanismOutcome,
    MethodContractError,
    budget_balance_ratio,
    caps_from_env,
    check_core,
    check_cross_monotonic,
    harmonic,
    optimal_social_cost,
    social_cost,
    social_welfare,
)
from .facloc import FacilityLocationInstance, fl_optimal_cost, fl_oracle, pt_method
from .moulin import MoulinConfig, removal_order_invariance, run_moulin
from .setcover import SetCoverInstance, run_dmv_setcover, sc_optimal_cost, sc_oracle
from .ssrob import SSRoBInstance, gst_method, gst_shares_exact, gst_shares_mc, ssrob_oracle
from .steiner import SteinerInstance, jv_cost_shares, jv_method, steiner_optimal_cost, steiner_oracle
from .dmvfl import dmv_fl_single_facility_crosscheck, run_dmv_fl

__version__ = "0.1.0"
