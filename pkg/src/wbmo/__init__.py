"""wbmo: a numerical laboratory for weighted oscillation inequalities.

Step functions on uniform power-of-two grids carry exact interval
arithmetic (prefix sums, range minima), on top of which the package
computes Muckenhoupt characteristics, reverse Holder constants, weighted
BMO seminorms and sharp maximal fields, tests local L^q operator bounds,
and audits the full inequality chain behind the uL^inf -> BMO_u mapping
property for A_1 weights.  See the cli module for the scenario-driven
command line front end.
"""

from .bmo import (
    BmoReport,
    SharpField,
    bmo_u_seminorm,
    operator_lpu_ratio,
    oscillation,
    sharp_maximal,
    sharp_norm_ratio,
    weighted_lp_norm,
)
from .grid import (
    ALL_ALIGNED_LIMIT,
    FAMILY_KINDS,
    Grid,
    GridInterval,
    IntervalFamilySpec,
    StepFunction,
    average,
    enumerate_family,
    ess_inf,
    family_label,
    integrate,
    lq_norm_local,
    make_grid,
    refine_family,
    sup_norm,
)
from .harness import (
    ChainAuditReport,
    ConvergenceReport,
    MarginScan,
    TheoremReport,
    chain_audit,
    convergence_study,
    default_test_functions,
    make_test_function,
    margin_scan,
    theorem_verify,
)
from .operators import (
    DEFAULT_QS,
    OPERATOR_KINDS,
    HypothesisReport,
    OperatorSpec,
    apply_operator,
    hypothesis_test,
)
from .scenario import Scenario, ScenarioError, parse_scenario
from .weights import (
    WEIGHT_KINDS,
    AinfMarginReport,
    CharacteristicReport,
    RhiMaxDeltaReport,
    RhiReport,
    Weight,
    WeightSpec,
    a1_characteristic,
    ainf_margin,
    ap_characteristic,
    materialize_weight,
    refine_weight,
    rhi_constant,
    rhi_max_delta,
    transform_weight,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_ALIGNED_LIMIT",
    "AinfMarginReport",
    "BmoReport",
    "ChainAuditReport",
    "CharacteristicReport",
    "ConvergenceReport",
    "DEFAULT_QS",
    "FAMILY_KINDS",
    "Grid",
    "GridInterval",
    "HypothesisReport",
    "IntervalFamilySpec",
    "MarginScan",
    "OPERATOR_KINDS",
    "OperatorSpec",
    "RhiMaxDeltaReport",
    "RhiReport",
    "Scenario",
    "ScenarioError",
    "SharpField",
    "StepFunction",
    "TheoremReport",
    "WEIGHT_KINDS",
    "Weight",
    "WeightSpec",
    "a1_characteristic",
    "ainf_margin",
    "ap_characteristic",
    "apply_operator",
    "average",
    "bmo_u_seminorm",
    "chain_audit",
    "convergence_study",
    "default_test_functions",
    "enumerate_family",
    "ess_inf",
    "family_label",
    "hypothesis_test",
    "integrate",
    "lq_norm_local",
    "make_grid",
    "make_test_function",
    "margin_scan",
    "materialize_weight",
    "operator_lpu_ratio",
    "oscillation",
    "parse_scenario",
    "refine_family",
    "refine_weight",
    "rhi_constant",
    "rhi_max_delta",
    "sharp_maximal",
    "sharp_norm_ratio",
    "sup_norm",
    "theorem_verify",
    "transform_weight",
    "weighted_lp_norm",
    "__version__",
]
