"""stratakit: instability stratification data for linearised torus and
quiver actions.

The combinatorial route (exact rational cone projection, slope
filtrations) and the analytic route (moment-map norm-square flow,
Kempf-Ness minimisation) compute the same stratification data; the
harness checks them against each other on demand.
"""

from .errors import (
    ClassificationError,
    DomainError,
    GenerationError,
    InputError,
    NumericError,
    ResourceLimitError,
    SchemaError,
    StratakitError,
    UnsupportedError,
)
from .exact import (
    ConeProjection,
    Containment,
    InnerProduct,
    dual_cone_contains,
    halfspace_containment,
    primitive_integer_ray,
    project_shifted_cone,
    vec,
)
from .moment import (
    Candidate,
    FlowOpts,
    FlowResult,
    HermitianModel,
    KNOpts,
    KNResult,
    MomentValue,
    SnapResult,
    classify_limit,
    eigen_pattern,
    flow,
    grad_norm_sq,
    kempf_ness_value,
    kn_gradient,
    kn_minimize,
    kn_value_along,
    moment_star,
    mu_norm_sq,
    weight_formula_check,
)
from .quiver import (
    BlockStructure,
    BlockWeights,
    GeneratedRep,
    HNType,
    Quiver,
    QuiverInstance,
    QuiverRep,
    beta_of_type,
    block_structure,
    enumerate_hn_types,
    generate_hn_instance,
    group_act,
    hn_filtration_abelian,
    parabolic_membership,
    rho_lambda,
    slope,
    subrep_candidates_abelian,
    to_torus_spec,
)
from .torus import (
    Stability,
    StratumIndex,
    TorusActionSpec,
    classify_point,
    classify_support,
    enumerate_indices,
    hm_pairing,
    stability_status,
    support_weights,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
