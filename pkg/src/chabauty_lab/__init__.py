"""Numerical experiments on Chabauty limits of maximal compact subgroups of SL(n, R) and SO_0(p, p)."""
from .lie import DEFAULT_TOL, GroupModel, ModelError, Tolerances, group_distance, group_exp, group_log
from .roots import RootSystem, SubsetData, build_root_system
from .decompose import FactorizationError, cartan_kak, cartan_projection, iwasawa, polar, project_to_chamber
from .limits import (
    INTERIOR,
    ClassificationError,
    LimitGroupDescriptor,
    LimitGroupError,
    StructuredSubgroup,
    build_limit_group,
    classify_sequence,
    descriptor_of_conjugate,
    descriptors_equal,
    is_distal,
    nilpotent_in_dI,
    normalizes,
    verify_nilpotency_criterion,
)
from .chabauty import (
    BallSpec,
    SampledSubgroup,
    SequenceError,
    ToySubgroupR,
    ToySubgroupZ,
    convergence_experiment,
    hausdorff,
    sample,
    toy_limit_R,
    toy_limit_Z,
    verify_sequential_limit,
)
from .polyhedral import (
    CompactifiedPoint,
    PolyhedralPoint,
    certify_facet,
    continuity_experiment_f,
    corner_coords,
    equivalent,
    facet_of_vector,
    from_corner_coords,
    phi,
    polyhedral_limit,
)

__version__ = "0.1.0"
