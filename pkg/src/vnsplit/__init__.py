"""Splitting maps, von Neumann algebras and semi-causal channels in finite dimension."""

from .linops import DEFAULT_TOL, OperatorSubspace, Tolerance
from .vnalg import (
    AWDecomposition,
    VnAlgebra,
    atomic_projectors,
    aw_decomposition,
    center,
    commutant,
    generate_algebra,
    homomorphism_support,
    minimal_projector_family,
    trace_over_algebra,
)
from .splitmap import (
    Side,
    SplittingMap,
    balanced_decomposition,
    canonical_splitting_map,
    comprehension_balanced_canonical,
    comprehension_nested_canonical,
    consistent_algebra,
    factor_shape,
    is_balanced,
    is_consistent,
    is_lean,
    lean_decomposition,
    make_splitting_map,
    sigma,
    split_by_atomic_projectors,
    strictly_local_algebra,
    verify_comprehension,
)
from .channels import (
    Channel,
    channel_from_kraus,
    chi_trace,
    heisenberg_semicausal,
    recovery_channel,
    relate_dilations,
    schroedinger_semicausal,
    semi_localise,
    stinespring,
    trace_equivalence_isometry,
    verify_semi_localisation,
)

__version__ = "0.1.0"

__all__ = [
    "AWDecomposition",
    "Channel",
    "DEFAULT_TOL",
    "OperatorSubspace",
    "Side",
    "SplittingMap",
    "Tolerance",
    "VnAlgebra",
    "atomic_projectors",
    "aw_decomposition",
    "balanced_decomposition",
    "canonical_splitting_map",
    "center",
    "channel_from_kraus",
    "chi_trace",
    "commutant",
    "comprehension_balanced_canonical",
    "comprehension_nested_canonical",
    "consistent_algebra",
    "factor_shape",
    "generate_algebra",
    "heisenberg_semicausal",
    "homomorphism_support",
    "is_balanced",
    "is_consistent",
    "is_lean",
    "lean_decomposition",
    "make_splitting_map",
    "minimal_projector_family",
    "recovery_channel",
    "relate_dilations",
    "schroedinger_semicausal",
    "semi_localise",
    "sigma",
    "split_by_atomic_projectors",
    "stinespring",
    "strictly_local_algebra",
    "trace_equivalence_isometry",
    "trace_over_algebra",
    "verify_comprehension",
    "verify_semi_localisation",
]
