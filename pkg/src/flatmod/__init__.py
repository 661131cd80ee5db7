"""Volumes and intersection numbers of moduli spaces of flat connections on surfaces."""
from .errors import *  # noqa: F401,F403
from .lie_core import (
    HolonomySpec,
    RootSystem,
    Weight,
    build_root_system,
    casimir,
    central_character,
    character,
    dimension,
    enumerate_dominant_weights,
    frobenius_schur,
    weyl_determinant_abs,
)
from .polynomial import InvariantPolynomial
from .series import (
    SeriesResult,
    SurfaceTopology,
    assembled_invariant,
    c_to_u_limit,
    group_and_torus_volumes,
    moduli_series,
    moduli_volume,
    regularized_limit,
    vanishing_check,
)

__version__ = "0.1.0"
