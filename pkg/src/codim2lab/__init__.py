"""Numerical verification lab for nonnegatively curved submanifolds of
codimension two: shape operators and quadrant-adapted normal frames, strata
and nullity structure, type numbers by independent estimators, and a gallery
of explicit examples every claim is checked against.
"""

__version__ = "0.1.0"

from . import charts, curvature, extrinsic, gallery, jets, morse, pencil
from . import structure, verify
from .charts import Atlas, Chart, ExampleMetadata, atlas_from_json
from .errors import (
    AmbiguousRank,
    Codim2LabError,
    DegenerateCritical,
    FrameNotSmooth,
    LeafNotClosed,
    NoQuadrantFrame,
    NullityNotLine,
)
from .extrinsic import (
    classify_point,
    fundamental_forms,
    gauss_residual,
    shape_operator,
    weinstein_frame,
)
from .gallery import (
    ProfileSpec,
    build,
    cylinder_quotient,
    moebius_composition,
    product_spheres,
    round_sphere,
    switched_sphere,
    synthetic_cone,
)
from .morse import chen_and_wide, morse_profile, tau_by_leaf_formula, \
    tau_by_morse, tau_by_quadrature
from .pencil import PsdPair, classify_equality, inequality_holds, pencil_det, \
    schur_reduce
from .structure import (
    composition_criterion,
    connection_form,
    leaf_total_curvature,
    nullity,
    riccati_residual,
    splitting_tensor,
    trace_leaf,
)

__all__ = [name for name in dir() if not name.startswith("_")]
