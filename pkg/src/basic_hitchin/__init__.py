"""Numerical basic Hitchin pairs on quasi-regular Sasakian three-folds.

Basic fields are represented on the quotient Riemann surface, discretised
either as a spectral torus or as a square-tiled translation surface.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .geometry import (  # noqa: F401
    GeometryConfig,
    L_SHAPE_GLUING,
    ScalarCochain,
    SpectralTorus,
    SquareTiledGrid,
    TORUS_GLUING,
    build_surface,
    format_config,
    grid_config,
    load_config,
    parse_config,
)
from .forms import (  # noqa: F401
    HitchinPair,
    MatCochain,
    covariant_d,
    curvature,
    degree_of_bundle,
    flatness_check,
    from_higgs,
    gauge_transform,
    graded_bracket,
    load_pair,
    matrix_wedge,
    save_pair,
    star,
    to_higgs,
)
from .hitchin import (  # noqa: F401
    SolveConfig,
    SolveReport,
    coulomb_project,
    direct_sum,
    energy,
    energy_gradient,
    find_irreducible,
    irreducibility,
    residual,
    solve,
)
from .deformation import (  # noqa: F401
    DeformationComplex,
    assemble,
    basic_index,
    dimension_formula,
    expected_index,
    green_apply,
    harmonic_spaces,
    kuranishi_inverse,
    kuranishi_map,
)
from .moduli import (  # noqa: F401
    build_frame,
    kahler_forms,
    metric_g,
    normal_coordinate_check,
    quaternion_apply,
    quaternion_report,
)
