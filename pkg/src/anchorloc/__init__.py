"""Range-based localisation of sources against known anchors.

The anchors define a classical-MDS coordinate frame. Single sources are placed
by landmark MDS or by the globally optimal weighted total-LMDS estimator (a
generalised trust-region problem solved by bisection, hard case included);
several sources with partial source-source ranges are placed jointly by
alternating exact block updates.
"""

from .edm import (
    MdsFrame,
    double_center,
    edm_from_points,
    map_to_anchor_frame,
    map_to_mds_frame,
    mds_frame,
    mds_lengths,
)
from .estimators import LandmarkMDS, MultiSourceTLMDS, WeightedTLMDS
from .exceptions import (
    AnchorlocError,
    DegenerateSubspaceError,
    DimensionMismatchError,
    NoConvergenceError,
    NotEuclideanError,
    OutOfDomainError,
    ParseError,
    RankDeficientError,
    ShapeMismatchError,
)
from .gtrs import GtrsProblem, GtrsSolution, build_ssl_problem, solve
from .msl import MslResult, MslScene, bmsl_solve, make_scene
from .ssl import (
    ObjectiveSpec,
    SslRhs,
    gower_embed,
    lmds_embed,
    localize,
    ssl_rhs,
    weight_grid_search,
    weighted_tlmds_solve,
)
from .synth import rmsd

__version__ = "0.1.0"

__all__ = [
    "MdsFrame",
    "double_center",
    "edm_from_points",
    "map_to_anchor_frame",
    "map_to_mds_frame",
    "mds_frame",
    "mds_lengths",
    "LandmarkMDS",
    "MultiSourceTLMDS",
    "WeightedTLMDS",
    "AnchorlocError",
    "DegenerateSubspaceError",
    "DimensionMismatchError",
    "NoConvergenceError",
    "NotEuclideanError",
    "OutOfDomainError",
    "ParseError",
    "RankDeficientError",
    "ShapeMismatchError",
    "GtrsProblem",
    "GtrsSolution",
    "build_ssl_problem",
    "solve",
    "MslResult",
    "MslScene",
    "bmsl_solve",
    "make_scene",
    "ObjectiveSpec",
    "SslRhs",
    "gower_embed",
    "lmds_embed",
    "localize",
    "ssl_rhs",
    "weight_grid_search",
    "weighted_tlmds_solve",
    "rmsd",
]
