"""betascan: multiscale flatness (beta-number) analysis of finite point samples."""

from .content import (
    ContentEstimate,
    DyadicGrid,
    PointSample,
    check_lower_regularity,
    choquet_integral,
    hausdorff_content,
)
from .geometry import (
    AffinePlane,
    Ball,
    Cone,
    dist_point_plane,
    in_cone,
    local_hausdorff_distance,
    project_plane,
)

__version__ = "0.1.0"

__all__ = [
    "AffinePlane",
    "Ball",
    "Cone",
    "ContentEstimate",
    "DyadicGrid",
    "PointSample",
    "check_lower_regularity",
    "choquet_integral",
    "dist_point_plane",
    "hausdorff_content",
    "in_cone",
    "local_hausdorff_distance",
    "project_plane",
    "__version__",
]
