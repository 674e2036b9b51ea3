"""covapix: covariance-pixel image summaries.

Segment an image into regions, summarize each region as a covapixel (the
mean and covariance of per-pixel feature vectors), combine covapixels with
covariance fusion operators, and render or score the result.
"""

from . import errors
from .covapixel import (
    AdjacencyGraph,
    Covapixel,
    CovapixelSet,
    FeatureSpace,
    covapix_dumps,
    covapix_loads,
    extract_covapixels,
    merge_covapixels,
    region_adjacency,
)
from .fusion import (
    Estimate,
    FusionResult,
    ca_bound,
    ci_fuse,
    cu_fuse,
    fuse_reduce,
    golden_section,
    kf_fuse,
)
from .imaging import (
    ImageBuffer,
    QualityReport,
    boundary_pair_count,
    lab_to_rgb,
    overlay_boundaries,
    quality_stats,
    read_ppm,
    render_ellipses,
    render_flat,
    rgb_to_lab,
    write_ppm,
)
from .psd import (
    CholFactor,
    SymPsdMatrix,
    cholesky,
    loewner_dominates,
    size_measure,
    spd_inverse,
)
from .segmentation import (
    LabelMap,
    SlicParams,
    enforce_connectivity,
    grid_segment,
    label_map_from_bytes,
    label_map_to_bytes,
    slic_segment,
)

__version__ = "0.1.0"

__all__ = [
    "AdjacencyGraph",
    "CholFactor",
    "Covapixel",
    "CovapixelSet",
    "Estimate",
    "FeatureSpace",
    "FusionResult",
    "ImageBuffer",
    "LabelMap",
    "QualityReport",
    "SlicParams",
    "SymPsdMatrix",
    "boundary_pair_count",
    "ca_bound",
    "cholesky",
    "ci_fuse",
    "covapix_dumps",
    "covapix_loads",
    "cu_fuse",
    "enforce_connectivity",
    "errors",
    "extract_covapixels",
    "fuse_reduce",
    "golden_section",
    "grid_segment",
    "kf_fuse",
    "lab_to_rgb",
    "label_map_from_bytes",
    "label_map_to_bytes",
    "loewner_dominates",
    "merge_covapixels",
    "overlay_boundaries",
    "quality_stats",
    "read_ppm",
    "region_adjacency",
    "render_ellipses",
    "render_flat",
    "rgb_to_lab",
    "size_measure",
    "slic_segment",
    "spd_inverse",
    "write_ppm",
]
