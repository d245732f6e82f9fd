"""registra: flowchart-driven visual inspection with transparent registration.

Measurements and tolerances are defined once on a reference image; at
inspection time a similarity transform is recovered by registration and
propagated through the whole processing chain, so the tools run on the
inspected image exactly where the part actually is — without ever
resampling it.
"""

from .geometry import (
    NonPositiveScale,
    Point2,
    Roi,
    Transform,
    apply,
    compose,
    decompose,
    from_similarity,
    identity,
    invert,
    roi_to_parent,
)
from .inspection import (
    InspectionReport,
    Recipe,
    Stats,
    Tolerance,
    batch_run,
    evaluate,
    inspect,
)
from .raster import Image, ImageView, load, sample_bilinear, save, view, warp_similarity
from .registration import (
    RegistrationFailed,
    RegistrationModel,
    RegistrationResult,
    SearchParams,
    build_model,
    ncc,
    register,
    register_translation_bruteforce,
)
from .tools import (
    Blob,
    EdgeParams,
    LineModel,
    Measurement,
    ToolContext,
    extract_blobs,
    extract_line,
    measure_angle,
    measure_distance,
    measure_intensity,
)

__version__ = "0.1.0"

__all__ = [
    "Blob",
    "EdgeParams",
    "Image",
    "ImageView",
    "InspectionReport",
    "LineModel",
    "Measurement",
    "NonPositiveScale",
    "Point2",
    "Recipe",
    "RegistrationFailed",
    "RegistrationModel",
    "RegistrationResult",
    "Roi",
    "SearchParams",
    "Stats",
    "Tolerance",
    "ToolContext",
    "Transform",
    "apply",
    "batch_run",
    "build_model",
    "compose",
    "decompose",
    "evaluate",
    "extract_blobs",
    "extract_line",
    "from_similarity",
    "identity",
    "inspect",
    "invert",
    "load",
    "measure_angle",
    "measure_distance",
    "measure_intensity",
    "ncc",
    "register",
    "register_translation_bruteforce",
    "roi_to_parent",
    "sample_bilinear",
    "save",
    "view",
    "warp_similarity",
]
