"""Black-box targeted adversarial attacks via greedy pixel perturbation.

The attack repeatedly probes a victim classifier through a query-counting
oracle interface, perturbing the pixels that most improve the target
class's standing while hiding in high-contrast regions, until a perceptual
distance budget is spent. Ships with a minimal capsule/CNN inference
engine and a toy trainer so experiments run without any ML framework.
"""

from .attack import (
    AttackParams,
    AttackTrace,
    GapProbe,
    Region,
    SdMap,
    TraceRow,
    apply_top_v,
    compute_sd_map,
    distance,
    gap,
    probe_gaps,
    run_attack,
    select_candidates,
    trace_summary,
    trace_to_csv,
)
from .errors import (
    BudgetExhaustedError,
    DegenerateImageError,
    GapAttackError,
    MalformedFileError,
    ManifestMismatchError,
    OracleError,
    ShapeMismatchError,
)
from .image import Image, PixelCoord, ProbVector, clip, load_image, save_image
from .oracle import (
    InProcessOracle,
    Oracle,
    RecordingOracle,
    ReplayOracle,
    SubprocessOracle,
    with_budget,
)
from .transforms import AffineSpec, rotate, shift, zoom

__version__ = "0.1.0"

__all__ = [
    "AffineSpec",
    "AttackParams",
    "AttackTrace",
    "BudgetExhaustedError",
    "DegenerateImageError",
    "GapAttackError",
    "GapProbe",
    "Image",
    "InProcessOracle",
    "MalformedFileError",
    "ManifestMismatchError",
    "Oracle",
    "OracleError",
    "PixelCoord",
    "ProbVector",
    "RecordingOracle",
    "Region",
    "ReplayOracle",
    "SdMap",
    "ShapeMismatchError",
    "SubprocessOracle",
    "TraceRow",
    "apply_top_v",
    "clip",
    "compute_sd_map",
    "distance",
    "gap",
    "load_image",
    "probe_gaps",
    "rotate",
    "run_attack",
    "save_image",
    "select_candidates",
    "shift",
    "trace_summary",
    "trace_to_csv",
    "with_budget",
    "zoom",
]
