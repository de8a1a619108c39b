"""Drag-to-correspondence planning and attention-control simulation on lattice grids."""

from .attention_control import (
    CacheEntry,
    ControlConfig,
    TokenCache,
    UnifiedSourceMap,
    apply_background_replacement,
    augment_kv,
    gated_merge,
    h_schedule,
    rope_encode,
)
from .correspondence import (
    CorrespondencePlan,
    LatentGrid,
    MatchingMaps,
    RegionPartition,
    build_warped_latent,
    compute_correspondence,
    partition_regions,
    project,
    resolve_collisions,
)
from .errors import (
    BadConfig,
    BadHeadDim,
    CacheMiss,
    CacheMismatch,
    CorruptTensor,
    DragfieldError,
    EmptyDestinationWarning,
    EmptyEditableRegion,
    GeometryError,
    HandleOutsideCircle,
    IoError,
    NoInstructions,
    NotEditRegion,
    ParseError,
    PointOutsideCircle,
    ShapeMismatch,
)
from .geometry import (
    DisplacementField,
    DragInstruction,
    EditableMask,
    GridSpec,
    Point,
    ReferenceCircle,
    ScaleVector,
    per_instruction_displacement,
    reference_circle,
    stretch_factor,
    wta_fuse,
)
from .io_formats import DragPlan, parse_drag_plan, read_tensor, write_tensor
from .toy_mmdit import SamplerConfig, ToyModelConfig, build_model, invert, sample

__version__ = "0.1.0"

__all__ = [
    "BadConfig",
    "BadHeadDim",
    "CacheEntry",
    "CacheMiss",
    "CacheMismatch",
    "ControlConfig",
    "CorrespondencePlan",
    "CorruptTensor",
    "DisplacementField",
    "DragfieldError",
    "DragInstruction",
    "DragPlan",
    "EditableMask",
    "EmptyDestinationWarning",
    "EmptyEditableRegion",
    "GeometryError",
    "GridSpec",
    "HandleOutsideCircle",
    "IoError",
    "LatentGrid",
    "MatchingMaps",
    "NoInstructions",
    "NotEditRegion",
    "ParseError",
    "Point",
    "PointOutsideCircle",
    "ReferenceCircle",
    "RegionPartition",
    "SamplerConfig",
    "ScaleVector",
    "ShapeMismatch",
    "TokenCache",
    "ToyModelConfig",
    "UnifiedSourceMap",
    "apply_background_replacement",
    "augment_kv",
    "build_model",
    "build_warped_latent",
    "compute_correspondence",
    "gated_merge",
    "h_schedule",
    "invert",
    "parse_drag_plan",
    "partition_regions",
    "per_instruction_displacement",
    "project",
    "read_tensor",
    "reference_circle",
    "resolve_collisions",
    "rope_encode",
    "sample",
    "stretch_factor",
    "write_tensor",
    "wta_fuse",
]
