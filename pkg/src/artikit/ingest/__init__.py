"""Object descriptions, canonicalization, voxelization and procedural data."""

from .objects import (
    ArticulatedObject,
    Part,
    PartGeometry,
    canonicalize,
    load_object,
    parse_object,
    save_object,
    validate_object,
    write_object,
)
from .procedural import CATEGORIES, ProceduralSpec, gen_procedural, procedural_dataset, sample_spec
from .voxelize import contact_fraction, voxelize

__all__ = [
    "ArticulatedObject", "Part", "PartGeometry", "canonicalize", "load_object", "parse_object",
    "save_object", "validate_object", "write_object", "CATEGORIES", "ProceduralSpec",
    "gen_procedural", "procedural_dataset", "sample_spec", "contact_fraction", "voxelize",
]
