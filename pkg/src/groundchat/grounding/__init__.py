from .adapters import AdapterSet, Detection
from .pipeline import (
    GroundingConfig,
    GroundingResult,
    compose_detection_query,
    detect_entities,
    match_entities,
    refine_masks,
    run_pipeline,
    tag_image,
)

__all__ = [
    "AdapterSet",
    "Detection",
    "GroundingConfig",
    "GroundingResult",
    "compose_detection_query",
    "detect_entities",
    "match_entities",
    "refine_masks",
    "run_pipeline",
    "tag_image",
]
