"""The visual grounding pipeline: tag -> detect -> segment -> match.

Tags become a comma-joined referring query for the open-set detector; the
detector's boxes prompt the segmenter for masks; a text LLM then pairs the
localized entities with substrings of the chat reply.  Later stages degrade
gracefully: the pipeline runs post-hoc over an already-generated response
and must never lose it.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .. import media
from ..errors import AdapterError, InputError
from ..prompting import build_matching_prompt
from ..types import (
    BoundingBox,
    EntityMatch,
    GroundedEntity,
    Modality,
    ModalityInput,
    SegmentMask,
    Tag,
    TagSet,
)
from .adapters import AdapterSet, Detection, DetectorAdapter, SegmenterAdapter, TaggerAdapter, TextLLMAdapter

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroundingConfig:
    tag_score_threshold: float = 0.5
    box_score_threshold: float = 0.25
    nms_iou_threshold: float = 0.9
    mask_margin_px: float = 2.0


@dataclass(frozen=True)
class GroundingResult:
    """Pipeline output; ``matches[i].entity_index`` always indexes ``entities``."""

    tags: TagSet
    entities: tuple[GroundedEntity, ...]
    matches: tuple[EntityMatch, ...]
    timings_ms: Mapping[str, float] = field(default_factory=dict)
    clip_warnings: int = 0
    error: str | None = None

    def __post_init__(self) -> None:
        for match in self.matches:
            if match.entity_index >= len(self.entities):
                raise ValueError(
                    f"match entity_index {match.entity_index} >= {len(self.entities)} entities"
                )

    def to_dict(self, include_timings: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "schema_version": 1,
            "tags": self.tags.to_dict()["tags"],
            "entities": [e.to_dict() for e in self.entities],
            "matches": [m.to_dict() for m in self.matches],
            "clip_warnings": self.clip_warnings,
            "error": self.error,
        }
        if include_timings:
            out["timings_ms"] = dict(self.timings_ms)
        return out

    def canonical_json(self) -> str:
        """Deterministic serialization; timings are diagnostics and excluded."""
        return json.dumps(self.to_dict(include_timings=False), sort_keys=True,
                          separators=(",", ":"))


def tag_image(
    image: ModalityInput,
    tagger: TaggerAdapter,
    config: GroundingConfig = GroundingConfig(),
) -> TagSet:
    """Run the tagger, drop low-score tags, dedup labels preserving order."""
    if image.kind is not Modality.IMAGE:
        raise InputError(f"expected an image, got {image.kind.value}")
    media.image_size(image)  # raises InputError when undecodable
    try:
        raw = tagger.tag(image)
    except Exception as exc:
        raise AdapterError("tagging", str(exc)) from exc
    kept = [t for t in raw if t.score >= config.tag_score_threshold]
    return TagSet.dedup(kept)


def compose_detection_query(tags: TagSet) -> str:
    """Comma-join tag labels, no spaces, preserving tag order."""
    return ",".join(tags.labels)


def detect_entities(
    image: ModalityInput,
    query: str,
    detector: DetectorAdapter,
    config: GroundingConfig = GroundingConfig(),
) -> list[Detection]:
    """Detect boxes for the query; threshold, sort by score, suppress dupes."""
    if not query:
        raise InputError("detection query must be non-empty")
    try:
        raw = list(detector.detect(image, query))
    except Exception as exc:
        raise AdapterError("detection", str(exc)) from exc
    width, height = media.image_size(image)
    for det in raw:
        problems = det.box.violations_for_image(width, height)
        if problems:
            raise AdapterError("detection", "; ".join(problems))
    kept = [d for d in raw if d.score >= config.box_score_threshold]
    kept.sort(key=lambda d: -d.score)
    return _suppress_duplicates(kept, config.nms_iou_threshold)


def _suppress_duplicates(detections: list[Detection], iou_threshold: float) -> list[Detection]:
    # Same-label boxes overlapping at IoU >= threshold collapse to the best-scored one.
    kept: list[Detection] = []
    for det in detections:
        duplicate = any(
            k.label == det.label and k.box.iou(det.box) >= iou_threshold for k in kept
        )
        if not duplicate:
            kept.append(det)
    return kept


def refine_masks(
    image: ModalityInput,
    detections: Sequence[Detection],
    segmenter: SegmenterAdapter,
    config: GroundingConfig = GroundingConfig(),
) -> tuple[list[GroundedEntity], int]:
    """Prompt the segmenter with boxes; returns entities and a clip-warning count.

    Masks straying outside the box dilated by ``mask_margin_px`` are clipped
    back to the box itself.
    """
    if not detections:
        return [], 0
    boxes = [d.box for d in detections]
    try:
        masks = list(segmenter.segment(image, boxes))
    except Exception as exc:
        raise AdapterError("segmentation", str(exc)) from exc
    if len(masks) != len(detections):
        raise AdapterError(
            "segmentation", f"{len(masks)} masks for {len(detections)} boxes"
        )
    width, height = media.image_size(image)
    entities: list[GroundedEntity] = []
    clip_warnings = 0
    for det, mask in zip(detections, masks):
        if (mask.width, mask.height) != (width, height):
            raise AdapterError(
                "segmentation",
                f"mask {mask.width}x{mask.height} != image {width}x{height}",
            )
        entity = GroundedEntity(det.label, det.box, mask, det.score)
        if entity.mask_pixels_outside_box(config.mask_margin_px):
            clipped, cleared = _clip_mask(mask, det.box)
            logger.warning("clipped %d mask pixels outside box for %r", cleared, det.label)
            clip_warnings += 1
            entity = GroundedEntity(det.label, det.box, clipped, det.score)
        entities.append(entity)
    return entities, clip_warnings


def _clip_mask(mask: SegmentMask, box: BoundingBox) -> tuple[SegmentMask, int]:
    from .. import maskops

    bitmap, cleared = maskops.clip_to_box(
        mask.to_bitmap(), mask.width, mask.height,
        box.x_min, box.y_min, box.x_max, box.y_max,
    )
    return SegmentMask.from_bitmap(mask.width, mask.height, bitmap), cleared


def match_entities(
    entities: Sequence[GroundedEntity],
    response_text: str,
    matcher: TextLLMAdapter,
) -> list[EntityMatch]:
    """Ask the matcher LLM which entities the response mentions.

    The reply wire format is one ``label -> surface`` line per match; lines
    with unknown labels or surfaces that are not verbatim substrings are
    discarded with a diagnostic, never an exception.
    """
    if not response_text:
        raise InputError("response text must be non-empty")
    labels = [e.label for e in entities]
    prompt = build_matching_prompt(labels, response_text)
    try:
        reply = matcher.complete(prompt)
    except Exception as exc:
        raise AdapterError("matching", str(exc)) from exc
    matches: list[EntityMatch] = []
    seen: set[tuple[int, tuple[int, int]]] = set()
    for line in reply.splitlines():
        line = line.strip()
        if not line:
            continue
        if "->" not in line:
            logger.warning("unparseable matcher line discarded: %r", line)
            continue
        label_part, surface = (part.strip() for part in line.split("->", 1))
        if label_part not in labels:
            logger.warning("matcher named unknown entity %r; discarded", label_part)
            continue
        start = response_text.find(surface) if surface else -1
        if start < 0:
            logger.warning("matcher surface %r not a verbatim substring; discarded", surface)
            continue
        match = EntityMatch(labels.index(label_part), (start, start + len(surface)), surface)
        key = (match.entity_index, match.span)
        if key not in seen:
            seen.add(key)
            matches.append(match)
    return matches


def run_pipeline(
    image: ModalityInput,
    response_text: str | None,
    adapters: AdapterSet,
    config: GroundingConfig = GroundingConfig(),
) -> GroundingResult:
    """Execute tag -> detect -> segment -> match, keeping partial results.

    A tagging failure raises; failures in later stages return whatever the
    earlier stages produced, with the failing stage recorded in ``error``.
    Passing ``response_text=None`` skips matching (no reply to ground yet).
    """
    timings: dict[str, float] = {}
    start = time.perf_counter()
    tags = tag_image(image, adapters.tagger, config)
    timings["tagging"] = (time.perf_counter() - start) * 1000.0

    entities: list[GroundedEntity] = []
    matches: list[EntityMatch] = []
    clip_warnings = 0
    error: str | None = None

    detections: list[Detection] = []
    if len(tags):
        start = time.perf_counter()
        try:
            detections = detect_entities(
                image, compose_detection_query(tags), adapters.detector, config
            )
        except AdapterError as exc:
            error = str(exc)
        timings["detection"] = (time.perf_counter() - start) * 1000.0

    if detections and error is None:
        start = time.perf_counter()
        try:
            entities, clip_warnings = refine_masks(
                image, detections, adapters.segmenter, config
            )
        except AdapterError as exc:
            # Masks are optional: keep box-only entities and continue.
            logger.warning("segmentation degraded to boxes: %s", exc)
            entities = [
                GroundedEntity(d.label, d.box, None, d.score) for d in detections
            ]
            error = str(exc)
        timings["segmentation"] = (time.perf_counter() - start) * 1000.0

    if response_text is not None and error_allows_matching(error):
        start = time.perf_counter()
        try:
            matches = match_entities(entities, response_text, adapters.matcher)
        except AdapterError as exc:
            matches = []
            error = str(exc)
        timings["matching"] = (time.perf_counter() - start) * 1000.0

    return GroundingResult(
        tags=tags,
        entities=tuple(entities),
        matches=tuple(matches),
        timings_ms=timings,
        clip_warnings=clip_warnings,
        error=error,
    )


def error_allows_matching(error: str | None) -> bool:
    # Matching needs labels, not masks: only a detection failure blocks it.
    return error is None or error.startswith("[segmentation]")
