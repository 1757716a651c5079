"""Shared domain types: tags, boxes, masks, entities, media, samples, turns.

All types are immutable after construction and JSON-serializable through
``to_dict`` / ``from_dict`` (round-trip exact).  Cheap structural invariants
are enforced at construction; invariants that need external context (image
dimensions, response text, configured margins) live in the ``*_violations``
helpers so callers can treat them as data instead of exceptions.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Iterator, Sequence

from . import maskops


class Modality(str, Enum):
    IMAGE = "image"
    AUDIO = "audio"


class MediaFormat(str, Enum):
    PNG = "png"
    JPEG = "jpeg"
    WAV = "wav"
    FLAC = "flac"
    MP3 = "mp3"


class Role(str, Enum):
    HUMAN = "human"
    ASSISTANT = "assistant"


FORMATS_BY_MODALITY: dict[Modality, frozenset[MediaFormat]] = {
    Modality.IMAGE: frozenset({MediaFormat.PNG, MediaFormat.JPEG}),
    Modality.AUDIO: frozenset({MediaFormat.WAV, MediaFormat.FLAC, MediaFormat.MP3}),
}


@dataclass(frozen=True)
class Tag:
    """A single semantic tag produced by the tagging stage."""

    label: str
    score: float

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("tag label must be non-empty")
        if self.label != self.label.lower():
            raise ValueError(f"tag label must be lowercase: {self.label!r}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"tag score {self.score} outside [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return {"label": self.label, "score": self.score}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Tag":
        return cls(label=d["label"], score=d["score"])


@dataclass(frozen=True)
class TagSet:
    """Ordered, label-deduplicated tags; order comes from the tagger."""

    tags: tuple[Tag, ...]

    def __post_init__(self) -> None:
        labels = [t.label for t in self.tags]
        if len(labels) != len(set(labels)):
            raise ValueError("duplicate tag labels in TagSet")

    @classmethod
    def dedup(cls, tags: Iterable[Tag]) -> "TagSet":
        """Build a TagSet keeping the first occurrence of each label."""
        seen: set[str] = set()
        kept: list[Tag] = []
        for tag in tags:
            if tag.label not in seen:
                seen.add(tag.label)
                kept.append(tag)
        return cls(tuple(kept))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(t.label for t in self.tags)

    def __len__(self) -> int:
        return len(self.tags)

    def __iter__(self) -> Iterator[Tag]:
        return iter(self.tags)

    def to_dict(self) -> dict[str, Any]:
        return {"tags": [t.to_dict() for t in self.tags]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TagSet":
        return cls(tuple(Tag.from_dict(t) for t in d["tags"]))


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in absolute pixel coordinates of the source image."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (0 <= self.x_min < self.x_max):
            raise ValueError(f"need 0 <= x_min < x_max, got {self.x_min}, {self.x_max}")
        if not (0 <= self.y_min < self.y_max):
            raise ValueError(f"need 0 <= y_min < y_max, got {self.y_min}, {self.y_max}")

    def violations_for_image(self, width: int, height: int) -> list[str]:
        out = []
        if self.x_max > width:
            out.append(f"box: x_max {self.x_max} exceeds image width {width}")
        if self.y_max > height:
            out.append(f"box: y_max {self.y_max} exceeds image height {height}")
        return out

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def dilate(self, margin: float) -> "BoundingBox":
        return BoundingBox(
            max(0.0, self.x_min - margin),
            max(0.0, self.y_min - margin),
            self.x_max + margin,
            self.y_max + margin,
        )

    def iou(self, other: "BoundingBox") -> float:
        ix = max(0.0, min(self.x_max, other.x_max) - max(self.x_min, other.x_min))
        iy = max(0.0, min(self.y_max, other.y_max) - max(self.y_min, other.y_min))
        inter = ix * iy
        union = self.area + other.area - inter
        return inter / union if union > 0 else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "x_min": self.x_min,
            "y_min": self.y_min,
            "x_max": self.x_max,
            "y_max": self.y_max,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BoundingBox":
        return cls(d["x_min"], d["y_min"], d["x_max"], d["y_max"])


@dataclass(frozen=True)
class SegmentMask:
    """Binary bitmap at source-image resolution, stored run-length encoded.

    ``counts`` alternates run lengths starting with the run of zeros
    (possibly 0) in row-major order and must sum to width*height.
    """

    width: int
    height: int
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"mask dimensions must be positive: {self.width}x{self.height}")
        total = sum(self.counts)
        if total != self.width * self.height:
            raise ValueError(
                f"run lengths sum to {total}, expected {self.width * self.height}"
            )
        if any(c < 0 for c in self.counts):
            raise ValueError("negative run length")

    @classmethod
    def from_bitmap(cls, width: int, height: int, bitmap: bytes) -> "SegmentMask":
        if len(bitmap) != width * height:
            raise ValueError(f"bitmap length {len(bitmap)} != {width}x{height}")
        return cls(width, height, tuple(maskops.rle_encode(bitmap)))

    def to_bitmap(self) -> bytes:
        return maskops.rle_decode(self.counts, self.width * self.height)

    @property
    def area(self) -> int:
        return sum(self.counts[1::2])

    def digest(self) -> str:
        payload = f"{self.width}x{self.height}:".encode() + ",".join(
            map(str, self.counts)
        ).encode()
        return hashlib.sha256(payload).hexdigest()

    def to_dict(self) -> dict[str, Any]:
        return {"width": self.width, "height": self.height, "counts": list(self.counts)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SegmentMask":
        return cls(d["width"], d["height"], tuple(d["counts"]))


@dataclass(frozen=True)
class GroundedEntity:
    """A localized visual entity: label plus box, optionally a mask."""

    label: str
    box: BoundingBox
    mask: SegmentMask | None
    detector_score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.detector_score <= 1.0:
            raise ValueError(f"detector score {self.detector_score} outside [0, 1]")

    def mask_pixels_outside_box(self, margin: float = 2.0) -> int:
        """On-pixels outside the box dilated by ``margin`` (0 when mask absent)."""
        if self.mask is None:
            return 0
        box = self.box.dilate(margin)
        return maskops.count_outside_box(
            self.mask.to_bitmap(),
            self.mask.width,
            self.mask.height,
            box.x_min,
            box.y_min,
            box.x_max,
            box.y_max,
        )

    def violations(self, margin: float = 2.0) -> list[str]:
        out = []
        if self.mask is not None:
            outside = self.mask_pixels_outside_box(margin)
            if outside:
                out.append(
                    f"mask: {outside} on-pixels outside box dilated by {margin} px"
                )
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "box": self.box.to_dict(),
            "mask": self.mask.to_dict() if self.mask is not None else None,
            "detector_score": self.detector_score,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GroundedEntity":
        return cls(
            label=d["label"],
            box=BoundingBox.from_dict(d["box"]),
            mask=SegmentMask.from_dict(d["mask"]) if d.get("mask") is not None else None,
            detector_score=d["detector_score"],
        )


@dataclass(frozen=True)
class EntityMatch:
    """Pairs an entity index with the character span it covers in a response."""

    entity_index: int
    span: tuple[int, int]
    surface: str

    def __post_init__(self) -> None:
        start, end = self.span
        if self.entity_index < 0:
            raise ValueError(f"entity index {self.entity_index} negative")
        if not 0 <= start < end:
            raise ValueError(f"need 0 <= start < end, got {self.span}")

    def violations(self, response_text: str, entity_count: int | None = None) -> list[str]:
        out = []
        start, end = self.span
        if end > len(response_text):
            out.append(f"span: end {end} exceeds response length {len(response_text)}")
        elif response_text[start:end] != self.surface:
            out.append(
                f"surface: {self.surface!r} != response slice "
                f"{response_text[start:end]!r} at {self.span}"
            )
        if entity_count is not None and self.entity_index >= entity_count:
            out.append(
                f"entity_index: {self.entity_index} >= entity count {entity_count}"
            )
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "entity_index": self.entity_index,
            "span": list(self.span),
            "surface": self.surface,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EntityMatch":
        return cls(d["entity_index"], tuple(d["span"]), d["surface"])


@dataclass(frozen=True)
class ModalityInput:
    """Raw media bytes plus kind, container format and content digest."""

    kind: Modality
    payload: bytes = field(repr=False)
    format: MediaFormat
    digest: str

    def __post_init__(self) -> None:
        if not self.payload:
            raise ValueError("payload must be non-empty")
        if self.format not in FORMATS_BY_MODALITY[self.kind]:
            raise ValueError(f"format {self.format.value} inconsistent with {self.kind.value}")

    @classmethod
    def from_bytes(cls, kind: Modality, payload: bytes, format: MediaFormat) -> "ModalityInput":
        return cls(kind=kind, payload=payload, format=format, digest=content_digest(payload))

    def ref(self, uri: str | None = None) -> "MediaRef":
        return MediaRef(kind=self.kind, format=self.format, digest=self.digest, uri=uri)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "payload_b64": base64.b64encode(self.payload).decode("ascii"),
            "format": self.format.value,
            "digest": self.digest,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModalityInput":
        return cls(
            kind=Modality(d["kind"]),
            payload=base64.b64decode(d["payload_b64"]),
            format=MediaFormat(d["format"]),
            digest=d["digest"],
        )


def content_digest(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class MediaRef:
    """Reference to a ModalityInput by digest and/or URI (no payload)."""

    kind: Modality
    format: MediaFormat
    digest: str | None = None
    uri: str | None = None

    def __post_init__(self) -> None:
        if self.digest is None and self.uri is None:
            raise ValueError("media reference needs a digest or a uri")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "format": self.format.value,
            "digest": self.digest,
            "uri": self.uri,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MediaRef":
        return cls(
            kind=Modality(d["kind"]),
            format=MediaFormat(d["format"]),
            digest=d.get("digest"),
            uri=d.get("uri"),
        )


@dataclass(frozen=True)
class InstructionSample:
    """One training example; invalid states are reported by validate_sample."""

    image: MediaRef | None
    audio: MediaRef | None
    instruction: str
    response: str
    related: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "image": self.image.to_dict() if self.image else None,
            "audio": self.audio.to_dict() if self.audio else None,
            "instruction": self.instruction,
            "response": self.response,
            "related": self.related,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "InstructionSample":
        return cls(
            image=MediaRef.from_dict(d["image"]) if d.get("image") else None,
            audio=MediaRef.from_dict(d["audio"]) if d.get("audio") else None,
            instruction=d["instruction"],
            response=d["response"],
            related=d["related"],
        )


def validate_sample(sample: InstructionSample) -> list[str]:
    """Invariant violations as data; empty list means the sample is valid."""
    violations: list[str] = []
    if sample.image is None and sample.audio is None:
        violations.append("at least one modality required")
    if sample.image is not None and sample.image.kind != Modality.IMAGE:
        violations.append("image: reference kind must be image")
    if sample.audio is not None and sample.audio.kind != Modality.AUDIO:
        violations.append("audio: reference kind must be audio")
    if not sample.response:
        violations.append("response non-empty")
    return violations


@dataclass(frozen=True)
class ChatTurn:
    """One conversation turn; only human turns may carry attachments."""

    role: Role
    text: str
    attachments: tuple[MediaRef, ...] = ()

    def __post_init__(self) -> None:
        if self.role is Role.ASSISTANT and self.attachments:
            raise ValueError("assistant turns carry no attachments")

    def to_dict(self) -> dict[str, Any]:
        return {
            "role": self.role.value,
            "text": self.text,
            "attachments": [a.to_dict() for a in self.attachments],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ChatTurn":
        return cls(
            role=Role(d["role"]),
            text=d["text"],
            attachments=tuple(MediaRef.from_dict(a) for a in d.get("attachments", [])),
        )


def encode_json(obj: Any) -> str:
    """Canonical JSON for any type in this module (sorted keys, no spaces)."""
    return json.dumps(obj.to_dict(), sort_keys=True, separators=(",", ":"))


def decode_json(cls: type, text: str) -> Any:
    return cls.from_dict(json.loads(text))


def ordered_attachment_refs(refs: Sequence[MediaRef]) -> list[MediaRef]:
    """Stable vision-then-audio ordering used everywhere a turn is rendered."""
    images = [r for r in refs if r.kind is Modality.IMAGE]
    audios = [r for r in refs if r.kind is Modality.AUDIO]
    return images + audios
