"""Deterministic mock adapters keyed by media digests.

Every mock is a pure function of (input, config); fixture tables are built
alongside the fixture images so tests can author expected outputs directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .. import media
from ..prompting import MATCHER_INSTRUCTION
from ..types import BoundingBox, ModalityInput, SegmentMask, Tag
from .adapters import Detection


@dataclass
class FixtureTagger:
    """Returns the tags listed for the image digest; unknown digests tag nothing."""

    table: dict[str, list[Tag]]
    name: str = "fixture-tagger"

    def tag(self, image: ModalityInput) -> list[Tag]:
        return list(self.table.get(image.digest, []))


@dataclass
class FixtureDetector:
    """Returns table detections whose label occurs in the comma-joined query."""

    table: dict[str, list[Detection]]
    name: str = "fixture-detector"

    def detect(self, image: ModalityInput, query: str) -> list[Detection]:
        wanted = set(query.split(","))
        return [d for d in self.table.get(image.digest, []) if d.label in wanted]


def _box_pixel_range(lo: float, hi: float, limit: int) -> tuple[int, int]:
    start = max(0, int(np.ceil(lo)))
    stop = min(limit, int(np.ceil(hi)))
    return start, stop


@dataclass
class BoxFillSegmenter:
    """Mask = every pixel inside the box."""

    name: str = "boxfill-segmenter"
    pad: float = 0.0  # >0 leaks outside the box, for clipping tests

    def segment(
        self, image: ModalityInput, boxes: Sequence[BoundingBox]
    ) -> list[SegmentMask]:
        width, height = media.image_size(image)
        masks = []
        for box in boxes:
            grid = np.zeros((height, width), dtype=np.uint8)
            x0, x1 = _box_pixel_range(box.x_min - self.pad, box.x_max + self.pad, width)
            y0, y1 = _box_pixel_range(box.y_min - self.pad, box.y_max + self.pad, height)
            grid[y0:y1, x0:x1] = 1
            masks.append(SegmentMask.from_bitmap(width, height, grid.tobytes()))
        return masks


@dataclass
class EllipseSegmenter:
    """Mask = ellipse inscribed in the box, rasterized at pixel centers."""

    name: str = "ellipse-segmenter"

    def segment(
        self, image: ModalityInput, boxes: Sequence[BoundingBox]
    ) -> list[SegmentMask]:
        width, height = media.image_size(image)
        ys, xs = np.mgrid[0:height, 0:width]
        masks = []
        for box in boxes:
            cx = (box.x_min + box.x_max) / 2.0
            cy = (box.y_min + box.y_max) / 2.0
            a = max(box.width / 2.0, 1e-9)
            b = max(box.height / 2.0, 1e-9)
            inside = ((xs + 0.5 - cx) / a) ** 2 + ((ys + 0.5 - cy) / b) ** 2 <= 1.0
            masks.append(
                SegmentMask.from_bitmap(width, height, inside.astype(np.uint8).tobytes())
            )
        return masks


@dataclass
class ExactSubstringMatcher:
    """Replies with one ``label -> label`` line per listed entity found verbatim."""

    name: str = "substring-matcher"

    def complete(self, prompt: str) -> str:
        labels, text = parse_matching_prompt(prompt)
        lines = [f"{label} -> {label}" for label in labels if label and label in text]
        return "\n".join(lines)


def parse_matching_prompt(prompt: str) -> tuple[list[str], str]:
    # The instruction preamble mentions the <List>/<Text> markers, so parse
    # only the payload that follows it.
    prefix = MATCHER_INSTRUCTION + "\n"
    payload = prompt[len(prefix):] if prompt.startswith(prefix) else prompt
    list_start = payload.index("<List>") + len("<List>")
    list_end = payload.index("</List>", list_start)
    text_start = payload.index("<Text>", list_end) + len("<Text>")
    text_end = payload.rindex("</Text>")
    raw = payload[list_start:list_end]
    labels = [part for part in raw.split(", ") if part] if raw else []
    return labels, payload[text_start:text_end]


@dataclass
class CannedTextLLM:
    """Fixed or computed completion, independent of any model."""

    reply: str | Callable[[str], str]
    name: str = "canned-llm"

    def complete(self, prompt: str) -> str:
        if callable(self.reply):
            return self.reply(prompt)
        return self.reply


@dataclass
class ScriptedTextLLM:
    """Replies consumed in order; raises once the script runs out."""

    replies: Sequence[str]
    name: str = "scripted-llm"
    calls: int = 0

    def complete(self, prompt: str) -> str:
        if self.calls >= len(self.replies):
            raise RuntimeError("reply script exhausted")
        reply = self.replies[self.calls]
        self.calls += 1
        return reply


@dataclass
class FailingAdapter:
    """Stands in for any stage whose backend is down."""

    name: str = "failing-adapter"
    message: str = "adapter down"

    def tag(self, image):
        raise RuntimeError(self.message)

    def detect(self, image, query):
        raise RuntimeError(self.message)

    def segment(self, image, boxes):
        raise RuntimeError(self.message)

    def complete(self, prompt):
        raise RuntimeError(self.message)
