"""Adapter interfaces for the grounding pipeline stages.

Real checkpoints (an image tagger, an open-set detector, a promptable
segmenter, a matching LLM) plug in behind these protocols; the deterministic
mocks in ``mocks.py`` implement the same contracts for tests and demos.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

from ..types import BoundingBox, ModalityInput, SegmentMask, Tag


@dataclass(frozen=True)
class Detection:
    """One detector hit before mask refinement."""

    label: str
    box: BoundingBox
    score: float


@runtime_checkable
class TaggerAdapter(Protocol):
    name: str

    def tag(self, image: ModalityInput) -> Sequence[Tag]: ...


@runtime_checkable
class DetectorAdapter(Protocol):
    name: str

    def detect(self, image: ModalityInput, query: str) -> Sequence[Detection]: ...


@runtime_checkable
class SegmenterAdapter(Protocol):
    name: str

    def segment(
        self, image: ModalityInput, boxes: Sequence[BoundingBox]
    ) -> Sequence[SegmentMask]: ...


@runtime_checkable
class TextLLMAdapter(Protocol):
    """Prompt-in, text-out LLM slot (entity matcher, dataset builders)."""

    name: str

    def complete(self, prompt: str) -> str: ...


@dataclass
class AdapterSet:
    tagger: TaggerAdapter
    detector: DetectorAdapter
    segmenter: SegmenterAdapter
    matcher: TextLLMAdapter
