"""Per-stage parameter freeze plans.

The three stages and what they may train:

    stage1_vision  -> vision_projection only
    stage1_audio   -> audio_qformer + audio_projection
    stage2         -> vision_projection + audio_qformer + audio_projection
                      (vision_qformer stays frozen by default; override flag)

Encoders and the decoder LLM are frozen in every stage, with no override.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

GROUP_NAMES = (
    "vision_encoder",
    "vision_qformer",
    "vision_projection",
    "audio_encoder",
    "audio_qformer",
    "audio_projection",
    "llm",
)

ALWAYS_FROZEN = ("vision_encoder", "audio_encoder", "llm")


class Stage(enum.Enum):
    STAGE1_VISION = "stage1_vision"
    STAGE1_AUDIO = "stage1_audio"
    STAGE2 = "stage2"


@dataclass(frozen=True)
class ParameterGroupPlan:
    vision_encoder: bool = False
    vision_qformer: bool = False
    vision_projection: bool = False
    audio_encoder: bool = False
    audio_qformer: bool = False
    audio_projection: bool = False
    llm: bool = False

    def __post_init__(self):
        for name in ALWAYS_FROZEN:
            if getattr(self, name):
                raise ValueError(f"{name} can never be trainable")

    def trainable_groups(self) -> tuple[str, ...]:
        return tuple(n for n in GROUP_NAMES if getattr(self, n))

    def frozen_groups(self) -> tuple[str, ...]:
        return tuple(n for n in GROUP_NAMES if not getattr(self, n))


def plan_for_stage(stage: Stage, train_vision_qformer_stage2: bool = False) -> ParameterGroupPlan:
    if stage is Stage.STAGE1_VISION:
        return ParameterGroupPlan(vision_projection=True)
    if stage is Stage.STAGE1_AUDIO:
        return ParameterGroupPlan(audio_qformer=True, audio_projection=True)
    if stage is Stage.STAGE2:
        return ParameterGroupPlan(
            vision_qformer=train_vision_qformer_stage2,
            vision_projection=True,
            audio_qformer=True,
            audio_projection=True,
        )
    raise ValueError(f"unknown stage {stage!r}")
