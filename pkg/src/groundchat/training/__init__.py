"""Two-stage training: freeze plans, pinned optimizer, response-only loss."""

from .loop import (
    OVERFIT_CONFIG,
    TrainConfig,
    TrainingSample,
    TrainResult,
    caption_sequence,
    corpus_texts,
    greedy_response,
    instruction_sequence,
    reproduces_exactly,
    sequence_loss,
    stage1_step,
    stage2_step,
    train,
)
from .optim import apply_plan, build_optimizer, param_group_hashes
from .plans import (
    ALWAYS_FROZEN,
    GROUP_NAMES,
    ParameterGroupPlan,
    Stage,
    plan_for_stage,
)

__all__ = [
    "ALWAYS_FROZEN",
    "GROUP_NAMES",
    "OVERFIT_CONFIG",
    "ParameterGroupPlan",
    "Stage",
    "TrainConfig",
    "TrainResult",
    "TrainingSample",
    "apply_plan",
    "build_optimizer",
    "caption_sequence",
    "corpus_texts",
    "greedy_response",
    "instruction_sequence",
    "param_group_hashes",
    "plan_for_stage",
    "reproduces_exactly",
    "sequence_loss",
    "stage1_step",
    "stage2_step",
    "train",
]
