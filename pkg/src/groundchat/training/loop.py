"""Two-stage training loop with freeze enforcement and response-only loss.

Stage 1 splices one modality block in front of its caption tokens, with no
prompt text at all.  Stage 2 renders the full chat template and computes
loss only on prediction positions at or past the response boundary (the
token right after ``###Assistant:``).  Batches accumulate per-sample
gradients into a single optimizer step.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import torch

from ..errors import InputError, PromptError
from ..model.splice import (
    GenerationConfig,
    generate,
    prediction_logits,
    splice_embeddings,
    target_token_ids,
)
from ..model.stack import MultimodalModel, encode_modality
from ..model.checkpoint import save_checkpoint
from ..prompting import build_chat_prompt, response_loss_boundary
from ..types import Modality, ModalityInput
from .optim import apply_plan, build_optimizer, param_group_hashes
from .plans import ParameterGroupPlan, Stage, plan_for_stage


@dataclass(frozen=True)
class TrainConfig:
    stage: Stage
    steps: int
    learning_rate: float = 0.2
    warmup_steps: int = 10
    decay_steps: int = 0
    batch_size: int = 0  # 0 = full batch every step
    seed: int = 1
    checkpoint_every: int = 0  # 0 = never
    train_vision_qformer_stage2: bool = False

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class TrainingSample:
    """A resolved instruction-tuning sample with raw media attached."""

    image: ModalityInput | None
    audio: ModalityInput | None
    instruction: str
    response: str

    def __post_init__(self):
        if self.image is None and self.audio is None:
            raise ValueError("at least one modality required")
        if not self.response:
            raise ValueError("response non-empty")


def corpus_texts(samples) -> list[str]:
    """Rendered prompts plus responses, for vocabulary building."""
    texts = []
    for s in samples:
        assembly = build_chat_prompt(
            [], s.instruction, s.image is not None, s.audio is not None
        )
        texts.append(assembly.render())
        texts.append(s.response)
    return texts


def sample_blocks(model: MultimodalModel, sample: TrainingSample, assembly) -> dict:
    blocks = {}
    for slot in assembly.slots:
        if slot.kind is Modality.IMAGE:
            blocks[slot.slot_id] = encode_modality(sample.image, model.vision)
        else:
            blocks[slot.slot_id] = encode_modality(sample.audio, model.audio)
    return blocks


def instruction_sequence(model: MultimodalModel, sample: TrainingSample):
    """Full teacher-forced sequence: prompt + response + eos.

    Returns (embeds, boundary, target ids): boundary is the position of the
    first response token; ids are response tokens plus eos.
    """
    assembly = build_chat_prompt(
        [], sample.instruction, sample.image is not None, sample.audio is not None
    )
    seq = splice_embeddings(assembly, sample_blocks(model, sample, assembly), model.llm)
    boundary = response_loss_boundary(seq.entries)
    ids = target_token_ids(sample.response, model.llm)
    embeds = torch.cat([seq.embeds, model.llm.embed_tokens(ids)], dim=0)
    return embeds, boundary, ids


def caption_sequence(model: MultimodalModel, medium: ModalityInput, caption: str):
    """Stage-1 sequence: modality block, then caption tokens; no prompt."""
    block = encode_modality(medium, model.stack_for(medium.kind))
    ids = target_token_ids(caption, model.llm)
    embeds = torch.cat([block, model.llm.embed_tokens(ids)], dim=0)
    return embeds, block.shape[0], ids


def sequence_loss(model: MultimodalModel, embeds: torch.Tensor, boundary: int, ids: list[int]):
    """Mean NLL over target positions; also returns the aligned logits.

    aligned[i] is the prediction for sequence position i+1, so positions
    before the boundary contribute nothing and their logit gradients are
    exactly zero.
    """
    aligned = prediction_logits(model.llm, embeds)
    rows = aligned[boundary - 1 : boundary - 1 + len(ids)]
    loss = torch.nn.functional.cross_entropy(rows, torch.tensor(ids))
    return loss, aligned


def stage1_step(batch, model, optimizer, scheduler) -> float:
    """One accumulated step over (medium, caption) pairs of one modality."""
    if not batch:
        raise InputError("empty batch")
    kinds = {medium.kind for medium, _ in batch}
    if len(kinds) > 1:
        raise InputError("stage-1 batch mixes modalities")
    optimizer.zero_grad()
    total = 0.0
    for medium, caption in batch:
        embeds, boundary, ids = caption_sequence(model, medium, caption)
        loss, _ = sequence_loss(model, embeds, boundary, ids)
        loss.backward()
        total += float(loss.detach())
    optimizer.step()
    scheduler.step()
    return total / len(batch)


def stage2_step(batch, model, optimizer, scheduler) -> tuple[float | None, int]:
    """One accumulated step over TrainingSamples; render failures are skipped."""
    if not batch:
        raise InputError("empty batch")
    optimizer.zero_grad()
    total = 0.0
    used = 0
    skipped = 0
    for sample in batch:
        try:
            embeds, boundary, ids = instruction_sequence(model, sample)
        except PromptError:
            skipped += 1
            continue
        loss, _ = sequence_loss(model, embeds, boundary, ids)
        loss.backward()
        total += float(loss.detach())
        used += 1
    if used == 0:
        return None, skipped
    optimizer.step()
    scheduler.step()
    return total / used, skipped


@dataclass
class TrainResult:
    losses: list[float] = field(default_factory=list)
    records: list[dict] = field(default_factory=list)
    skipped: int = 0

    @property
    def final_loss(self) -> float | None:
        return self.losses[-1] if self.losses else None


def train(
    model: MultimodalModel,
    config: TrainConfig,
    data,
    log_path: str | Path | None = None,
    checkpoint_dir: str | Path | None = None,
) -> TrainResult:
    """Run `config.steps` steps of the configured stage over `data`.

    Stage-1 data is (ModalityInput, caption) pairs; stage-2 data is
    TrainingSamples.  A line-delimited JSON record per step goes to
    log_path when given: step, stage, loss, lr, param-group hashes.
    """
    if not data:
        raise InputError("no training data")
    plan = plan_for_stage(config.stage, config.train_vision_qformer_stage2)
    params = apply_plan(model, plan)
    optimizer, scheduler = build_optimizer(
        params, config.learning_rate, config.warmup_steps, config.decay_steps
    )
    rng = random.Random(config.seed)
    result = TrainResult()
    log_file = open(log_path, "w") if log_path else None
    try:
        for step in range(config.steps):
            if config.batch_size > 0 and config.batch_size < len(data):
                batch = rng.sample(list(data), config.batch_size)
            else:
                batch = list(data)
            lr = scheduler.get_last_lr()[0]
            if config.stage is Stage.STAGE2:
                loss, skipped = stage2_step(batch, model, optimizer, scheduler)
                result.skipped += skipped
            else:
                loss = stage1_step(batch, model, optimizer, scheduler)
            if loss is not None:
                result.losses.append(loss)
            record = {
                "step": step,
                "stage": config.stage.value,
                "loss": loss,
                "lr": lr,
                "hashes": param_group_hashes(model),
            }
            result.records.append(record)
            if log_file:
                log_file.write(json.dumps(record, sort_keys=True) + "\n")
            if (
                checkpoint_dir
                and config.checkpoint_every > 0
                and (step + 1) % config.checkpoint_every == 0
            ):
                save_checkpoint(
                    Path(checkpoint_dir) / f"step{step + 1:06d}.ckpt",
                    model,
                    meta={"stage": config.stage.value, "step": step + 1},
                )
    finally:
        if log_file:
            log_file.close()
    return result


def greedy_response(model: MultimodalModel, sample: TrainingSample, max_new_tokens: int = 40) -> str:
    assembly = build_chat_prompt(
        [], sample.instruction, sample.image is not None, sample.audio is not None
    )
    seq = splice_embeddings(assembly, sample_blocks(model, sample, assembly), model.llm)
    return generate(seq, model.llm, GenerationConfig(max_new_tokens=max_new_tokens))


def reproduces_exactly(model: MultimodalModel, samples) -> list[bool]:
    return [greedy_response(model, s) == s.response for s in samples]


OVERFIT_CONFIG = TrainConfig(
    stage=Stage.STAGE2,
    steps=500,
    learning_rate=0.2,
    warmup_steps=10,
    decay_steps=400,
    seed=1,
)
