"""Modality stacks: frozen encoder + Q-Former head + linear projection.

The Q-Former compresses a variable-length feature sequence into exactly Q
query vectors; the projection maps those into the decoder's embedding space.
Which pieces are trainable is decided per training stage, not here: all
parameters are created trainable except the frozen encoders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import nn

from ..errors import InputError
from ..types import Modality, ModalityInput
from .tokenizer import WordTokenizer
from .toy import DTYPE, ToyAudioEncoder, ToyImageEncoder, ToyLLM, _randn


@dataclass(frozen=True)
class ModelConfig:
    n_queries: int = 8
    d_q: int = 64
    d_enc: int = 64
    d_llm: int = 128
    n_layers: int = 2
    max_context: int = 256
    image_resolution: int = 16
    audio_mels: int = 16
    audio_frames: int = 16
    seed: int = 0

    def __post_init__(self):
        for name in ("n_queries", "d_q", "d_enc", "d_llm", "n_layers", "max_context"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)


class QFormerHead(nn.Module):
    """Learned queries cross-attending over encoder features.

    Output is exactly (n_queries, d_q) regardless of input length.  The
    residual on the queries keeps initial outputs distinct per query.
    """

    def __init__(self, d_enc: int, d_q: int, n_queries: int, seed: int = 0):
        super().__init__()
        self.n_queries = n_queries
        self.d_q = d_q
        self.queries = nn.Parameter(_randn((n_queries, d_q), seed, scale=0.5))
        self.wk = nn.Parameter(_randn((d_enc, d_q), seed + 1, scale=1.0 / math.sqrt(d_enc)))
        self.wv = nn.Parameter(_randn((d_enc, d_q), seed + 2, scale=1.0 / math.sqrt(d_enc)))
        self.wo = nn.Parameter(_randn((d_q, d_q), seed + 3, scale=1.0 / math.sqrt(d_q)))

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        k = features @ self.wk
        v = features @ self.wv
        attn = torch.softmax(self.queries @ k.T / math.sqrt(self.d_q), dim=-1)
        return self.queries + attn @ v @ self.wo


class ProjectionHead(nn.Module):
    """Affine map d_q -> d_llm into the decoder embedding space."""

    def __init__(self, d_q: int, d_llm: int, seed: int = 0):
        super().__init__()
        self.weight = nn.Parameter(_randn((d_q, d_llm), seed, scale=1.0 / math.sqrt(d_q)))
        self.bias = nn.Parameter(torch.zeros(d_llm, dtype=DTYPE))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x @ self.weight + self.bias


@dataclass
class ModalityStack:
    kind: Modality
    encoder: nn.Module
    qformer: QFormerHead
    projection: ProjectionHead


def encode_modality(inp: ModalityInput, stack: ModalityStack) -> torch.Tensor:
    """Run one input through its stack; returns a (Q, d_llm) block."""
    if inp.kind is not stack.kind:
        raise InputError(
            f"{stack.kind.value} stack got {inp.kind.value} input"
        )
    block = stack.projection(stack.qformer(stack.encoder.features(inp)))
    if not torch.isfinite(block).all():
        raise InputError("modality block contains non-finite values")
    return block


@dataclass
class MultimodalModel:
    """The full toy assembly: one stack per modality plus the frozen decoder."""

    vision: ModalityStack
    audio: ModalityStack
    llm: ToyLLM
    config: ModelConfig

    def stack_for(self, kind: Modality) -> ModalityStack:
        if kind is Modality.IMAGE:
            return self.vision
        if kind is Modality.AUDIO:
            return self.audio
        raise InputError(f"no stack for modality {kind.value}")

    def parameter_groups(self) -> dict[str, nn.Module]:
        return {
            "vision_encoder": self.vision.encoder,
            "vision_qformer": self.vision.qformer,
            "vision_projection": self.vision.projection,
            "audio_encoder": self.audio.encoder,
            "audio_qformer": self.audio.qformer,
            "audio_projection": self.audio.projection,
            "llm": self.llm,
        }


def build_toy_model(tokenizer: WordTokenizer, config: ModelConfig = ModelConfig()) -> MultimodalModel:
    base = config.seed
    vision = ModalityStack(
        kind=Modality.IMAGE,
        encoder=ToyImageEncoder(config.d_enc, config.image_resolution, seed=base + 11),
        qformer=QFormerHead(config.d_enc, config.d_q, config.n_queries, seed=base + 23),
        projection=ProjectionHead(config.d_q, config.d_llm, seed=base + 37),
    )
    audio = ModalityStack(
        kind=Modality.AUDIO,
        encoder=ToyAudioEncoder(
            config.d_enc, config.audio_mels, config.audio_frames, seed=base + 41
        ),
        qformer=QFormerHead(config.d_enc, config.d_q, config.n_queries, seed=base + 53),
        projection=ProjectionHead(config.d_q, config.d_llm, seed=base + 67),
    )
    llm = ToyLLM(
        tokenizer,
        d_model=config.d_llm,
        n_layers=config.n_layers,
        max_context=config.max_context,
        seed=base + 71,
    )
    return MultimodalModel(vision=vision, audio=audio, llm=llm, config=config)
