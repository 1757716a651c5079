"""Toy multimodal stack: encoders, Q-Former heads, projections, decoder."""

from .checkpoint import load_checkpoint, read_header, save_checkpoint
from .splice import (
    GenerationConfig,
    SplicedSequence,
    append_tokens,
    generate,
    prediction_logits,
    splice_embeddings,
    target_token_ids,
)
from .stack import (
    ModalityStack,
    ModelConfig,
    MultimodalModel,
    ProjectionHead,
    QFormerHead,
    build_toy_model,
    encode_modality,
)
from .tokenizer import EOS, UNK, WordTokenizer, words
from .toy import ToyAudioEncoder, ToyImageEncoder, ToyLLM

__all__ = [
    "EOS",
    "UNK",
    "GenerationConfig",
    "ModalityStack",
    "ModelConfig",
    "MultimodalModel",
    "ProjectionHead",
    "QFormerHead",
    "SplicedSequence",
    "ToyAudioEncoder",
    "ToyImageEncoder",
    "ToyLLM",
    "WordTokenizer",
    "append_tokens",
    "build_toy_model",
    "encode_modality",
    "generate",
    "load_checkpoint",
    "prediction_logits",
    "read_header",
    "save_checkpoint",
    "splice_embeddings",
    "target_token_ids",
    "words",
]
