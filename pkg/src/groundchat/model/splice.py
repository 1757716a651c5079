"""Splicing modality blocks into token sequences, and greedy generation.

A rendered prompt alternates text segments and modality slots.  Text becomes
word embeddings via the decoder's lookup; each slot becomes the Q rows of
its modality block.  The resulting sequence length is therefore

    sum(text token counts) + sum(Q per slot)

`entries` records, per sequence position, the word at that position or None
for a modality row; loss code uses it to find the response boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..errors import InputError, PromptError
from ..prompting import ModalitySlot, PromptAssembly, TextSegment
from .tokenizer import words
from .toy import ToyLLM


@dataclass(frozen=True)
class SplicedSequence:
    embeds: torch.Tensor  # (T, d_llm)
    entries: tuple[str | None, ...]  # word per position, None for modality rows

    def __len__(self) -> int:
        return self.embeds.shape[0]


def splice_embeddings(
    prompt: PromptAssembly,
    blocks: dict[str, torch.Tensor],
    llm: ToyLLM,
) -> SplicedSequence:
    slot_ids = [slot.slot_id for slot in prompt.slots]
    missing = [sid for sid in slot_ids if sid not in blocks]
    if missing:
        raise InputError(f"no embedding block for slot {missing[0]!r}")
    extra = sorted(set(blocks) - set(slot_ids))
    if extra:
        raise InputError(f"block {extra[0]!r} matches no slot in the prompt")

    pieces: list[torch.Tensor] = []
    entries: list[str | None] = []
    for seg in prompt.segments:
        if isinstance(seg, TextSegment):
            toks = words(seg.text)
            if toks:
                ids = [llm.tokenizer.id_of(t) for t in toks]
                pieces.append(llm.embed_tokens(ids))
                entries.extend(toks)
        elif isinstance(seg, ModalitySlot):
            block = blocks[seg.slot_id]
            if block.ndim != 2 or block.shape[1] != llm.d_model:
                raise InputError(
                    f"block for slot {seg.slot_id!r} has shape {tuple(block.shape)}, "
                    f"expected (Q, {llm.d_model})"
                )
            pieces.append(block)
            entries.extend([None] * block.shape[0])
        else:
            raise PromptError(f"unknown prompt segment {seg!r}")
    if not pieces:
        raise PromptError("prompt produced an empty sequence")
    return SplicedSequence(torch.cat(pieces, dim=0), tuple(entries))


def append_tokens(seq: SplicedSequence, tokens: list[str], llm: ToyLLM) -> SplicedSequence:
    if not tokens:
        return seq
    ids = [llm.tokenizer.id_of(t) for t in tokens]
    return SplicedSequence(
        torch.cat([seq.embeds, llm.embed_tokens(ids)], dim=0),
        seq.entries + tuple(tokens),
    )


def prediction_logits(llm: ToyLLM, embeds: torch.Tensor) -> torch.Tensor:
    """Logits aligned to targets: row i predicts the token at position i+1."""
    return llm(embeds)[:-1]


@dataclass(frozen=True)
class GenerationConfig:
    max_new_tokens: int = 32
    temperature: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


def generate(seq: SplicedSequence, llm: ToyLLM, config: GenerationConfig = GenerationConfig()) -> str:
    """Decode until <eos> or the token budget; temperature 0 is greedy argmax."""
    total = len(seq) + config.max_new_tokens
    if total > llm.max_context:
        raise InputError(
            f"prompt length {len(seq)} + budget {config.max_new_tokens} "
            f"exceeds decoder context {llm.max_context}"
        )
    gen = torch.Generator().manual_seed(config.seed)
    embeds = seq.embeds
    out_ids: list[int] = []
    with torch.no_grad():
        for _ in range(config.max_new_tokens):
            logits = llm(embeds)[-1]
            if config.temperature == 0.0:
                next_id = int(torch.argmax(logits).item())
            else:
                probs = torch.softmax(logits / config.temperature, dim=-1)
                next_id = int(torch.multinomial(probs, 1, generator=gen).item())
            if next_id == llm.tokenizer.eos_id:
                break
            out_ids.append(next_id)
            embeds = torch.cat([embeds, llm.embed_tokens([next_id])], dim=0)
    return llm.tokenizer.decode(out_ids)


def target_token_ids(response: str, llm: ToyLLM) -> list[int]:
    return [llm.tokenizer.id_of(t) for t in words(response)] + [llm.tokenizer.eos_id]
