"""Reply backends for the chat service.

A backend turns one human turn (plus session history and media) into reply
text.  The canned backend answers from a fixture table for tests and demos;
the model backend drives a trained multimodal stack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence, runtime_checkable

from ..model import (
    GenerationConfig,
    MultimodalModel,
    encode_modality,
    generate,
    load_checkpoint,
    splice_embeddings,
)
from ..prompting import build_chat_prompt
from ..types import ChatTurn, Modality, ModalityInput, ordered_attachment_refs


@dataclass(frozen=True)
class TurnContext:
    """Everything a backend may need to answer the current human turn."""

    turns: Sequence[ChatTurn]  # prior history, alternating roles
    instruction: str
    media: Mapping[str, ModalityInput]  # digest -> payload, incl. new uploads
    new_image: ModalityInput | None
    new_audio: ModalityInput | None
    scope_image: ModalityInput | None  # most recent image in the session
    scope_audio: ModalityInput | None


@runtime_checkable
class ChatBackend(Protocol):
    name: str

    def reply(self, ctx: TurnContext) -> str: ...


DEFAULT_FALLBACK = "I am not sure what to say about that."


@dataclass
class CannedChatBackend:
    """Replies keyed by (scope image digest, scope audio digest, instruction)."""

    table: Mapping[tuple[str | None, str | None, str], str]
    fallback: str = DEFAULT_FALLBACK
    name: str = "canned"

    def reply(self, ctx: TurnContext) -> str:
        key = (
            ctx.scope_image.digest if ctx.scope_image else None,
            ctx.scope_audio.digest if ctx.scope_audio else None,
            ctx.instruction,
        )
        return self.table.get(key, self.fallback)


@dataclass
class FailingChatBackend:
    """Stands in for a generation backend that is down."""

    name: str = "failing"
    message: str = "generation backend down"

    def reply(self, ctx: TurnContext) -> str:
        raise RuntimeError(self.message)


@dataclass
class ModelChatBackend:
    """Greedy decoding through a trained multimodal stack.

    History attachments are re-encoded per request from the session media
    map, in the same order the prompt assembly creates modality slots.
    """

    model: MultimodalModel
    gen: GenerationConfig = field(default_factory=lambda: GenerationConfig(max_new_tokens=40))
    name: str = "model"

    def reply(self, ctx: TurnContext) -> str:
        assembly = build_chat_prompt(
            ctx.turns,
            ctx.instruction,
            ctx.new_image is not None,
            ctx.new_audio is not None,
        )
        queues: dict[Modality, list[ModalityInput]] = {
            Modality.IMAGE: [],
            Modality.AUDIO: [],
        }
        for turn in ctx.turns:
            for ref in ordered_attachment_refs(turn.attachments):
                item = ctx.media.get(ref.digest or "")
                if item is None:
                    raise RuntimeError(f"attachment payload missing: {ref.digest}")
                queues[ref.kind].append(item)
        if ctx.new_image is not None:
            queues[Modality.IMAGE].append(ctx.new_image)
        if ctx.new_audio is not None:
            queues[Modality.AUDIO].append(ctx.new_audio)

        cursors = {kind: iter(items) for kind, items in queues.items()}
        blocks = {
            slot.slot_id: encode_modality(
                next(cursors[slot.kind]), self.model.stack_for(slot.kind)
            )
            for slot in assembly.slots
        }
        seq = splice_embeddings(assembly, blocks, self.model.llm)
        return generate(seq, self.model.llm, self.gen)


def backend_from_checkpoint(path, max_new_tokens: int = 40) -> ModelChatBackend:
    model = load_checkpoint(path)
    return ModelChatBackend(model, GenerationConfig(max_new_tokens=max_new_tokens))
