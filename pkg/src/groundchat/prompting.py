"""Chat-prompt assembly, entity-matching prompt, and loss-mask boundary.

The chat template is fixed and golden-tested byte-for-byte:

    ###Human: <Vision><ModalityHere></Vision> <Audio><ModalityHere></Audio> <instruction> ###Assistant:

with the vision / audio blocks present only when the corresponding modality
is supplied, always vision before audio, single spaces between parts.
Multi-turn histories concatenate turns with single spaces, each human turn
prefixed ``###Human: `` and each assistant turn ``###Assistant: ``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

from .errors import PromptError
from .types import ChatTurn, Modality, Role, ordered_attachment_refs

HUMAN_PREFIX = "###Human: "
ASSISTANT_MARKER = "###Assistant:"
VISION_BLOCK = "<Vision><ModalityHere></Vision>"
AUDIO_BLOCK = "<Audio><ModalityHere></Audio>"

BLOCK_BY_MODALITY = {Modality.IMAGE: VISION_BLOCK, Modality.AUDIO: AUDIO_BLOCK}

# Fixed system instruction for the entity-matching LLM.  The reply wire
# format is one "entity -> exact substring" line per match; bump the version
# when changing either side of that contract.
MATCHER_INSTRUCTION_VERSION = 1
MATCHER_INSTRUCTION = (
    "You are an entity-matching assistant. You receive a list of visual entities "
    "between <List> and </List>, and a text between <Text> and </Text>. For every "
    "entity from the list that the text mentions, output exactly one line of the form\n"
    "entity -> substring\n"
    "where substring is copied verbatim from the text. Output no other lines. "
    "If no entity from the list is mentioned in the text, output nothing."
)


@dataclass(frozen=True)
class TextSegment:
    text: str


@dataclass(frozen=True)
class ModalitySlot:
    kind: Modality
    slot_id: str


Segment = Union[TextSegment, ModalitySlot]


@dataclass(frozen=True)
class PromptAssembly:
    """Ordered prompt segments: literal text and modality-embedding slots."""

    segments: tuple[Segment, ...]

    def render(self) -> str:
        parts = []
        for seg in self.segments:
            if isinstance(seg, TextSegment):
                parts.append(seg.text)
            else:
                parts.append(BLOCK_BY_MODALITY[seg.kind])
        return "".join(parts)

    @property
    def slots(self) -> tuple[ModalitySlot, ...]:
        return tuple(s for s in self.segments if isinstance(s, ModalitySlot))

    @property
    def text_segments(self) -> tuple[TextSegment, ...]:
        return tuple(s for s in self.segments if isinstance(s, TextSegment))


def build_chat_prompt(
    turns: Sequence[ChatTurn],
    current_instruction: str,
    has_image: bool,
    has_audio: bool,
    allow_pure_text: bool = False,
) -> PromptAssembly:
    """Assemble the chat prompt for the current human instruction.

    ``turns`` is prior history in order; attachments on history turns render
    as modality slots within their turn (vision before audio).  Raises
    PromptError on an empty instruction, and on a fully-textual chat unless
    ``allow_pure_text`` is set.
    """
    if not current_instruction:
        raise PromptError("instruction must be non-empty")
    history_has_media = any(turn.attachments for turn in turns)
    if not (has_image or has_audio or history_has_media or allow_pure_text):
        raise PromptError("pure-text chat is disabled; supply an image or audio")

    counters = {Modality.IMAGE: 0, Modality.AUDIO: 0}

    def new_slot(kind: Modality) -> ModalitySlot:
        slot = ModalitySlot(kind, f"{kind.value}_{counters[kind]}")
        counters[kind] += 1
        return slot

    turn_segment_lists: list[list[Segment]] = []
    for turn in turns:
        segs: list[Segment] = []
        if turn.role is Role.HUMAN:
            segs.append(TextSegment(HUMAN_PREFIX))
            for ref in ordered_attachment_refs(turn.attachments):
                segs.append(new_slot(ref.kind))
                segs.append(TextSegment(" "))
            segs.append(TextSegment(turn.text))
        else:
            segs.append(TextSegment(ASSISTANT_MARKER + " " + turn.text))
        turn_segment_lists.append(segs)

    current: list[Segment] = [TextSegment(HUMAN_PREFIX)]
    if has_image:
        current.append(new_slot(Modality.IMAGE))
        current.append(TextSegment(" "))
    if has_audio:
        current.append(new_slot(Modality.AUDIO))
        current.append(TextSegment(" "))
    current.append(TextSegment(current_instruction + " " + ASSISTANT_MARKER))
    turn_segment_lists.append(current)

    merged: list[Segment] = []
    for i, segs in enumerate(turn_segment_lists):
        if i:
            merged.append(TextSegment(" "))
        merged.extend(segs)
    return PromptAssembly(tuple(_coalesce_text(merged)))


def _coalesce_text(segments: Sequence[Segment]) -> list[Segment]:
    out: list[Segment] = []
    for seg in segments:
        if (
            isinstance(seg, TextSegment)
            and out
            and isinstance(out[-1], TextSegment)
        ):
            out[-1] = TextSegment(out[-1].text + seg.text)
        else:
            out.append(seg)
    return out


def matching_payload(entity_labels: Sequence[str], response_text: str) -> str:
    """The matcher payload: ``<List>e1, e2</List>,<Text>text</Text>``."""
    return (
        "<List>" + ", ".join(entity_labels) + "</List>,<Text>" + response_text + "</Text>"
    )


def build_matching_prompt(entity_labels: Sequence[str], response_text: str) -> str:
    """Full entity-matching prompt: fixed system instruction plus payload."""
    if not response_text:
        raise PromptError("response text must be non-empty")
    return MATCHER_INSTRUCTION + "\n" + matching_payload(entity_labels, response_text)


def response_loss_boundary(tokens: Sequence[object], marker: str = ASSISTANT_MARKER) -> int:
    """Index of the first token strictly after the final ``marker`` token.

    Training loss applies to positions >= the returned index.  Non-text
    entries (modality blocks) may appear in ``tokens``; they never match.
    """
    boundary = None
    for i, tok in enumerate(tokens):
        if tok == marker:
            boundary = i + 1
    if boundary is None:
        raise PromptError(f"malformed training string: marker {marker!r} absent")
    return boundary
