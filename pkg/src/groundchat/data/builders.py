"""Builders for the three instruction datasets.

Three recipes, all deterministic under a fixed seed:

- caption assembly: five short audio captions go to a text LLM that merges
  them into one descriptive paragraph, structurally checked and retried once;
- sound-source wrapping: (audio, image, class label) triples become
  localization samples with the label inlined into a sentence template;
- negative pairing: unrelated audio and image captions are stitched into a
  two-sentence reply that describes each medium independently.
"""

from __future__ import annotations

import logging
import random
import re
from dataclasses import dataclass
from typing import Sequence

from ..errors import ConfigError, InputError
from ..types import InstructionSample, MediaFormat, MediaRef, Modality
from .constants import CAPTIONS_PER_AUDIO

log = logging.getLogger(__name__)

# Instruction families matching the prompt-examples table.
LOCALIZATION_INSTRUCTIONS = (
    "Please find the source that emits the given sound in this image.",
)
RELATEDNESS_INSTRUCTIONS = (
    "Are the audio and image related to each other? What are they?",
)
AUDIO_DESCRIPTION_INSTRUCTION = "Pay attention to the audio and describe what you notice."

# Sentence templates for wrapping a class label; configurable, any list works
# as long as every entry carries the {label} placeholder.
SOUND_TEMPLATES = (
    "The sound of {label} can be heard in this scene.",
    "This audio clip captures {label}.",
    "Listen closely: the sound comes from {label}.",
    "The recording contains the sound of {label}.",
)

MIN_DESCRIPTION_WORDS = 25
MIN_CAPTION_COVERAGE = 2
MAX_NEGATIVE_RETRIES = 50

ASSEMBLY_PROMPT = (
    "Five annotators each wrote one short caption for the same audio clip. "
    "Combine them into a single descriptive paragraph of at least "
    f"{MIN_DESCRIPTION_WORDS} words that covers the scenes they describe.\n\n"
    "{examples}Captions: {captions}\nDescription:"
)


@dataclass(frozen=True)
class CaptionBundle:
    """One audio clip with its five independently written captions."""

    audio: MediaRef
    captions: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.captions) != CAPTIONS_PER_AUDIO:
            raise ValueError(
                f"expected {CAPTIONS_PER_AUDIO} captions, got {len(self.captions)}"
            )
        if any(not c.strip() for c in self.captions):
            raise ValueError("captions must be non-empty")
        if self.audio.kind is not Modality.AUDIO:
            raise ValueError("bundle reference must be audio")


@dataclass(frozen=True)
class DescriptionRecord:
    """Assembly output for one bundle; flagged records failed both attempts."""

    audio: MediaRef
    description: str
    flagged: bool
    attempts: int
    coverage: int


# -- keyword-overlap structural check -----------------------------------------

_STOPWORDS = frozenset(
    """a an the and or but if is are was were be being been am it its this that
    these those there here he she they them his her their someone something
    anyone else very over under again then than as at by for from in into of
    on to with while who whom what which some any all each might may can could
    would should will shall not no nor out up down off too also just like
    about after before between during through other another more most one two""".split()
)


def _stem(word: str) -> str:
    # crude suffix stripper; only needs to unify inflections, not be correct
    for suffix in ("ing", "ied", "ies", "ed", "es", "s"):
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            word = word[: -len(suffix)]
            break
    if len(word) >= 4 and word[-1] == word[-2]:
        word = word[:-1]
    return word


def _keywords(text: str) -> set[str]:
    words = re.findall(r"[a-z]+", text.lower())
    return {_stem(w) for w in words if w not in _STOPWORDS and len(w) >= 3}


def caption_coverage(description: str, captions: Sequence[str]) -> int:
    """How many captions share at least one content keyword with the text."""
    described = _keywords(description)
    return sum(1 for c in captions if _keywords(c) & described)


def description_violations(description: str, captions: Sequence[str]) -> list[str]:
    """Structural checks for an assembled description; empty list means pass."""
    out: list[str] = []
    text = description.strip()
    if not text:
        return ["description is empty"]
    if "\n" in text:
        out.append("description must be a single paragraph")
    words = len(text.split())
    if words < MIN_DESCRIPTION_WORDS:
        out.append(f"description has {words} words, need >= {MIN_DESCRIPTION_WORDS}")
    coverage = caption_coverage(text, captions)
    if coverage < MIN_CAPTION_COVERAGE:
        out.append(
            f"description covers {coverage} captions, need >= {MIN_CAPTION_COVERAGE}"
        )
    return out


def _caption_list(captions: Sequence[str]) -> str:
    return "; ".join(f'"{c}"' for c in captions)


def build_clotho_detail(
    bundles: Sequence[CaptionBundle],
    llm,
    few_shot: Sequence[tuple[Sequence[str], str]] = (),
    template: str = ASSEMBLY_PROMPT,
) -> list[DescriptionRecord]:
    """Assemble one long description per bundle via the text LLM.

    A description that fails the structural checks is regenerated once; a
    second failure (or an adapter exception) flags the record and the build
    moves on.  Output order follows input order.
    """
    if "{captions}" not in template:
        raise ConfigError("assembly template needs a {captions} placeholder")
    if few_shot and "{examples}" not in template:
        raise ConfigError("few-shot examples given but template has no {examples}")
    examples = "".join(
        f"Captions: {_caption_list(caps)}\nDescription: {desc}\n\n"
        for caps, desc in few_shot
    )

    records: list[DescriptionRecord] = []
    for bundle in bundles:
        prompt = template.replace("{examples}", examples).replace(
            "{captions}", _caption_list(bundle.captions)
        )
        description = ""
        attempts = 0
        flagged = True
        for _ in range(2):
            attempts += 1
            try:
                description = llm.complete(prompt).strip()
            except Exception as exc:
                log.warning("assembly LLM failed for %s: %s", bundle.audio.uri, exc)
                continue
            if not description_violations(description, bundle.captions):
                flagged = False
                break
        coverage = caption_coverage(description, bundle.captions)
        if flagged:
            log.warning(
                "flagged bundle %s after %d attempts (coverage %d)",
                bundle.audio.uri, attempts, coverage,
            )
        else:
            log.debug(
                "bundle %s covers %d/%d captions",
                bundle.audio.uri, coverage, len(bundle.captions),
            )
        records.append(
            DescriptionRecord(bundle.audio, description, flagged, attempts, coverage)
        )
    return records


def description_samples(
    records: Sequence[DescriptionRecord],
    instruction: str = AUDIO_DESCRIPTION_INSTRUCTION,
) -> list[InstructionSample]:
    """Unflagged assembly records as audio-text instruction samples."""
    return [
        InstructionSample(
            image=None, audio=r.audio, instruction=instruction,
            response=r.description, related=True,
        )
        for r in records
        if not r.flagged
    ]


# -- sound-source localization samples -----------------------------------------

_FORMAT_BY_SUFFIX = {
    "png": MediaFormat.PNG,
    "jpg": MediaFormat.JPEG,
    "jpeg": MediaFormat.JPEG,
    "wav": MediaFormat.WAV,
    "flac": MediaFormat.FLAC,
    "mp3": MediaFormat.MP3,
}


def as_media_ref(value: MediaRef | str, kind: Modality) -> MediaRef:
    if isinstance(value, MediaRef):
        if value.kind is not kind:
            raise InputError(f"expected a {kind.value} reference, got {value.kind.value}")
        return value
    suffix = value.rsplit(".", 1)[-1].lower()
    fmt = _FORMAT_BY_SUFFIX.get(suffix)
    if fmt is None:
        raise InputError(f"cannot infer media format of {value!r}")
    return MediaRef(kind=kind, format=fmt, uri=value)


def build_vggss_instructions(
    pairs: Sequence[tuple[MediaRef | str, MediaRef | str, str]],
    templates: Sequence[str] = SOUND_TEMPLATES,
    seed: int = 0,
) -> list[InstructionSample]:
    """One localization sample per (audio, image, class label) triple.

    Templates rotate round-robin from a seeded starting offset, so a fixed
    seed reproduces the exact sample list.
    """
    if not templates:
        raise ConfigError("need at least one sentence template")
    for t in templates:
        if "{label}" not in t:
            raise ConfigError(f"template missing {{label}} placeholder: {t!r}")
    rng = random.Random(seed)
    offset = rng.randrange(len(templates))
    samples: list[InstructionSample] = []
    for i, (audio, image, label) in enumerate(pairs):
        if not label.strip():
            raise InputError(f"pair {i}: empty class label")
        template = templates[(offset + i) % len(templates)]
        samples.append(
            InstructionSample(
                image=as_media_ref(image, Modality.IMAGE),
                audio=as_media_ref(audio, Modality.AUDIO),
                instruction=rng.choice(LOCALIZATION_INSTRUCTIONS),
                response=template.format(label=label),
                related=True,
            )
        )
    return samples


# -- negative audio-image pairs --------------------------------------------------


@dataclass(frozen=True)
class CaptionedMedia:
    """Pool item for negative pairing; source_id links items with a shared origin."""

    ref: MediaRef
    caption: str
    source_id: str | None = None

    def __post_init__(self) -> None:
        if not self.caption.strip():
            raise ValueError("caption must be non-empty")


def pool_from_samples(
    samples: Sequence[InstructionSample], kind: Modality
) -> list[CaptionedMedia]:
    """Reuse a single-modality dataset's responses as a pairing pool."""
    pool = []
    for s in samples:
        ref = s.image if kind is Modality.IMAGE else s.audio
        if ref is not None and s.response.strip():
            pool.append(CaptionedMedia(ref=ref, caption=s.response))
    return pool


def _normalized(caption: str, marker: str, prefix: str) -> str:
    """One sentence starting with ``marker``, built from a free-form caption."""
    text = " ".join(caption.split()).rstrip(".!?")
    if not text:
        raise InputError("caption is empty after normalization")
    if text.lower().startswith(marker.lower()):
        text = marker + text[len(marker):]
    else:
        if text.split(" ", 1)[0] != "I":
            text = text[0].lower() + text[1:]
        text = f"{prefix} {text}"
    return text + "."


def negative_response(image_caption: str, audio_caption: str) -> str:
    """Two independent sentences: image description, then audio description."""
    return (
        _normalized(image_caption, "The image", "The image shows")
        + " "
        + _normalized(audio_caption, "The audio", "The audio is")
    )


def negative_response_violations(text: str) -> list[str]:
    """Shape checks for a negative-pair reply; empty list means pass."""
    out: list[str] = []
    if not text.startswith("The image"):
        out.append('must start with "The image"')
    count = text.count("The audio")
    if count != 1:
        out.append(f'needs exactly one "The audio", found {count}')
    else:
        idx = text.find("The audio")
        if text[max(0, idx - 2):idx] != ". ":
            out.append('"The audio" must start a new sentence')
    return out


def build_negative_pairs(
    audio_pool: Sequence[CaptionedMedia],
    image_pool: Sequence[CaptionedMedia],
    count: int,
    seed: int,
) -> list[InstructionSample]:
    """Sample ``count`` unrelated audio-image pairs with stitched replies.

    Each draw picks uniformly from both pools and is rejected when the items
    share a source ID or the stitched reply fails the shape checks; a sample
    that cannot be drawn within MAX_NEGATIVE_RETRIES raises InputError.
    """
    if count < 1:
        raise InputError(f"count must be >= 1, got {count}")
    if not audio_pool or not image_pool:
        raise InputError("both pools must be non-empty")
    for item in audio_pool:
        if item.ref.kind is not Modality.AUDIO:
            raise InputError("audio pool holds a non-audio reference")
    for item in image_pool:
        if item.ref.kind is not Modality.IMAGE:
            raise InputError("image pool holds a non-image reference")

    rng = random.Random(seed)
    samples: list[InstructionSample] = []
    for _ in range(count):
        for _ in range(MAX_NEGATIVE_RETRIES):
            audio = rng.choice(audio_pool)
            image = rng.choice(image_pool)
            if (
                audio.source_id is not None
                and audio.source_id == image.source_id
            ):
                continue
            response = negative_response(image.caption, audio.caption)
            if negative_response_violations(response):
                continue
            samples.append(
                InstructionSample(
                    image=image.ref,
                    audio=audio.ref,
                    instruction=rng.choice(RELATEDNESS_INSTRUCTIONS),
                    response=response,
                    related=False,
                )
            )
            break
        else:
            raise InputError(
                f"negative pairing exhausted {MAX_NEGATIVE_RETRIES} retries; "
                "pools too small or too entangled"
            )
    return samples
