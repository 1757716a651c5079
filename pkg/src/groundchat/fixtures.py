"""Deterministic desk-scale fixture media and mock-adapter tables.

Everything here is generated procedurally (no binary assets in the repo) so
digests stay stable within an environment and tests can author expected
pipeline outputs next to the inputs that cause them.
"""

from __future__ import annotations

import io
import math
import struct
import wave

from PIL import Image, ImageDraw

from .grounding.adapters import AdapterSet, Detection
from .grounding.mocks import (
    BoxFillSegmenter,
    ExactSubstringMatcher,
    FixtureDetector,
    FixtureTagger,
)
from .types import BoundingBox, MediaFormat, Modality, ModalityInput, Tag

DOG_BOX = BoundingBox(12, 20, 44, 52)
FRISBEE_BOX = BoundingBox(60, 16, 84, 40)
DEMO_REPLY = "A dog catches a frisbee."
RELATED_QUESTION = "Are the audio and image related to each other? What are they?"
NEGATIVE_REPLY = (
    "The image shows a dog catching a frisbee on grass. The audio is a steady alarm tone."
)


def demo_image() -> ModalityInput:
    """96x64 scene: grass background, dog box, frisbee ellipse."""
    img = Image.new("RGB", (96, 64), (88, 160, 70))
    draw = ImageDraw.Draw(img)
    draw.rectangle((DOG_BOX.x_min, DOG_BOX.y_min, DOG_BOX.x_max - 1, DOG_BOX.y_max - 1),
                   fill=(130, 90, 50))
    draw.ellipse((FRISBEE_BOX.x_min, FRISBEE_BOX.y_min, FRISBEE_BOX.x_max - 1,
                  FRISBEE_BOX.y_max - 1), fill=(210, 60, 50))
    return _png_input(img)


def blank_image(width: int = 64, height: int = 48) -> ModalityInput:
    return _png_input(Image.new("RGB", (width, height), (128, 128, 128)))


def pattern_image(width: int = 64, height: int = 48, cell: int = 8) -> ModalityInput:
    """Checkerboard with a horizontal color ramp; visually distinct content."""
    img = Image.new("RGB", (width, height))
    px = img.load()
    for y in range(height):
        for x in range(width):
            ramp = int(255 * x / max(1, width - 1))
            if (x // cell + y // cell) % 2 == 0:
                px[x, y] = (ramp, 40, 255 - ramp)
            else:
                px[x, y] = (30, 200 - ramp // 2, 80)
    return _png_input(img)


def chirp_audio(
    f0: float = 300.0, f1: float = 1800.0, seconds: float = 0.4, rate: int = 16000
) -> ModalityInput:
    """Mono 16-bit PCM linear sweep from f0 to f1; spectrally non-stationary."""
    n = int(seconds * rate)
    frames = bytearray()
    for i in range(n):
        t = i / rate
        phase = 2.0 * math.pi * (f0 * t + (f1 - f0) * t * t / (2.0 * seconds))
        frames += struct.pack("<h", int(30000 * math.sin(phase)))
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(rate)
        wav.writeframes(bytes(frames))
    return ModalityInput.from_bytes(Modality.AUDIO, buf.getvalue(), MediaFormat.WAV)


def _png_input(img: Image.Image) -> ModalityInput:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return ModalityInput.from_bytes(Modality.IMAGE, buf.getvalue(), MediaFormat.PNG)


def tone_audio(freq_hz: float = 440.0, seconds: float = 0.5, rate: int = 16000) -> ModalityInput:
    """Mono 16-bit PCM sine tone."""
    n = int(seconds * rate)
    frames = bytearray()
    for i in range(n):
        value = int(32000 * math.sin(2.0 * math.pi * freq_hz * i / rate))
        frames += struct.pack("<h", value)
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(rate)
        wav.writeframes(bytes(frames))
    return ModalityInput.from_bytes(Modality.AUDIO, buf.getvalue(), MediaFormat.WAV)


def demo_audio() -> ModalityInput:
    return tone_audio(440.0)


def overfit_quad() -> list[tuple[ModalityInput | None, ModalityInput | None, str, str]]:
    """Four (image, audio, instruction, response) training fixtures.

    Each sample keeps at least one medium no other sample uses, so every
    sample has a dedicated trainable lever; the last one is a negative pair
    whose reply describes image and audio independently.
    """
    img = demo_image()
    return [
        (img, None, "Describe the image.", DEMO_REPLY),
        (None, demo_audio(), "Describe the audio.", "A steady alarm tone rings."),
        (pattern_image(), chirp_audio(), RELATED_QUESTION,
         "Yes. The image shows a bright pattern and the audio is its rising sweep."),
        (img, tone_audio(660.0, 0.4), RELATED_QUESTION, NEGATIVE_REPLY),
    ]


def tagger_table(image: ModalityInput) -> dict[str, list[Tag]]:
    return {
        image.digest: [Tag("dog", 0.92), Tag("frisbee", 0.81), Tag("grass", 0.55)]
    }


def detector_table(image: ModalityInput) -> dict[str, list[Detection]]:
    # grass scores below the default 0.25 box threshold on purpose.
    return {
        image.digest: [
            Detection("dog", DOG_BOX, 0.9),
            Detection("frisbee", FRISBEE_BOX, 0.8),
            Detection("grass", BoundingBox(0, 0, 96, 64), 0.2),
        ]
    }


def demo_adapters(image: ModalityInput | None = None) -> AdapterSet:
    """Mock adapter set wired to the demo image's fixture tables."""
    image = image or demo_image()
    return AdapterSet(
        tagger=FixtureTagger(tagger_table(image)),
        detector=FixtureDetector(detector_table(image)),
        segmenter=BoxFillSegmenter(),
        matcher=ExactSubstringMatcher(),
    )


def canned_replies(image: ModalityInput, audio: ModalityInput) -> dict[tuple[str | None, str | None, str], str]:
    """Chat replies keyed by (image digest, audio digest, instruction)."""
    return {
        (image.digest, None, "What is the image?"): DEMO_REPLY,
        (None, audio.digest, "Pay attention to the audio and describe what you notice."):
            "A steady alarm tone rings.",
        (image.digest, audio.digest,
         "Please find the source that emits the given sound in this image."):
            "The sound comes from the frisbee rattling as the dog catches it.",
        (image.digest, audio.digest, RELATED_QUESTION): NEGATIVE_REPLY,
    }
