"""Decoding and sniffing of raw media payloads.

Only formats the desk-scale stack can actually decode are accepted: PNG and
JPEG images via Pillow, PCM WAV audio via the stdlib.  FLAC/MP3 payloads are
valid containers at the type level but raise InputError here.
"""

from __future__ import annotations

import io
import wave

import numpy as np
from PIL import Image

from .errors import InputError
from .types import MediaFormat, Modality, ModalityInput

BILINEAR = Image.Resampling.BILINEAR


def sniff_format(payload: bytes) -> MediaFormat | None:
    if payload.startswith(b"\x89PNG\r\n\x1a\n"):
        return MediaFormat.PNG
    if payload.startswith(b"\xff\xd8\xff"):
        return MediaFormat.JPEG
    if payload[:4] == b"RIFF" and payload[8:12] == b"WAVE":
        return MediaFormat.WAV
    if payload.startswith(b"fLaC"):
        return MediaFormat.FLAC
    if payload.startswith(b"ID3") or payload[:2] in (b"\xff\xfb", b"\xff\xf3", b"\xff\xf2"):
        return MediaFormat.MP3
    return None


def decode_image(media: ModalityInput) -> Image.Image:
    if media.kind is not Modality.IMAGE:
        raise InputError(f"expected an image, got {media.kind.value}")
    try:
        img = Image.open(io.BytesIO(media.payload))
        img.load()
    except Exception as exc:
        raise InputError(f"undecodable image: {exc}") from exc
    return img.convert("RGB")


def image_size(media: ModalityInput) -> tuple[int, int]:
    img = decode_image(media)
    return img.width, img.height


def decode_audio(media: ModalityInput) -> tuple[int, np.ndarray]:
    """Decode to (sample_rate, mono float64 waveform in [-1, 1])."""
    if media.kind is not Modality.AUDIO:
        raise InputError(f"expected audio, got {media.kind.value}")
    if media.format is not MediaFormat.WAV:
        raise InputError(f"built-in decoder supports wav only, got {media.format.value}")
    try:
        with wave.open(io.BytesIO(media.payload)) as wav:
            rate = wav.getframerate()
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            frames = wav.readframes(wav.getnframes())
    except Exception as exc:
        raise InputError(f"undecodable wav: {exc}") from exc
    if width == 2:
        samples = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 1:
        samples = (np.frombuffer(frames, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif width == 4:
        samples = np.frombuffer(frames, dtype="<i4").astype(np.float64) / 2147483648.0
    else:
        raise InputError(f"unsupported wav sample width {width}")
    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1)
    return rate, samples


def modality_input_from_upload(
    payload: bytes, kind: Modality, declared_format: MediaFormat | None = None
) -> ModalityInput:
    """Build a ModalityInput from uploaded bytes, sniffing the format."""
    if not payload:
        raise InputError("empty upload")
    fmt = sniff_format(payload) or declared_format
    if fmt is None:
        raise InputError("unrecognized media format")
    try:
        return ModalityInput.from_bytes(kind, payload, fmt)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
