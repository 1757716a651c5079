"""PNG overlay rendering: tinted masks, box outlines, labels."""

from __future__ import annotations

import io
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw

from .. import media
from ..types import GroundedEntity, ModalityInput

# Fixed palette cycled by entity index; keeps renders deterministic.
PALETTE: tuple[tuple[int, int, int], ...] = (
    (230, 70, 60),
    (60, 130, 230),
    (60, 190, 90),
    (240, 170, 40),
    (170, 80, 220),
    (40, 200, 200),
)

MASK_ALPHA = 0.45


def render_overlay(image: ModalityInput, entities: Sequence[GroundedEntity]) -> bytes:
    """Render entities over the image; returns PNG bytes."""
    base = media.decode_image(image)
    pixels = np.asarray(base, dtype=np.float64)
    height, width = pixels.shape[:2]

    for i, entity in enumerate(entities):
        if entity.mask is None:
            continue
        color = np.array(PALETTE[i % len(PALETTE)], dtype=np.float64)
        mask = np.frombuffer(entity.mask.to_bitmap(), dtype=np.uint8)
        mask = mask.reshape(entity.mask.height, entity.mask.width)
        if mask.shape != (height, width):
            continue
        on = mask.astype(bool)
        pixels[on] = (1.0 - MASK_ALPHA) * pixels[on] + MASK_ALPHA * color

    out = Image.fromarray(np.clip(pixels, 0, 255).astype(np.uint8))
    draw = ImageDraw.Draw(out)
    for i, entity in enumerate(entities):
        color = PALETTE[i % len(PALETTE)]
        box = entity.box
        draw.rectangle(
            (box.x_min, box.y_min, box.x_max - 1, box.y_max - 1), outline=color, width=1
        )
        draw.text((box.x_min + 2, box.y_min + 1), entity.label, fill=color)

    buf = io.BytesIO()
    out.save(buf, format="PNG")
    return buf.getvalue()


def mask_to_png(mask_width: int, mask_height: int, bitmap: bytes) -> bytes:
    """1-bit PNG of a binary bitmap (used by the mask-serving endpoint)."""
    arr = np.frombuffer(bitmap, dtype=np.uint8).reshape(mask_height, mask_width)
    img = Image.fromarray((arr * 255).astype(np.uint8)).convert("1")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def png_to_bitmap(png_bytes: bytes) -> tuple[int, int, bytes]:
    """Inverse of mask_to_png: returns (width, height, 0/1 bitmap)."""
    img = Image.open(io.BytesIO(png_bytes)).convert("1")
    arr = (np.asarray(img, dtype=np.uint8) > 0).astype(np.uint8)
    return img.width, img.height, arr.tobytes()
