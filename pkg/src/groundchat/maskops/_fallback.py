"""Pure-Python bitmap kernels: run-length coding and box clipping.

Bitmaps are row-major ``bytes`` of length width*height; any nonzero byte is
an "on" pixel.  Run-length encoding is a list of alternating run lengths,
starting with the run of zeros (possibly 0), summing to the bitmap length.
A pixel at integer coordinate (x, y) counts as inside a float box
(x_min, y_min, x_max, y_max) iff x_min <= x < x_max and y_min <= y < y_max.

The compiled extension in ``_kernels.pyx`` implements the same contract;
``groundchat.maskops`` picks whichever is importable.
"""

from __future__ import annotations

import math
from itertools import groupby
from typing import Sequence


def rle_encode(bitmap: bytes) -> list[int]:
    if not bitmap:
        return []
    counts: list[int] = []
    current = False
    for value, run in groupby(bitmap, key=lambda b: b != 0):
        if value != current:
            counts.append(0)
            current = value
        counts.append(sum(1 for _ in run))
        current = not current
    return counts


def rle_decode(counts: Sequence[int], size: int) -> bytes:
    total = 0
    out = bytearray(size)
    value = 0
    for run in counts:
        if run < 0:
            raise ValueError(f"negative run length {run}")
        if value:
            for i in range(total, total + run):
                out[i] = 1
        total += run
        value ^= 1
    if total != size:
        raise ValueError(f"run lengths sum to {total}, expected {size}")
    return bytes(out)


def count_nonzero(bitmap: bytes) -> int:
    return len(bitmap) - bitmap.count(0)


def _pixel_bounds(lo: float, hi: float, limit: int) -> tuple[int, int]:
    # Integer pixels p with lo <= p < hi, clamped to [0, limit).
    start = max(0, math.ceil(lo))
    stop = min(limit, math.ceil(hi))
    return start, stop


def count_outside_box(
    bitmap: bytes,
    width: int,
    height: int,
    x_min: float,
    y_min: float,
    x_max: float,
    y_max: float,
) -> int:
    if len(bitmap) != width * height:
        raise ValueError(f"bitmap length {len(bitmap)} != {width}x{height}")
    x0, x1 = _pixel_bounds(x_min, x_max, width)
    y0, y1 = _pixel_bounds(y_min, y_max, height)
    total = count_nonzero(bitmap)
    if x0 >= x1 or y0 >= y1:
        return total
    inside = 0
    for y in range(y0, y1):
        row = bitmap[y * width + x0 : y * width + x1]
        inside += len(row) - row.count(0)
    return total - inside


def clip_to_box(
    bitmap: bytes,
    width: int,
    height: int,
    x_min: float,
    y_min: float,
    x_max: float,
    y_max: float,
) -> tuple[bytes, int]:
    """Zero out on-pixels outside the box; returns (clipped bitmap, #cleared)."""
    if len(bitmap) != width * height:
        raise ValueError(f"bitmap length {len(bitmap)} != {width}x{height}")
    x0, x1 = _pixel_bounds(x_min, x_max, width)
    y0, y1 = _pixel_bounds(y_min, y_max, height)
    if x0 >= x1 or y0 >= y1:
        return bytes(len(bitmap)), count_nonzero(bitmap)
    out = bytearray(len(bitmap))
    cleared = count_nonzero(bitmap)
    for y in range(y0, y1):
        row = bitmap[y * width + x0 : y * width + x1]
        out[y * width + x0 : y * width + x1] = row
        cleared -= len(row) - row.count(0)
    return bytes(out), cleared
