"""Bitmap kernels with a compiled fast path.

The Cython extension is preferred when built; set GROUNDCHAT_MASKOPS=python
to force the pure-Python fallback (used by tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _fallback

_FORCED = os.environ.get("GROUNDCHAT_MASKOPS", "").strip().lower()

if _FORCED == "python":
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _FORCED == "compiled":
            raise
        _impl = _fallback
        BACKEND = "python"

rle_encode = _impl.rle_encode
rle_decode = _impl.rle_decode
count_nonzero = _impl.count_nonzero
count_outside_box = _impl.count_outside_box
clip_to_box = _impl.clip_to_box


def backends() -> dict[str, object]:
    """All importable backends, keyed by name (for tests and benchmarks)."""
    found: dict[str, object] = {"python": _fallback}
    try:
        from . import _kernels

        found["compiled"] = _kernels
    except ImportError:
        pass
    return found
