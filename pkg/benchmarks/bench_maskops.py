"""Benchmark the compiled mask kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_maskops.py [--side 1024] [--repeats 7]

Times the median of N runs per operation on an elliptical blob mask and
checks that both backends produce identical results while at it.
"""

from __future__ import annotations

import argparse
import math
import statistics
import time

from groundchat.maskops import backends


def blob_bitmap(side: int) -> bytes:
    """Deterministic elliptical mask with a ragged sinusoidal edge."""
    cx = cy = side / 2
    out = bytearray(side * side)
    for y in range(side):
        for x in range(side):
            r = math.hypot((x - cx) / (side * 0.42), (y - cy) / (side * 0.33))
            wobble = 0.08 * math.sin(11 * math.atan2(y - cy, x - cx or 1e-9))
            if r + wobble < 1.0:
                out[y * side + x] = 1
    return bytes(out)


def run_op(impl, op: str, bitmap: bytes, side: int):
    box = (side * 0.2, side * 0.25, side * 0.8, side * 0.85)
    if op == "rle_encode":
        return impl.rle_encode(bitmap)
    if op == "rle_decode":
        counts = impl.rle_encode(bitmap)
        return impl.rle_decode(counts, len(bitmap))
    if op == "count_nonzero":
        return impl.count_nonzero(bitmap)
    if op == "count_outside_box":
        return impl.count_outside_box(bitmap, side, side, *box)
    if op == "clip_to_box":
        return impl.clip_to_box(bitmap, side, side, *box)
    raise ValueError(op)


OPS = ("rle_encode", "rle_decode", "count_nonzero", "count_outside_box", "clip_to_box")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--side", type=int, default=1024, help="mask edge length")
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    impls = backends()
    if "compiled" not in impls:
        print("compiled backend not built; run pip install -e . first")
        return 1

    bitmap = blob_bitmap(args.side)
    print(f"mask {args.side}x{args.side}, "
          f"{impls['python'].count_nonzero(bitmap):,} on-pixels, "
          f"median of {args.repeats} runs\n")
    header = f"{'operation':<20} {'python':>12} {'compiled':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))

    for op in OPS:
        medians = {}
        results = {}
        for name, impl in impls.items():
            times = []
            for _ in range(args.repeats):
                started = time.perf_counter()
                results[name] = run_op(impl, op, bitmap, args.side)
                times.append(time.perf_counter() - started)
            medians[name] = statistics.median(times)
        if results["python"] != results["compiled"]:
            print(f"{op:<20} BACKENDS DISAGREE")
            return 1
        ratio = medians["python"] / medians["compiled"]
        print(f"{op:<20} {medians['python'] * 1e3:>10.2f}ms "
              f"{medians['compiled'] * 1e3:>10.2f}ms {ratio:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
