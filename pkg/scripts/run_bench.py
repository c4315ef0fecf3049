#!/usr/bin/env python3
"""Run the sparse vs dense interframe attention benchmark and print the trend checks.

Example::

    python scripts/run_bench.py --out bench.csv
    python scripts/run_bench.py --frames 10,20,30 --grid 64x16 --channels 8
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from panoepi.bench import BenchSpec, format_summary, ray_cost_summary, run_bench, trend_checks
from panoepi.camera import EquirectGrid


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", default="10,20,30")
    ap.add_argument("--grid", type=EquirectGrid.parse, default=EquirectGrid(32, 8))
    ap.add_argument("--channels", type=int, default=16)
    ap.add_argument("--repetitions", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    frames = tuple(int(x) for x in args.frames.split(","))
    spec = BenchSpec(
        frames=frames, grid=args.grid, channels=args.channels,
        repetitions=args.repetitions, seed=args.seed, out=args.out,
    )
    result = run_bench(spec)
    print(format_summary(result))
    ok = True
    if {10, 30} <= set(frames):
        for tc in trend_checks(result):
            print(f"{'PASS' if tc.passed else 'FAIL'} {tc.name}: {tc.value:.4f} (want {tc.expected})")
            ok &= tc.passed
    print(ray_cost_summary())
    return 0 if ok else 3


if __name__ == "__main__":
    sys.exit(main())
