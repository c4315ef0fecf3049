"""Sparse-vs-dense interframe attention benchmark.

Counts are exact and deterministic; wall times are only compared as ratios
across sequence lengths, never against absolute GPU figures.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .attention import AttentionParams, AttentionStats, cost_model, interframe_attention, ray_attention_cost
from .camera import EquirectGrid
from .sequence import (
    MaskCache,
    build_frame_masks,
    dense_pair_count,
    dense_schedule,
    sparse_pair_count,
    sparse_schedule,
    straight_trajectory,
)

BENCH_CSV_VERSION = 1
BENCH_EXTENT = ((-200.0, 200.0), (-200.0, 200.0))


@dataclass(frozen=True)
class BenchSpec:
    frames: tuple[int, ...] = (10, 20, 30)
    grid: EquirectGrid = field(default_factory=lambda: EquirectGrid(32, 8))
    band: int = 1
    repetitions: int = 3
    seed: int = 0
    out: Path | None = None
    channels: int = 16
    window: int = 2
    dense_cap: int | None = None
    threads: int = 1

    def __post_init__(self) -> None:
        if self.repetitions < 3:
            raise ValueError("repetitions must be >= 3")
        if not self.frames or any(n < 1 for n in self.frames):
            raise ValueError("frame counts must all be >= 1")
        if self.band < 0 or self.channels < 1 or self.window < 1:
            raise ValueError("band >= 0, channels >= 1 and window >= 1 required")
        object.__setattr__(self, "frames", tuple(int(n) for n in self.frames))


@dataclass(frozen=True)
class BenchRow:
    schedule: str
    n_frames: int
    height: int
    width: int
    channels: int
    band: int
    frame_pairs: int
    closed_form_pairs: int
    score_evaluations: int
    model_score_evaluations: int
    peak_score_buffer: int
    median_seconds: float
    status: str


BENCH_CSV_COLUMNS = ["schema_version"] + list(BenchRow.__dataclass_fields__)


@dataclass(frozen=True)
class BenchResult:
    spec: BenchSpec
    rows: tuple[BenchRow, ...]

    def row(self, schedule: str, n: int) -> BenchRow:
        for r in self.rows:
            if r.schedule == schedule and r.n_frames == n:
                return r
        raise KeyError((schedule, n))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=BENCH_CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            d = asdict(r)
            d["median_seconds"] = "" if math.isnan(r.median_seconds) else f"{r.median_seconds:.6f}"
            writer.writerow({"schema_version": BENCH_CSV_VERSION, **d})
        return buf.getvalue()


def bench_trajectory(n: int):
    """A straight street segment with a slow heading drift, 10 m spacing."""
    return straight_trajectory(n, spacing=10.0, yaw_step=0.05, start=(-150.0, 0.0), extent=BENCH_EXTENT)


def _closed_form(schedule: str, n: int, window: int) -> int:
    return dense_pair_count(n) if schedule == "dense" else sparse_pair_count(n, window)


def run_bench(spec: BenchSpec, cache: MaskCache | None = None) -> BenchResult:
    grid = spec.grid
    n_max = max(spec.frames)
    traj = bench_trajectory(n_max)
    # every sparse pair is also a dense pair, and prefixes of the trajectory
    # share poses, so one dense build covers all runs
    masks = build_frame_masks(traj, dense_schedule(n_max), grid, spec.band, threads=spec.threads, cache=cache)
    csr = {k: v.mask for k, v in masks.items()}
    rng = np.random.default_rng(spec.seed)
    features = rng.standard_normal((n_max, grid.size, spec.channels))
    params = AttentionParams.random(rng, spec.channels)

    rows = []
    for name in ("sparse", "dense"):
        for n in spec.frames:
            sched = dense_schedule(n) if name == "dense" else sparse_schedule(n, spec.window)
            model = cost_model(
                n, grid.height, grid.width, sched,
                {p: csr[p].lengths for p in sched.pairs()}, spec.channels, name,
            )
            cap = spec.dense_cap if name == "dense" else None
            times, stats, status = [], AttentionStats(), "ok"
            for rep in range(spec.repetitions):
                run_stats = AttentionStats()
                t0 = time.perf_counter()
                try:
                    interframe_attention(features[:n], sched, params, csr, run_stats, score_cap=cap)
                except MemoryError:
                    status = "capped"
                    break
                times.append(time.perf_counter() - t0)
                if rep == 0:
                    stats = run_stats
            rows.append(
                BenchRow(
                    schedule=name,
                    n_frames=n,
                    height=grid.height,
                    width=grid.width,
                    channels=spec.channels,
                    band=spec.band,
                    frame_pairs=sched.pair_count,
                    closed_form_pairs=_closed_form(name, n, spec.window),
                    score_evaluations=stats.score_evaluations if status == "ok" else 0,
                    model_score_evaluations=model.score_evaluations,
                    peak_score_buffer=model.peak_score_buffer,
                    median_seconds=statistics.median(times) if status == "ok" else math.nan,
                    status=status,
                )
            )
    result = BenchResult(spec, tuple(rows))
    if spec.out is not None:
        Path(spec.out).write_text(result.to_csv())
    return result


@dataclass(frozen=True)
class TrendCheck:
    name: str
    value: float
    passed: bool
    expected: str


def trend_checks(result: BenchResult, small: int = 10, large: int = 30) -> list[TrendCheck]:
    """Pair-count ratios (exact) and wall-time ratios between ``large`` and ``small`` frames."""
    w = result.spec.window
    out = []
    for name in ("dense", "sparse"):
        a, b = result.row(name, small), result.row(name, large)
        exact = Fraction(_closed_form(name, large, w), _closed_form(name, small, w))
        measured = Fraction(b.frame_pairs, a.frame_pairs)
        out.append(TrendCheck(f"{name} pair ratio", float(measured), measured == exact, f"== {float(exact):.4f}"))
        counts_ok = all(r.score_evaluations == r.model_score_evaluations for r in (a, b) if r.status == "ok")
        out.append(TrendCheck(f"{name} score counts match model", float(counts_ok), counts_ok, "== 1"))
    d = result.row("dense", large).median_seconds / result.row("dense", small).median_seconds
    s = result.row("sparse", large).median_seconds / result.row("sparse", small).median_seconds
    out.append(TrendCheck("dense time ratio", d, bool(d > 4), "> 4"))
    out.append(TrendCheck("sparse time ratio", s, bool(s < 4), "< 4"))
    return out


def ray_cost_summary(
    height: int = 128, width: int = 512, channels: int = 32, K: int = 32, J: int = 8, resolution: int = 256
) -> str:
    """Cross-attention vs ray sampling cost for one panorama against a triplane."""
    rc = ray_attention_cost(height, width, channels, K, J, [(resolution, resolution)] * 3)
    return (
        f"ray-attention cost at {width}x{height}, C={channels}, K={K}, J={J}, "
        f"planes {resolution}^2 x3: cross-attention {rc.cross_macs:.3e} MACs "
        f"({rc.cross_buffer:.3e} scores), ray sampling {rc.ray_macs:.3e} MACs "
        f"({rc.ray_buffer:.3e} weights), ratio {rc.mac_ratio:.1f}x"
    )


def format_summary(result: BenchResult) -> str:
    lines = [
        f"{'schedule':8} {'N':>4} {'pairs':>6} {'scores':>12} {'peak buf':>10} {'median s':>10} status"
    ]
    for r in result.rows:
        t = "-" if math.isnan(r.median_seconds) else f"{r.median_seconds:.4f}"
        lines.append(
            f"{r.schedule:8} {r.n_frames:>4} {r.frame_pairs:>6} {r.score_evaluations:>12} "
            f"{r.peak_score_buffer:>10} {t:>10} {r.status}"
        )
    return "\n".join(lines)
