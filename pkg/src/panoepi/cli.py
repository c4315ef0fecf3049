"""``panoepi`` command-line interface.

Exit codes: 0 success, 1 usage or file error, 2 degenerate geometry,
3 failed self-test or benchmark assertion.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import run_all
from .bench import BenchSpec, format_summary, ray_cost_summary, run_bench, trend_checks
from .camera import EquirectGrid, GeometryError, Pose4DoF, PixelDomainError, pose4dof_to_se3
from .epipolar import curve_distance, epipolar_curve, epipolar_mask, epipoles, essential, relative_pose
from .io import FormatError, load_params, load_triplane, write_ppm
from .ray_attention import ALONG_RAY, RayAttentionParams, RaySampleConfig, ray_pixel_attention, sample_ray_points
from .render import RenderSpec, render_epipolar
from .sequence import (
    MaskCache,
    TrajectoryError,
    check_spacing,
    dense_schedule,
    load_trajectory,
    pair_candidate_counts,
    pair_essential,
    pair_masks,
    sparse_schedule,
)
from .triplane import Triplane

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE, EXIT_FAILED = 0, 1, 2, 3
CACHE_ENV = "PANOEPI_CACHE_DIR"
MASK_CSV_VERSION = 1
MASK_CSV_COLUMNS = [
    "schema_version",
    "query_frame",
    "attended_frame",
    "mean_M",
    "max_M",
    "sparsity",
    "degenerate_queries",
    "score_evaluations",
]
DEFAULT_GRID = EquirectGrid(512, 128)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _grid(text: str) -> EquirectGrid:
    try:
        return EquirectGrid.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _int_at_least(low: int):
    def parse(text: str) -> int:
        value = int(text)
        if value < low:
            raise argparse.ArgumentTypeError(f"must be >= {low}")
        return value

    return parse


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    def d(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--grid", type=_grid, default=d(None), help="panorama grid WxH (default 512x128)")
    parser.add_argument("--band", type=_int_at_least(0), default=d(1), help="mask band halfwidth in rows (default 1)")
    parser.add_argument("--eps", type=_positive_float, default=d(None), help="mask by residual threshold instead of the row band")
    parser.add_argument("--window", type=_int_at_least(1), default=d(2), help="sparse schedule window (default 2)")
    parser.add_argument("--threads", type=_int_at_least(1), default=d(1), help="worker threads for per-pair work")
    parser.add_argument("--seed", type=int, default=d(0), help="seed for every random fixture")
    parser.add_argument("--out", type=Path, default=d(None), help="output file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="panoepi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("epicurve", help="render the epipolar curve of one query pixel")
    _common(p, suppress=True)
    p.add_argument("poses", type=Path, help="trajectory file; the first two frames are used")
    p.add_argument("u", type=float)
    p.add_argument("v", type=float)
    p.add_argument("--thickness", type=int, default=1)

    p = sub.add_parser("mask", help="per-pair candidate statistics as CSV")
    _common(p, suppress=True)
    p.add_argument("trajectory", type=Path)
    p.add_argument("--schedule", choices=("sparse", "dense"), default="sparse")

    p = sub.add_parser("bench", help="sparse vs dense interframe attention benchmark")
    _common(p, suppress=True)
    p.add_argument("--frames", default="10,20,30", help="comma-separated frame counts")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--dense-cap", type=int, default=None, help="max scores per frame for dense runs")

    p = sub.add_parser("trace", help="dump the ray attention computation for one pixel")
    _common(p, suppress=True)
    p.add_argument("x", type=float)
    p.add_argument("y", type=float)
    p.add_argument("z", type=float)
    p.add_argument("yaw", type=float, help="radians")
    p.add_argument("u", type=float)
    p.add_argument("v", type=float)
    p.add_argument("--params", type=Path, help="ray attention parameter file (default: initial parameters)")
    p.add_argument("--triplane", type=Path, help="triplane file (default: random, from --seed)")
    p.add_argument("--K", type=int, default=32)
    p.add_argument("--J", type=int, default=8)
    p.add_argument("--r-min", type=float, default=1.0)
    p.add_argument("--r-max", type=float, default=100.0)
    p.add_argument("--along-ray", action="store_true", help="initial parameters use along-ray offsets")

    p = sub.add_parser("selftest", help="run every acceptance suite")
    _common(p, suppress=True)
    p.add_argument("--corrupt-byte", type=int, default=None, help=argparse.SUPPRESS)
    return parser


def _first_two(path: Path):
    traj = load_trajectory(path)
    if len(traj) < 2:
        raise UsageError(f"{path}: need two poses, found {len(traj)}")
    return traj.se3(0), traj.se3(1)


def cmd_epicurve(args) -> int:
    grid = args.grid or DEFAULT_GRID
    pm, pn = _first_two(args.poses)
    rel = relative_pose(pm, pn)
    E = essential(rel)
    query = (args.u, args.v)
    curve = epipolar_curve(query, E, grid)
    mask = epipolar_mask(query, E, grid, args.band, args.eps)
    e1, e2 = epipoles(rel, grid)
    img = render_epipolar(grid, curve, mask, (e1, e2), RenderSpec(thickness=args.thickness))
    out = args.out or Path("epicurve.ppm")
    write_ppm(out, img)
    print(f"wrote {out} ({grid.width}x{grid.height})")
    for name, e in (("epipole +t", e1), ("epipole -t", e2)):
        dist = "n/a" if curve.at_epipole else f"{curve_distance(curve, e, grid):.3f} px"
        print(f"{name}: u={e[0]:.3f} v={e[1]:.3f} curve distance {dist}")
    print(f"candidates: {mask.count}{' (query on an epipole: full mask)' if mask.full else ''}")
    return EXIT_OK


def _mask_row(traj, m, n, grid, args, cache):
    E = pair_essential(traj, m, n)
    if args.eps is None and cache is None:
        counts, epi = pair_candidate_counts(E, grid, args.band)
    else:
        key = MaskCache.key(traj, m, n, grid, args.band, args.eps) if cache is not None else None
        hit = cache.get(key) if cache is not None else None
        if hit is None:
            hit = pair_masks(E, grid, args.band, args.eps)
            if cache is not None:
                cache.put(key, hit)
        mask, epi = hit
        counts = mask.lengths
    return {
        "schema_version": MASK_CSV_VERSION,
        "query_frame": traj.frames[m].id,
        "attended_frame": traj.frames[n].id,
        "mean_M": f"{counts.mean():.6f}",
        "max_M": int(counts.max()),
        "sparsity": f"{counts.mean() / grid.size:.8f}",
        "degenerate_queries": int(epi.sum()),
        "score_evaluations": int(counts.sum()),
    }


def cmd_mask(args) -> int:
    grid = args.grid or DEFAULT_GRID
    traj = load_trajectory(args.trajectory)
    check_spacing(traj)
    n = len(traj)
    sched = dense_schedule(n) if args.schedule == "dense" else sparse_schedule(n, args.window)
    cache_dir = os.environ.get(CACHE_ENV)
    cache = MaskCache(cache_dir, keep_in_memory=False) if cache_dir else None

    def work(pair):
        return _mask_row(traj, *pair, grid, args, cache)

    pairs = sched.pairs()
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(work, pairs))
    else:
        rows = [work(p) for p in pairs]

    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=MASK_CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        frames = tuple(int(x) for x in args.frames.split(","))
    except ValueError as exc:
        raise UsageError(f"--frames: {exc}") from exc
    kw = dict(
        frames=frames,
        band=args.band,
        repetitions=args.repetitions,
        seed=args.seed,
        out=args.out,
        channels=args.channels,
        window=args.window,
        dense_cap=args.dense_cap,
        threads=args.threads,
    )
    if args.grid is not None:
        kw["grid"] = args.grid
    try:
        spec = BenchSpec(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    cache_dir = os.environ.get(CACHE_ENV)
    result = run_bench(spec, MaskCache(cache_dir) if cache_dir else None)
    print(format_summary(result))
    status = EXIT_OK
    capped = any(r.status != "ok" for r in result.rows)
    if {10, 30} <= set(frames) and not capped:
        for tc in trend_checks(result):
            print(f"{'PASS' if tc.passed else 'FAIL'} {tc.name}: {tc.value:.4f} (want {tc.expected})")
            if not tc.passed:
                status = EXIT_FAILED
    elif capped:
        print("dense runs capped: trend checks skipped")
    print(ray_cost_summary())
    if args.out:
        print(f"wrote {args.out}")
    return status


def _fmt(a) -> str:
    return np.array2string(np.asarray(a), precision=6, separator=", ", max_line_width=200, threshold=10_000)


def cmd_trace(args) -> int:
    grid = args.grid or DEFAULT_GRID
    cfg = RaySampleConfig(K=args.K, r_min=args.r_min, r_max=args.r_max, J=args.J)
    if args.params:
        params = load_params(args.params)
        cfg = RaySampleConfig(K=params.K, r_min=args.r_min, r_max=args.r_max, J=params.J)
    else:
        params = RayAttentionParams.initial(cfg, ALONG_RAY if args.along_ray else "free")
    if args.triplane:
        tp = load_triplane(args.triplane)
    else:
        tp = Triplane.random(np.random.default_rng(args.seed), channels=8, resolution=64)
    pose = pose4dof_to_se3(Pose4DoF((args.x, args.y, args.z), args.yaw))
    pixel = (args.u, args.v)
    feature = ray_pixel_attention(tp, pose, pixel, grid, cfg, params)
    A = params.weights()
    print(f"pixel (u, v) = ({args.u}, {args.v}) on {grid.width}x{grid.height}, K={cfg.K}, J={cfg.J}, mode={params.mode}")
    print(f"r_k = {_fmt(cfg.depths())}")
    print(f"points (K, 3) =\n{_fmt(sample_ray_points(pose, pixel, grid, cfg))}")
    print(f"A (K, J) =\n{_fmt(A)}")
    print(f"sum_k A per head = {_fmt(A.sum(axis=0))}")
    print(f"offsets {params.offsets.shape} =\n{_fmt(params.offsets)}")
    print(f"head weights = {_fmt(params.head_weights)}")
    print(f"feature (C={feature.shape[0]}) = {_fmt(feature)}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_all(args.seed, args.corrupt_byte, report=lambda line: print(line, flush=True))
    good = sum(r.ok for r in results)
    print(f"{good}/{len(results)} suites passed")
    return EXIT_OK if good == len(results) else EXIT_FAILED


COMMANDS = {
    "epicurve": cmd_epicurve,
    "mask": cmd_mask,
    "bench": cmd_bench,
    "trace": cmd_trace,
    "selftest": cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except PixelDomainError as exc:
        print(f"panoepi: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GeometryError as exc:
        print(f"panoepi: degenerate geometry: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (UsageError, TrajectoryError, FormatError, OSError, ValueError) as exc:
        print(f"panoepi: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
