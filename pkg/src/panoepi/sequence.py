"""Trajectories, interframe attention schedules and per-pair epipolar masks."""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .attention import CandidateMask
from .camera import EquirectGrid, Pose4DoF, PoseSE3, pixel_to_angles, pose4dof_to_se3
from .epipolar import (
    DegenerateBaselineError,
    EssentialMatrix,
    band_rows,
    epipolar_mask,
    essential,
    relative_pose,
)
from .io import load_masks, save_masks

DEFAULT_EXTENT = ((-100.0, 100.0), (-100.0, 100.0))
MIN_SPACING = 8.0
DEFAULT_HEIGHT = 1.6


class TrajectoryError(ValueError):
    pass


@dataclass(frozen=True)
class Frame:
    id: int
    pose: Pose4DoF


@dataclass(frozen=True)
class Trajectory:
    frames: tuple[Frame, ...]
    extent: tuple[tuple[float, float], tuple[float, float]] = DEFAULT_EXTENT

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        ids = [f.id for f in frames]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise TrajectoryError(f"frame ids must be unique and increasing, got {ids}")
        (x0, x1), (y0, y1) = self.extent
        for f in frames:
            x, y = f.pose.t[:2]
            if not (x0 <= x <= x1 and y0 <= y <= y1):
                raise TrajectoryError(f"frame {f.id} at ({x:.2f}, {y:.2f}) lies outside the satellite extent")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def se3(self, index: int) -> PoseSE3:
        return pose4dof_to_se3(self.frames[index].pose)

    @classmethod
    def from_poses(cls, poses: Iterable[Pose4DoF], extent=DEFAULT_EXTENT) -> "Trajectory":
        return cls(tuple(Frame(i, p) for i, p in enumerate(poses)), extent)


def close_pairs(traj: Trajectory, min_spacing: float = MIN_SPACING) -> list[tuple[int, int, float]]:
    """Consecutive frames closer than ``min_spacing`` meters."""
    out = []
    for a, b in zip(traj.frames, traj.frames[1:]):
        d = float(np.linalg.norm(a.pose.t - b.pose.t))
        if d < min_spacing:
            out.append((a.id, b.id, d))
    return out


def check_spacing(traj: Trajectory, min_spacing: float = MIN_SPACING) -> list[tuple[int, int, float]]:
    """Warn about consecutive frames closer than ``min_spacing``; returns them."""
    pairs = close_pairs(traj, min_spacing)
    for a, b, d in pairs:
        warnings.warn(f"frames {a} and {b} are {d:.2f} m apart (< {min_spacing} m)", stacklevel=2)
    return pairs


# --- file formats -----------------------------------------------------------


def _position(values, default_height: float) -> tuple[float, float, float]:
    values = [float(x) for x in values]
    if len(values) == 2:
        values.append(default_height)
    if len(values) != 3:
        raise ValueError(f"position needs 2 or 3 coordinates, got {len(values)}")
    return tuple(values)


def parse_trajectory_text(text: str, extent=DEFAULT_EXTENT, default_height: float = DEFAULT_HEIGHT) -> Trajectory:
    """Parse ``id x y z yaw_radians`` lines; ``#`` starts a comment.

    Lines of the form ``id x y yaw_radians`` place the camera at ``default_height``.
    """
    frames = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (4, 5):
            raise TrajectoryError(f"line {lineno}: expected 'id x y z yaw', got {raw!r}")
        try:
            fid = int(parts[0])
            pos = _position(parts[1:-1], default_height)
            yaw = float(parts[-1])
        except ValueError as exc:
            raise TrajectoryError(f"line {lineno}: {exc}") from exc
        frames.append(Frame(fid, Pose4DoF(pos, yaw)))
    return Trajectory(tuple(frames), extent)


def parse_trajectory_json(text: str, default_height: float = DEFAULT_HEIGHT) -> Trajectory:
    """Parse the JSON variant; a 2-element ``position`` is placed at ``default_height``."""
    try:
        doc = json.loads(text)
        ext = doc.get("satellite_extent", {"x": DEFAULT_EXTENT[0], "y": DEFAULT_EXTENT[1]})
        extent = (tuple(map(float, ext["x"])), tuple(map(float, ext["y"])))
        frames = tuple(
            Frame(int(f["id"]), Pose4DoF(_position(f["position"], default_height), float(f["yaw"])))
            for f in doc["frames"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TrajectoryError(f"bad trajectory JSON: {exc}") from exc
    return Trajectory(frames, extent)


def load_trajectory(path: str | Path, default_height: float = DEFAULT_HEIGHT) -> Trajectory:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TrajectoryError(f"cannot read {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        return parse_trajectory_json(text, default_height)
    return parse_trajectory_text(text, default_height=default_height)


def format_trajectory_text(traj: Trajectory) -> str:
    lines = ["# id x y z yaw_radians"]
    for f in traj.frames:
        x, y, z = f.pose.t.tolist()
        lines.append(f"{f.id} {x!r} {y!r} {z!r} {float(f.pose.yaw)!r}")
    return "\n".join(lines) + "\n"


def format_trajectory_json(traj: Trajectory) -> str:
    doc = {
        "satellite_extent": {"x": list(traj.extent[0]), "y": list(traj.extent[1])},
        "frames": [{"id": f.id, "position": f.pose.t.tolist(), "yaw": f.pose.yaw} for f in traj.frames],
    }
    return json.dumps(doc, indent=2)


# --- schedules --------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """``attended[i]`` lists the frames frame ``i`` queries, ascending."""

    attended: tuple[tuple[int, ...], ...]
    window: int | None = None
    name: str = "custom"

    def __len__(self) -> int:
        return len(self.attended)

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i, att in enumerate(self.attended) for j in att]

    @property
    def pair_count(self) -> int:
        return sum(len(a) for a in self.attended)

    def is_causal(self) -> bool:
        return all(j < i for i, j in self.pairs())


def dense_schedule(n: int) -> Schedule:
    if n < 1:
        raise ValueError("need at least one frame")
    return Schedule(tuple(tuple(j for j in range(n) if j != i) for i in range(n)), None, "dense")


def sparse_schedule(n: int, window: int = 2) -> Schedule:
    """Frame i attends its ``window`` preceding frames (fewer at the start)."""
    if n < 1 or window < 1:
        raise ValueError("need n >= 1 and window >= 1")
    return Schedule(tuple(tuple(range(max(0, i - window), i)) for i in range(n)), window, "sparse")


def dense_pair_count(n: int) -> int:
    return n * (n - 1)


def sparse_pair_count(n: int, window: int = 2) -> int:
    if n >= window:
        return window * n - window * (window + 1) // 2
    return n * (n - 1) // 2


def downscale_grid(grid: EquirectGrid, level: int) -> EquirectGrid:
    """Grid of a coarser feature level (each level halves both sides)."""
    if level < 0:
        raise ValueError("level must be >= 0")
    f = 1 << level
    if grid.width % f or grid.height % f:
        raise ValueError(f"{grid.width}x{grid.height} is not divisible by 2^{level}")
    return EquirectGrid(grid.width // f, grid.height // f)


# --- per-pair masks ---------------------------------------------------------


def query_pixels(grid: EquirectGrid) -> np.ndarray:
    """All pixel centers, row-major, shape (H*W, 2) as (u, v)."""
    uu, vv = grid.pixel_centers()
    return np.stack([uu.ravel(), vv.ravel()], axis=1)


def _normals(E: np.ndarray, grid: EquirectGrid, queries: np.ndarray) -> np.ndarray:
    d = pixel_to_angles(queries[:, 0], queries[:, 1], grid).direction
    return d @ E.T


def _chunk_rows(E: np.ndarray, grid: EquirectGrid, band: int, queries: np.ndarray):
    n = _normals(E, grid, queries)
    at_epipole = np.linalg.norm(n, axis=1) <= 1e-9 * np.linalg.norm(E)
    rows, valid, full_cols = band_rows(n, grid, band)
    return rows, valid, full_cols, at_epipole


def pair_candidate_counts(
    E: EssentialMatrix | np.ndarray,
    grid: EquirectGrid,
    band: int = 1,
    queries: np.ndarray | None = None,
    chunk: int = 4096,
) -> tuple[np.ndarray, np.ndarray]:
    """Candidate count per query without materializing the masks.

    Returns ``(counts, at_epipole)``.
    """
    Em = E.E if isinstance(E, EssentialMatrix) else np.asarray(E)
    queries = query_pixels(grid) if queries is None else np.asarray(queries, dtype=float)
    counts = np.empty(len(queries), dtype=np.int64)
    epi = np.empty(len(queries), dtype=bool)
    for s in range(0, len(queries), chunk):
        rows, valid, full_cols, at_epi = _chunk_rows(Em, grid, band, queries[s : s + chunk])
        c = valid.sum(axis=(1, 2)) + full_cols.sum(axis=1) * grid.height
        c[at_epi] = grid.size
        counts[s : s + chunk] = c
        epi[s : s + chunk] = at_epi
    return counts, epi


@dataclass(frozen=True)
class PairMasks:
    """Masks of every query pixel of frame ``m`` against frame ``n``."""

    m: int
    n: int
    essential: EssentialMatrix
    mask: CandidateMask
    at_epipole: np.ndarray = field(repr=False)

    @property
    def counts(self) -> np.ndarray:
        return self.mask.lengths


def pair_masks(
    E: EssentialMatrix,
    grid: EquirectGrid,
    band: int = 1,
    eps: float | None = None,
    queries: np.ndarray | None = None,
    chunk: int = 2048,
) -> tuple[CandidateMask, np.ndarray]:
    """CSR masks over target pixels (row-major flat index) for each query.

    Rows of each query are ordered by target column, then row, matching
    :func:`epipolar.epipolar_mask`.
    """
    queries = query_pixels(grid) if queries is None else np.asarray(queries, dtype=float)
    W = grid.width
    cols = np.arange(W)[None, :, None]
    lengths, parts, epis = [], [], []
    for s in range(0, len(queries), chunk):
        q = queries[s : s + chunk]
        rows, valid, full_cols, at_epi = _chunk_rows(E.E, grid, band, q)
        slow = at_epi | full_cols.any(axis=1)
        if eps is not None:
            slow[:] = True
        flat = rows * W + cols
        epis.append(at_epi)
        if not slow.any():
            parts.append(flat[valid])
            lengths.extend(valid.sum(axis=(1, 2)).tolist())
            continue
        for i in range(len(q)):
            if slow[i]:
                em = epipolar_mask(q[i], E, grid, band, eps)
                idx = em.flat_indices(grid)
            else:
                idx = flat[i][valid[i]]
            parts.append(idx)
            lengths.append(len(idx))
    indptr = np.zeros(len(queries) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(lengths)
    indices = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    return CandidateMask(indptr, indices, grid.size), np.concatenate(epis) if epis else np.zeros(0, bool)


def pair_essential(traj: Trajectory, m: int, n: int) -> EssentialMatrix:
    rel = relative_pose(traj.se3(m), traj.se3(n))
    try:
        return essential(rel, m, n)
    except DegenerateBaselineError as exc:
        raise DegenerateBaselineError(
            f"frames {traj.frames[m].id} and {traj.frames[n].id} share a camera center"
        ) from exc


class MaskCache:
    """Cache of per-pair masks keyed by (m, n, grid, band, eps, poses).

    With ``directory`` set, masks are also persisted with
    :func:`panoepi.io.save_masks`; ``keep_in_memory=False`` then makes the
    disk the only store, for full-resolution runs.
    """

    def __init__(self, directory: str | Path | None = None, keep_in_memory: bool = True) -> None:
        self._mem: dict = {}
        self.keep_in_memory = keep_in_memory
        self.directory = Path(directory) if directory else None
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(traj: Trajectory, m: int, n: int, grid: EquirectGrid, band: int, eps: float | None):
        pm, pn = traj.frames[m].pose, traj.frames[n].pose
        poses = tuple(pm.t.tolist()) + (pm.yaw,) + tuple(pn.t.tolist()) + (pn.yaw,)
        return (m, n, grid.width, grid.height, band, eps, poses)

    def _path(self, key) -> Path:
        digest = hashlib.sha256(repr(key).encode()).hexdigest()[:24]
        return self.directory / f"mask-{digest}.bin"

    def get(self, key):
        if key in self._mem:
            self.hits += 1
            return self._mem[key]
        if self.directory is not None:
            path = self._path(key)
            if path.exists():
                self.hits += 1
                value = load_masks(path)
                if self.keep_in_memory:
                    self._mem[key] = value
                return value
        self.misses += 1
        return None

    def put(self, key, value) -> None:
        if self.keep_in_memory:
            self._mem[key] = value
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            save_masks(self._path(key), *value, grid=EquirectGrid(key[2], key[3]), band=key[4])


def build_frame_masks(
    traj: Trajectory,
    schedule: Schedule,
    grid: EquirectGrid,
    band: int = 1,
    eps: float | None = None,
    threads: int = 1,
    cache: MaskCache | None = None,
) -> dict[tuple[int, int], PairMasks]:
    """Epipolar masks for every scheduled (query frame, attended frame) pair."""
    if len(schedule) != len(traj):
        raise ValueError(f"schedule covers {len(schedule)} frames, trajectory has {len(traj)}")
    pairs = schedule.pairs()
    essentials = {(m, n): pair_essential(traj, m, n) for m, n in pairs}

    def work(pair):
        m, n = pair
        key = MaskCache.key(traj, m, n, grid, band, eps) if cache is not None else None
        hit = cache.get(key) if cache is not None else None
        if hit is None:
            hit = pair_masks(essentials[pair], grid, band, eps)
            if cache is not None:
                cache.put(key, hit)
        mask, epi = hit
        return PairMasks(m, n, essentials[pair], mask, epi)

    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, pairs))
    else:
        results = [work(p) for p in pairs]
    return {(r.m, r.n): r for r in results}


def straight_trajectory(
    n: int,
    spacing: float = 10.0,
    height: float = DEFAULT_HEIGHT,
    yaw_step: float = 0.0,
    start=(-50.0, 0.0),
    heading: float = 0.0,
    extent=DEFAULT_EXTENT,
) -> Trajectory:
    """Evenly spaced frames along a line, optionally with a steady yaw change."""
    c, s = math.cos(heading), math.sin(heading)
    poses = [
        Pose4DoF((start[0] + i * spacing * c, start[1] + i * spacing * s, height), heading + i * yaw_step)
        for i in range(n)
    ]
    return Trajectory.from_poses(poses, extent)


def random_trajectory(
    rng: np.random.Generator,
    n: int,
    step: tuple[float, float] = (10.0, 20.0),
    height: float = DEFAULT_HEIGHT,
    extent=DEFAULT_EXTENT,
) -> Trajectory:
    """A random walk with per-step distance drawn from ``step`` that stays in the extent."""
    (x0, x1), (y0, y1) = extent
    pos = np.array([(x0 + x1) / 2, (y0 + y1) / 2])
    heading = rng.uniform(-math.pi, math.pi)
    poses = []
    for _ in range(n):
        poses.append(Pose4DoF((pos[0], pos[1], height), heading + rng.normal(0, 0.2)))
        for _attempt in range(64):
            h = heading + rng.normal(0, 0.4)
            nxt = pos + rng.uniform(*step) * np.array([math.cos(h), math.sin(h)])
            if x0 <= nxt[0] <= x1 and y0 <= nxt[1] <= y1:
                pos, heading = nxt, h
                break
            heading = rng.uniform(-math.pi, math.pi)
    return Trajectory.from_poses(poses, extent)


__all__: Sequence[str] = [
    "DEFAULT_HEIGHT",
    "Frame",
    "MaskCache",
    "PairMasks",
    "Schedule",
    "Trajectory",
    "TrajectoryError",
    "build_frame_masks",
    "check_spacing",
    "close_pairs",
    "dense_pair_count",
    "dense_schedule",
    "downscale_grid",
    "load_trajectory",
    "pair_candidate_counts",
    "pair_essential",
    "pair_masks",
    "parse_trajectory_json",
    "parse_trajectory_text",
    "query_pixels",
    "random_trajectory",
    "sparse_pair_count",
    "sparse_schedule",
    "straight_trajectory",
]
