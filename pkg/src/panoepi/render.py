"""Deterministic pixmap renderings of epipolar curves and candidate masks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import EquirectGrid
from .epipolar import EpipolarCurve, EpipolarMask

RGB = tuple[int, int, int]


@dataclass(frozen=True)
class RenderSpec:
    """Overlay colors and stroke sizes.

    ``gray`` switches output to a single-channel graymap, using the first
    channel of each color.
    """

    background: RGB = (16, 16, 16)
    band: RGB = (40, 90, 160)
    curve: RGB = (255, 220, 0)
    epipole: RGB = (230, 40, 40)
    thickness: int = 1
    marker_radius: int = 3
    gray: bool = False

    def __post_init__(self) -> None:
        if self.thickness < 1:
            raise ValueError("thickness must be >= 1")
        if self.marker_radius < 0:
            raise ValueError("marker_radius must be >= 0")
        for c in (self.background, self.band, self.curve, self.epipole):
            if len(c) != 3 or not all(0 <= x <= 255 for x in c):
                raise ValueError(f"bad color {c}")


def _stamp(img: np.ndarray, rows: np.ndarray, cols: np.ndarray, color) -> None:
    H, W = img.shape[:2]
    keep = (rows >= 0) & (rows < H)
    img[rows[keep], cols[keep] % W] = color


def _segment_pixels(u0: float, v0: float, u1: float, v1: float) -> tuple[np.ndarray, np.ndarray]:
    steps = max(1, int(math.ceil(max(abs(u1 - u0), abs(v1 - v0)) * 2)))
    s = np.linspace(0.0, 1.0, steps + 1)
    return np.floor(v0 + s * (v1 - v0)).astype(np.int64), np.floor(u0 + s * (u1 - u0)).astype(np.int64)


def render_epipolar(
    grid: EquirectGrid,
    curve: EpipolarCurve | None = None,
    mask: EpipolarMask | None = None,
    epipole_pixels=(),
    spec: RenderSpec = RenderSpec(),
) -> np.ndarray:
    """Draw band mask, curve polyline and epipole crosses, in that order.

    The curve polyline joins consecutive column samples and wraps around the
    seam, matching :func:`panoepi.epipolar.curve_distance`. Returns (H, W, 3)
    uint8, or (H, W) when ``spec.gray``.
    """
    H, W = grid.height, grid.width
    img = np.empty((H, W, 3), dtype=np.uint8)
    img[:] = spec.background
    if mask is not None and mask.count:
        idx = mask.flat_indices(grid)
        _stamp(img, idx // W, idx % W, spec.band)
    if curve is not None:
        half = spec.thickness // 2
        rows, cols = [], []
        if len(curve.u):
            u = np.append(curve.u, curve.u[0] + W)
            v = np.append(curve.v, curve.v[0])
            for a in range(len(curve.u)):
                r, c = _segment_pixels(u[a], v[a], u[a + 1], v[a + 1])
                rows.append(r)
                cols.append(c)
        for fc in curve.full_columns:
            rows.append(np.arange(H))
            cols.append(np.full(H, int(math.floor(fc))))
        if rows:
            r, c = np.concatenate(rows), np.concatenate(cols)
            for dr in range(-half, spec.thickness - half):
                _stamp(img, r + dr, c, spec.curve)
    for pu, pv in epipole_pixels:
        r0, c0 = int(math.floor(pv)), int(math.floor(pu))
        k = np.arange(-spec.marker_radius, spec.marker_radius + 1)
        _stamp(img, np.full_like(k, r0), c0 + k, spec.epipole)
        _stamp(img, r0 + k, np.full_like(k, c0), spec.epipole)
    return img[..., 0].copy() if spec.gray else img
