"""Triplane feature fields: bilinear plane sampling, three-plane aggregation,
analytic gradients and reference-set gathering for cross-plane (CVHA) and
image-to-plane (ICA) attention.

Plane layout: a plane labelled ``"xz"`` stores features of shape
(n_a, n_b, C) where axis 0 runs along world X and axis 1 along world Z.
Nodes sit on the extent boundaries, so node (i, j) is at
``a_min + i * (a_max - a_min) / (n_a - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .attention import AttentionParams, full_attention
from .camera import (
    DegenerateProjectionError,
    EquirectGrid,
    GeometryError,
    PoseSE3,
    project_point,
)

PLANES = ("xy", "xz", "yz")
AXIS_INDEX = {"x": 0, "y": 1, "z": 2}
BOUNDARY_EPS = 1e-9


class ExtentError(GeometryError):
    """Sample position outside a plane's world extents."""


@dataclass(frozen=True)
class FeaturePlane:
    label: str
    features: np.ndarray
    extent_a: tuple[float, float]
    extent_b: tuple[float, float]

    def __post_init__(self) -> None:
        if self.label not in PLANES:
            raise ValueError(f"unknown plane label {self.label!r}")
        f = np.array(self.features, dtype=float)
        if f.ndim != 3 or f.shape[0] < 2 or f.shape[1] < 2 or f.shape[2] < 1:
            raise ValueError(f"plane features must be (n_a>=2, n_b>=2, C>=1), got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("plane features must be finite")
        for lo, hi in (self.extent_a, self.extent_b):
            if not lo < hi:
                raise ValueError(f"bad extent ({lo}, {hi})")
        f.setflags(write=False)
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "extent_a", (float(self.extent_a[0]), float(self.extent_a[1])))
        object.__setattr__(self, "extent_b", (float(self.extent_b[0]), float(self.extent_b[1])))

    @property
    def channels(self) -> int:
        return self.features.shape[2]

    @property
    def cell_size(self) -> tuple[float, float]:
        na, nb = self.features.shape[:2]
        return (
            (self.extent_a[1] - self.extent_a[0]) / (na - 1),
            (self.extent_b[1] - self.extent_b[0]) / (nb - 1),
        )

    def node_position(self, i, j) -> np.ndarray:
        ca, cb = self.cell_size
        return np.stack(
            [self.extent_a[0] + np.asarray(i) * ca, self.extent_b[0] + np.asarray(j) * cb], axis=-1
        )

    def to_grid(self, p) -> np.ndarray:
        """World (a, b) -> continuous grid coordinates (i, j)."""
        p = np.asarray(p, dtype=float)
        ca, cb = self.cell_size
        return np.stack(
            [(p[..., 0] - self.extent_a[0]) / ca, (p[..., 1] - self.extent_b[0]) / cb], axis=-1
        )

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        (a0, a1), (b0, b1) = self.extent_a, self.extent_b
        return (p[..., 0] >= a0) & (p[..., 0] <= a1) & (p[..., 1] >= b0) & (p[..., 1] <= b1)


def _locate(plane: FeaturePlane, p):
    """Cell indices and in-cell fractions for points (..., 2)."""
    p = np.asarray(p, dtype=float)
    if not np.all(plane.contains(p)):
        raise ExtentError(f"point outside the {plane.label} plane extents")
    g = plane.to_grid(p)
    na, nb = plane.features.shape[:2]
    i0 = np.clip(np.floor(g[..., 0]).astype(np.int64), 0, na - 2)
    j0 = np.clip(np.floor(g[..., 1]).astype(np.int64), 0, nb - 2)
    return i0, j0, g[..., 0] - i0, g[..., 1] - j0


def bilinear_sample(plane: FeaturePlane, p) -> np.ndarray:
    """Bilinear feature lookup at world position(s) ``p`` (..., 2) -> (..., C)."""
    i0, j0, fa, fb = _locate(plane, p)
    F = plane.features
    fa = fa[..., None]
    fb = fb[..., None]
    return (
        (1 - fa) * (1 - fb) * F[i0, j0]
        + fa * (1 - fb) * F[i0 + 1, j0]
        + (1 - fa) * fb * F[i0, j0 + 1]
        + fa * fb * F[i0 + 1, j0 + 1]
    )


def bilinear_grad(plane: FeaturePlane, p) -> tuple[np.ndarray, np.ndarray | bool]:
    """Jacobian of :func:`bilinear_sample` w.r.t. world coordinates.

    Returns ``(jac, on_boundary)`` where ``jac`` has shape (..., C, 2) and
    ``on_boundary`` flags points within 1e-9 (in cell units) of a cell edge,
    where the derivative returned is the one-sided one of the lower cell.
    """
    i0, j0, fa, fb = _locate(plane, p)
    F = plane.features
    ca, cb = plane.cell_size
    fa_ = fa[..., None]
    fb_ = fb[..., None]
    d_a = ((1 - fb_) * (F[i0 + 1, j0] - F[i0, j0]) + fb_ * (F[i0 + 1, j0 + 1] - F[i0, j0 + 1])) / ca
    d_b = ((1 - fa_) * (F[i0, j0 + 1] - F[i0, j0]) + fa_ * (F[i0 + 1, j0 + 1] - F[i0 + 1, j0])) / cb
    jac = np.stack([d_a, d_b], axis=-1)
    boundary = (
        (fa < BOUNDARY_EPS) | (fa > 1 - BOUNDARY_EPS) | (fb < BOUNDARY_EPS) | (fb > 1 - BOUNDARY_EPS)
    )
    if np.ndim(boundary) == 0:
        boundary = bool(boundary)
    return jac, boundary


@dataclass(frozen=True)
class Triplane:
    xy: FeaturePlane
    xz: FeaturePlane
    yz: FeaturePlane

    def __post_init__(self) -> None:
        for label in PLANES:
            if getattr(self, label).label != label:
                raise ValueError(f"plane in slot {label} is labelled {getattr(self, label).label}")
        c = {p.channels for p in self.planes()}
        if len(c) != 1:
            raise ValueError(f"planes disagree on channel count: {sorted(c)}")
        shared = [
            (self.xy.extent_a, self.xz.extent_a),
            (self.xy.extent_b, self.yz.extent_a),
            (self.xz.extent_b, self.yz.extent_b),
        ]
        for first, second in shared:
            if first != second:
                raise ValueError(f"shared axis extents differ: {first} vs {second}")

    def planes(self) -> tuple[FeaturePlane, FeaturePlane, FeaturePlane]:
        return (self.xy, self.xz, self.yz)

    @property
    def channels(self) -> int:
        return self.xy.channels

    @property
    def extents(self) -> dict[str, tuple[float, float]]:
        return {"x": self.xy.extent_a, "y": self.xy.extent_b, "z": self.xz.extent_b}

    def plane(self, label: str) -> FeaturePlane:
        return getattr(self, label)

    def with_plane(self, label: str, features: np.ndarray) -> "Triplane":
        """Functional update: a new triplane with one plane's features replaced."""
        return replace(self, **{label: replace(self.plane(label), features=features)})

    def __add__(self, other: "Triplane") -> "Triplane":
        return Triplane(
            *(replace(a, features=a.features + b.features) for a, b in zip(self.planes(), other.planes()))
        )

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[:-1], dtype=bool)
        for axis, (lo, hi) in self.extents.items():
            c = x[..., AXIS_INDEX[axis]]
            out &= (c >= lo) & (c <= hi)
        return out

    @classmethod
    def from_arrays(
        cls,
        xy: np.ndarray,
        xz: np.ndarray,
        yz: np.ndarray,
        x_extent=(-100.0, 100.0),
        y_extent=(-100.0, 100.0),
        z_extent=(0.0, 50.0),
    ) -> "Triplane":
        return cls(
            FeaturePlane("xy", xy, x_extent, y_extent),
            FeaturePlane("xz", xz, x_extent, z_extent),
            FeaturePlane("yz", yz, y_extent, z_extent),
        )

    @classmethod
    def random(
        cls,
        rng: np.random.Generator,
        channels: int = 32,
        resolution: int = 256,
        z_resolution: int | None = None,
        **extents,
    ) -> "Triplane":
        """Gaussian random features; the default footprint is 200 m x 200 m x 50 m."""
        nz = z_resolution or resolution
        return cls.from_arrays(
            rng.standard_normal((resolution, resolution, channels)),
            rng.standard_normal((resolution, nz, channels)),
            rng.standard_normal((resolution, nz, channels)),
            **extents,
        )

    @classmethod
    def constant(cls, value, channels: int, resolution: int = 8, **extents) -> "Triplane":
        full = np.full((resolution, resolution, channels), value, dtype=float)
        zero = np.zeros_like(full)
        return cls.from_arrays(full, zero, zero.copy(), **extents)


def _projections(x: np.ndarray):
    return {
        "xy": x[..., [0, 1]],
        "xz": x[..., [0, 2]],
        "yz": x[..., [1, 2]],
    }


def sample_3d(tp: Triplane, x) -> np.ndarray:
    """Triplane feature at 3-D point(s): sum of the three plane samples."""
    x = np.asarray(x, dtype=float)
    out = 0.0
    for label, p in _projections(x).items():
        try:
            out = out + bilinear_sample(tp.plane(label), p)
        except ExtentError as exc:
            raise ExtentError(f"{label} plane: projection of point outside extents") from exc
    return out


def sample_3d_grad(tp: Triplane, x) -> tuple[np.ndarray, np.ndarray]:
    """Jacobian of :func:`sample_3d` w.r.t. (x, y, z): (..., C, 3), plus boundary flags."""
    x = np.asarray(x, dtype=float)
    proj = _projections(x)
    j_xy, b_xy = bilinear_grad(tp.xy, proj["xy"])
    j_xz, b_xz = bilinear_grad(tp.xz, proj["xz"])
    j_yz, b_yz = bilinear_grad(tp.yz, proj["yz"])
    jac = np.stack(
        [
            j_xy[..., 0] + j_xz[..., 0],
            j_xy[..., 1] + j_yz[..., 0],
            j_xz[..., 1] + j_yz[..., 1],
        ],
        axis=-1,
    )
    return jac, np.asarray(b_xy) | np.asarray(b_xz) | np.asarray(b_yz)


# --- reference sets -------------------------------------------------------

# For an anchor on one plane: the axis it lacks, and which plane samples a
# point (anchor_a, anchor_b, missing) on each of the other two planes.
_MISSING_AXIS = {"xy": "z", "xz": "y", "yz": "x"}


@dataclass(frozen=True)
class ReferenceSet:
    """Features gathered for one anchor point.

    ``sources`` holds one descriptor per row of ``features``:
    ``("plane", label, (a, b))`` or ``("image", frame_index, (u, v))``.
    ``skipped`` lists ``(sample_value, frame_index)`` pairs dropped because the
    3-D sample coincided with a camera center.
    """

    anchor_plane: str
    anchor: tuple[float, float]
    sources: tuple
    features: np.ndarray
    skipped: tuple = field(default=())

    def __len__(self) -> int:
        return len(self.sources)


def anchor_point(anchor_plane: str, anchor, value: float) -> np.ndarray:
    """3-D point with the anchor's two coordinates and ``value`` on the missing axis."""
    a, b = float(anchor[0]), float(anchor[1])
    axes = anchor_plane
    pt = np.empty(3)
    pt[AXIS_INDEX[axes[0]]] = a
    pt[AXIS_INDEX[axes[1]]] = b
    pt[AXIS_INDEX[_MISSING_AXIS[anchor_plane]]] = value
    return pt


def default_axis_samples(tp: Triplane, anchor_plane: str, count: int = 8) -> np.ndarray:
    """``count`` cell-centered samples across the anchor's missing axis."""
    lo, hi = tp.extents[_MISSING_AXIS[anchor_plane]]
    return lo + (np.arange(count) + 0.5) * (hi - lo) / count


def cvha_reference_set(tp: Triplane, anchor_plane: str, anchor, samples: Sequence[float]) -> ReferenceSet:
    """Anchor feature plus the two orthogonal-plane samples per missing-axis value.

    For an XY anchor (x, y) and depths z_i the set is
    ``[F_xy(x, y)] + [F_xz(x, z_i), F_yz(y, z_i) for each i]``; XZ and YZ
    anchors use the analogous permutation.
    """
    if anchor_plane not in PLANES:
        raise ValueError(f"unknown plane {anchor_plane!r}")
    anchor = (float(anchor[0]), float(anchor[1]))
    others = [p for p in PLANES if p != anchor_plane]
    sources = [("plane", anchor_plane, anchor)]
    for s in samples:
        pt = anchor_point(anchor_plane, anchor, s)
        for label in others:
            c = (float(pt[AXIS_INDEX[label[0]]]), float(pt[AXIS_INDEX[label[1]]]))
            sources.append(("plane", label, c))
    feats = np.empty((len(sources), tp.channels))
    for idx, (_, label, c) in enumerate(sources):
        try:
            feats[idx] = bilinear_sample(tp.plane(label), c)
        except ExtentError as exc:
            raise ExtentError(f"reference sample {c} outside the {label} plane") from exc
    return ReferenceSet(anchor_plane, anchor, tuple(sources), feats)


def sample_image(features: np.ndarray, u, v) -> np.ndarray:
    """Bilinear lookup in an (H, W, C) panorama feature map at continuous (u, v).

    Pixel centers are at half-integers; columns wrap around horizontally and
    rows clamp at the poles.
    """
    H, W = features.shape[:2]
    x = np.asarray(u, dtype=float) - 0.5
    y = np.clip(np.asarray(v, dtype=float) - 0.5, 0.0, H - 1.0)
    j0f = np.floor(x)
    fx = (x - j0f)[..., None]
    j0 = j0f.astype(np.int64) % W
    j1 = (j0 + 1) % W
    i0 = np.minimum(np.floor(y).astype(np.int64), H - 2)
    fy = (y - i0)[..., None]
    return (
        (1 - fx) * (1 - fy) * features[i0, j0]
        + fx * (1 - fy) * features[i0, j1]
        + (1 - fx) * fy * features[i0 + 1, j0]
        + fx * fy * features[i0 + 1, j1]
    )


def ica_reference_set(
    tp: Triplane,
    anchor_plane: str,
    anchor,
    samples: Sequence[float],
    frames: Sequence[tuple[np.ndarray, PoseSE3]],
    grid: EquirectGrid,
) -> ReferenceSet:
    """Image features for the anchor's 3-D samples in previously generated frames.

    Each sample point P_i is projected into frame j at ``P(R_j P_i + t_j)``
    and that frame's feature map is bilinearly sampled there.
    """
    if not frames:
        raise ValueError("ica_reference_set needs at least one frame")
    anchor = (float(anchor[0]), float(anchor[1]))
    sources, feats, skipped = [], [], []
    for s in samples:
        pt = anchor_point(anchor_plane, anchor, s)
        if not tp.contains(pt):
            raise ExtentError(f"sample point {pt.tolist()} outside triplane extents")
        for j, (fmap, pose) in enumerate(frames):
            if fmap.shape[:2] != grid.shape:
                raise ValueError(f"frame {j} feature map {fmap.shape[:2]} does not match grid {grid.shape}")
            try:
                u, v = project_point(pt, pose, grid)
            except DegenerateProjectionError:
                skipped.append((float(s), j))
                continue
            sources.append(("image", j, (u, v)))
            feats.append(sample_image(fmap, u, v))
    C = frames[0][0].shape[2]
    arr = np.array(feats).reshape(len(feats), C)
    return ReferenceSet(anchor_plane, anchor, tuple(sources), arr, tuple(skipped))


def attention_aggregate(query: np.ndarray, refs: ReferenceSet, params: AttentionParams) -> np.ndarray:
    """Single-query scaled dot-product attention over a reference set."""
    q = np.asarray(query, dtype=float)
    if q.shape != (params.channels,) or refs.features.shape[1] != params.channels:
        raise ValueError("query/reference channel count does not match attention parameters")
    if len(refs) == 0:
        raise ValueError("empty reference set")
    return full_attention(q[None, :], refs.features, params)[0]


def plane_node_count(tp: Triplane) -> int:
    return sum(math.prod(p.features.shape[:2]) for p in tp.planes())
