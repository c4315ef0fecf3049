"""Equirectangular camera model.

Conventions:
  - World Z is up, the XY plane is the ground.
  - Camera forward (yaw 0, pitch 0) is +X, yaw grows towards +Y.
  - Unit direction: d = (cos(pitch) cos(yaw), cos(pitch) sin(yaw), sin(pitch)).
  - Pixel coordinates are continuous; pixel (i, j) has its center at
    (u, v) = (j + 0.5, i + 0.5). Column u = W/2 is yaw 0, row v = 0 is the
    zenith and v = H is the nadir.
  - ``PoseSE3`` is a world-to-camera transform: X_cam = R @ X_world + t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Base class for degenerate or out-of-domain geometry."""


class PixelDomainError(GeometryError):
    pass


class DegenerateProjectionError(GeometryError):
    pass


@dataclass(frozen=True)
class EquirectGrid:
    width: int = 512
    height: int = 128

    def __post_init__(self) -> None:
        if self.width < 2 or self.height < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.width}x{self.height}")
        if self.width % 2:
            raise ValueError(f"grid width must be even, got {self.width}")

    @property
    def shape(self) -> tuple[int, int]:
        """(rows, cols), i.e. (H, W)."""
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.width * self.height

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (u, v) arrays of shape (H, W) holding every pixel center."""
        u = np.arange(self.width) + 0.5
        v = np.arange(self.height) + 0.5
        uu, vv = np.meshgrid(u, v)
        return uu, vv

    @classmethod
    def parse(cls, text: str) -> "EquirectGrid":
        """Parse ``"WxH"``, e.g. ``"512x128"``."""
        try:
            w, h = text.lower().split("x")
            return cls(int(w), int(h))
        except ValueError as exc:
            raise ValueError(f"bad grid {text!r}, expected WxH") from exc


@dataclass(frozen=True)
class RayDir:
    """Yaw/pitch pair and the matching unit vector. Fields may be arrays."""

    yaw: np.ndarray | float
    pitch: np.ndarray | float
    direction: np.ndarray = field(repr=False)


def wrap_yaw(yaw):
    """Map an angle into [-pi, pi)."""
    return np.mod(np.asarray(yaw, dtype=float) + math.pi, TWO_PI) - math.pi


def angles_to_unit(yaw, pitch) -> np.ndarray:
    yaw = np.asarray(yaw, dtype=float)
    pitch = np.asarray(pitch, dtype=float)
    cp = np.cos(pitch)
    return np.stack([cp * np.cos(yaw), cp * np.sin(yaw), np.sin(pitch)], axis=-1)


def unit_to_angles(d) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`angles_to_unit`.

    At the poles the yaw is undefined; 0 is returned there. Yaw is reported
    in [-pi, pi).
    """
    d = np.asarray(d, dtype=float)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    horiz = np.hypot(x, y)
    pitch = np.arctan2(z, horiz)
    yaw = np.arctan2(y, x)
    yaw = np.where(yaw >= math.pi, yaw - TWO_PI, yaw)
    yaw = np.where(horiz == 0.0, 0.0, yaw)
    if yaw.ndim == 0:
        return float(yaw), float(pitch)
    return yaw, pitch


def pixel_to_angles(u, v, grid: EquirectGrid) -> RayDir:
    """Ray angles of a (continuous) pixel position.

    Valid for 0 <= u < W and 0 <= v <= H; raises :class:`PixelDomainError`
    otherwise.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    W, H = grid.width, grid.height
    if np.any(~np.isfinite(u)) or np.any(~np.isfinite(v)):
        raise PixelDomainError("pixel coordinates must be finite")
    if np.any(u < 0) or np.any(u >= W) or np.any(v < 0) or np.any(v > H):
        raise PixelDomainError(f"pixel outside [0, {W}) x [0, {H}]")
    yaw = (u - W / 2) / W * TWO_PI
    pitch = (H / 2 - v) / H * math.pi
    if yaw.ndim == 0:
        yaw, pitch = float(yaw), float(pitch)
    return RayDir(yaw, pitch, angles_to_unit(yaw, pitch))


def angles_to_pixel(ray: RayDir, grid: EquirectGrid) -> tuple:
    """Exact inverse of :func:`pixel_to_angles`."""
    W, H = grid.width, grid.height
    u = W / 2 + np.asarray(ray.yaw, dtype=float) * W / TWO_PI
    v = H / 2 - np.asarray(ray.pitch, dtype=float) * H / math.pi
    if u.ndim == 0:
        return float(u), float(v)
    return u, v


def ray_from_angles(yaw, pitch) -> RayDir:
    return RayDir(yaw, pitch, angles_to_unit(yaw, pitch))


def ray_from_unit(d) -> RayDir:
    d = np.asarray(d, dtype=float)
    yaw, pitch = unit_to_angles(d)
    return RayDir(yaw, pitch, d)


def direction_to_pixel(d, grid: EquirectGrid) -> tuple:
    """Pixel of a (not necessarily unit) camera-frame direction."""
    d = np.asarray(d, dtype=float)
    norm = np.linalg.norm(d, axis=-1, keepdims=True)
    return angles_to_pixel(ray_from_unit(d / norm), grid)


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class PoseSE3:
    """Rigid world-to-camera transform ``X_cam = R @ X_world + t``."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self) -> None:
        R = np.asarray(self.R, dtype=float).reshape(3, 3)
        t = np.asarray(self.t, dtype=float).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-10, rtol=0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-10:
            raise ValueError("rotation must have determinant +1")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls(np.eye(3), np.zeros(3))

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.R.T @ self.t

    def apply(self, points) -> np.ndarray:
        """Transform world points (..., 3) into camera coordinates."""
        return np.asarray(points, dtype=float) @ self.R.T + self.t

    def inverse(self) -> "PoseSE3":
        return PoseSE3(self.R.T, -self.R.T @ self.t)

    def compose(self, other: "PoseSE3") -> "PoseSE3":
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        return PoseSE3(self.R @ other.R, self.R @ other.t + self.t)

    __matmul__ = compose

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.t
        return T


@dataclass(frozen=True)
class Pose4DoF:
    """Ground-camera pose: world position (x, y, z) in meters plus yaw."""

    t: np.ndarray
    yaw: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(3))
        object.__setattr__(self, "yaw", float(wrap_yaw(self.yaw)))


def pose4dof_to_se3(p: Pose4DoF) -> PoseSE3:
    """World-to-camera pose of a camera at ``p.t`` looking along yaw ``p.yaw``.

    The camera's forward axis (+X in camera frame) maps to world direction
    ``rot_z(yaw) @ e_x``; hence R = rot_z(yaw).T and t = -R @ position.
    """
    R = rot_z(p.yaw).T
    return PoseSE3(R, -R @ p.t)


def project_point(Q, pose: PoseSE3, grid: EquirectGrid) -> tuple:
    """Pixel of world point(s) ``Q`` seen from ``pose``."""
    Xc = pose.apply(Q)
    norm = np.linalg.norm(Xc, axis=-1, keepdims=True)
    if np.any(norm == 0.0):
        raise DegenerateProjectionError("point coincides with the camera center")
    return angles_to_pixel(ray_from_unit(Xc / norm), grid)
