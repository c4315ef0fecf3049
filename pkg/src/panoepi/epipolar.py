"""Epipolar geometry between two equirectangular panoramas.

For frames m and n with X_n = R_mn X_m + t_mn, corresponding unit directions
satisfy ``d_n.T @ E @ d_m = 0`` with ``E = skew(t_mn) @ R_mn``. On the sphere the
zero set for a fixed query is the great circle with normal ``n = E @ d_m``.
Per target column (yaw psi') the circle's pitch solves

    tan(theta') = -(n_x cos psi' + n_y sin psi') / n_z

which gives an O(W) rasterization of the candidate set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import (
    EquirectGrid,
    GeometryError,
    PoseSE3,
    angles_to_unit,
    direction_to_pixel,
    pixel_to_angles,
)

DEGENERATE_EPS = 1e-9
# threshold for callers who want a residual-thresholded mask rather than the band
DEFAULT_EPS = 1e-3


class DegenerateBaselineError(GeometryError):
    """Two frames share a camera center; every pixel pair is consistent."""


def skew(t) -> np.ndarray:
    t = np.asarray(t, dtype=float).reshape(3)
    return np.array(
        [
            [0.0, -t[2], t[1]],
            [t[2], 0.0, -t[0]],
            [-t[1], t[0], 0.0],
        ]
    )


def relative_pose(pose_m: PoseSE3, pose_n: PoseSE3) -> PoseSE3:
    """Transform taking frame-m camera coordinates to frame-n camera coordinates."""
    R = pose_n.R @ pose_m.R.T
    return PoseSE3(R, pose_n.t - R @ pose_m.t)


@dataclass(frozen=True)
class EssentialMatrix:
    E: np.ndarray
    m: int = 0
    n: int = 1

    @property
    def baseline(self) -> float:
        """Norm of the translation it was built from (singular values are |t|, |t|, 0)."""
        return float(np.linalg.norm(self.E) / math.sqrt(2.0))

    def transpose(self) -> "EssentialMatrix":
        """Essential matrix of the reverse direction n -> m."""
        return EssentialMatrix(self.E.T.copy(), self.n, self.m)


def essential(rel: PoseSE3, m: int = 0, n: int = 1) -> EssentialMatrix:
    if np.linalg.norm(rel.t) <= 1e-12:
        raise DegenerateBaselineError(f"zero baseline between frames {m} and {n}")
    return EssentialMatrix(skew(rel.t) @ rel.R, m, n)


def _as_matrix(E) -> np.ndarray:
    return E.E if isinstance(E, EssentialMatrix) else np.asarray(E, dtype=float)


def _pixel_dirs(px, grid: EquirectGrid) -> np.ndarray:
    px = np.asarray(px, dtype=float)
    return pixel_to_angles(px[..., 0], px[..., 1], grid).direction


def residual(px_m, px_n, E, grid: EquirectGrid, normalize: bool = False):
    """Bilinear epipolar residual ``d_n . (E d_m)`` for pixel(s) in frame m and n.

    With ``normalize=True`` the value is divided by the baseline length, making
    it the (signed) cosine between ``d_n`` and the unit circle normal scaled by
    ``|n|/|t| <= 1``; that form is invariant to the translation scale.
    """
    Em = _as_matrix(E)
    dm = _pixel_dirs(px_m, grid)
    dn = _pixel_dirs(px_n, grid)
    r = np.einsum("...i,ij,...j->...", dn, Em, dm)
    if normalize:
        r = r / (np.linalg.norm(Em) / math.sqrt(2.0))
    return float(r) if np.ndim(r) == 0 else r


@dataclass(frozen=True)
class EpipolarCurve:
    """Curve samples in the target frame.

    ``u``/``v`` hold one point per non-degenerate column. ``full_columns``
    lists columns lying entirely on the great circle. ``at_epipole`` marks a
    query whose circle is undefined (every pixel is a candidate).
    """

    u: np.ndarray
    v: np.ndarray
    full_columns: np.ndarray
    at_epipole: bool = False


def _circle_normal(px_m, E, grid: EquirectGrid) -> np.ndarray:
    Em = _as_matrix(E)
    return _pixel_dirs(px_m, grid) @ Em.T


def _column_solve(normals: np.ndarray, yaw: np.ndarray):
    """Closed-form circle pitch per column.

    ``normals`` is (Q, 3), ``yaw`` is (C,). Returns (pitch, ok, full) each of
    shape (Q, C): ``ok`` where a unique crossing exists, ``full`` where the
    whole column lies on the circle.
    """
    scale = np.linalg.norm(normals, axis=-1, keepdims=True)
    scale = np.where(scale == 0.0, 1.0, scale)
    nn = normals / scale
    inplane = nn[:, :1] * np.cos(yaw) + nn[:, 1:2] * np.sin(yaw)
    nz = np.broadcast_to(nn[:, 2:3], inplane.shape)
    flat_nz = np.abs(nz) < DEGENERATE_EPS
    full = flat_nz & (np.abs(inplane) < DEGENERATE_EPS)
    ok = ~flat_nz
    with np.errstate(divide="ignore", invalid="ignore"):
        pitch = np.where(ok, np.arctan(-inplane / np.where(ok, nz, 1.0)), 0.0)
    return pitch, ok, full


def _is_epipole_query(normals: np.ndarray, E) -> np.ndarray:
    scale = np.linalg.norm(_as_matrix(E))
    return np.linalg.norm(normals, axis=-1) <= DEGENERATE_EPS * scale


def epipolar_curve(px_m, E, grid: EquirectGrid, columns=None) -> EpipolarCurve:
    """Trace the epipolar curve of query pixel ``px_m`` in the target frame.

    ``columns`` are the target u' positions to evaluate (default: every
    column center).
    """
    W, H = grid.width, grid.height
    u = np.arange(W) + 0.5 if columns is None else np.asarray(columns, dtype=float)
    n = _circle_normal(px_m, E, grid).reshape(1, 3)
    if _is_epipole_query(n, E)[0]:
        empty = np.empty(0)
        return EpipolarCurve(empty, empty, empty, at_epipole=True)
    yaw = (u - W / 2) / W * 2.0 * math.pi
    pitch, ok, full = _column_solve(n, yaw)
    pitch, ok, full = pitch[0], ok[0], full[0]
    v = H / 2 - pitch[ok] * H / math.pi
    return EpipolarCurve(u[ok], v, u[full])


@dataclass(frozen=True)
class EpipolarMask:
    """Candidate target pixels for one query pixel.

    ``candidates`` is (M, 2) of pixel-center (u', v') coordinates sorted by u'
    then v'. ``tolerance`` bounds the baseline-normalized residual of every
    candidate. ``full`` is set for a query sitting on an epipole.
    """

    query: tuple[float, float]
    candidates: np.ndarray
    tolerance: float
    full: bool = False

    @property
    def count(self) -> int:
        return len(self.candidates)

    def flat_indices(self, grid: EquirectGrid) -> np.ndarray:
        """Row-major pixel indices ``row * W + col``."""
        cols = np.floor(self.candidates[:, 0]).astype(np.int64)
        rows = np.floor(self.candidates[:, 1]).astype(np.int64)
        return rows * grid.width + cols


def band_tolerance(grid: EquirectGrid, band_halfwidth: int) -> float:
    """Residual bound implied by a band of ``band_halfwidth`` rows.

    Every pixel center in the band is within (b + 1/2) rows, i.e.
    (b + 1/2) * pi / H radians of pitch, of the circle crossing in its
    column; the normalized residual is at most the sine of that angle.
    """
    return math.sin(min((band_halfwidth + 0.5) * math.pi / grid.height, math.pi / 2))


def band_rows(normals: np.ndarray, grid: EquirectGrid, band_halfwidth: int):
    """Rasterize circles for a batch of queries.

    Returns ``rows`` (Q, W, 2b+1) int64 and ``valid`` (Q, W, 2b+1) bool. Full
    columns are not expanded here; they are returned separately as the
    (Q, W) bool ``full``.
    """
    W, H = grid.width, grid.height
    yaw = (np.arange(W) + 0.5 - W / 2) / W * 2.0 * math.pi
    pitch, ok, full = _column_solve(normals, yaw)
    v0 = H / 2 - pitch * H / math.pi
    center = np.minimum(np.floor(v0).astype(np.int64), H - 1)
    offsets = np.arange(-band_halfwidth, band_halfwidth + 1)
    rows = center[..., None] + offsets
    valid = ok[..., None] & (rows >= 0) & (rows < H)
    return rows, valid, full


def _threshold_candidates(query, E, grid: EquirectGrid, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Columns and rows of every pixel with normalized residual at most ``eps``.

    Per column the residual is ``R sin(theta + phi)``, so the passing pitches
    are intervals of half-width ``asin(eps / R)`` around each zero. Rows of
    those intervals, widened by one row, are checked with :func:`residual`.
    """
    W, H = grid.width, grid.height
    Em = _as_matrix(E)
    n = _circle_normal(query, Em, grid) / (np.linalg.norm(Em) / math.sqrt(2.0))
    yaw = (np.arange(W) + 0.5 - W / 2) / W * 2.0 * math.pi
    a = n[0] * np.cos(yaw) + n[1] * np.sin(yaw)
    R = np.hypot(a, n[2])
    phi = np.arctan2(a, n[2])
    with np.errstate(divide="ignore"):
        delta = np.arcsin(np.minimum(eps / R, 1.0))
    cols, rows = [], []
    for k in range(-2, 3):
        center = -phi + k * math.pi
        lo = np.maximum(center - delta, -math.pi / 2)
        hi = np.minimum(center + delta, math.pi / 2)
        # row of pitch theta is H/2 - theta*H/pi - 1/2
        r0 = np.maximum(np.floor(H / 2 - hi * H / math.pi - 0.5).astype(np.int64) - 1, 0)
        r1 = np.minimum(np.ceil(H / 2 - lo * H / math.pi - 0.5).astype(np.int64) + 1, H - 1)
        r1 = np.where(lo <= hi, r1, r0 - 1)
        span = np.maximum(r1 - r0 + 1, 0)
        cols.append(np.repeat(np.arange(W), span))
        starts = np.repeat(r0, span)
        offsets = np.arange(span.sum()) - np.repeat(np.cumsum(span) - span, span)
        rows.append(starts + offsets)
    flat = np.unique(np.concatenate(rows) * W + np.concatenate(cols))
    r, c = np.divmod(flat, W)
    px = np.stack([c + 0.5, r + 0.5], axis=1)
    keep = np.abs(residual(np.broadcast_to(query, px.shape), px, Em, grid, normalize=True)) <= eps
    return c[keep], r[keep]


def epipolar_mask(
    px_m,
    E,
    grid: EquirectGrid,
    band_halfwidth: int = 1,
    eps: float | None = None,
) -> EpipolarMask:
    """Candidate set for query ``px_m``.

    By default this is the rasterized curve plus a vertical band of
    ``band_halfwidth`` rows; every band pixel satisfies :func:`band_tolerance`.
    With ``eps`` the band is replaced by the exact set of pixels whose
    normalized residual is at most ``eps``, found per column in closed form.
    """
    if band_halfwidth < 0:
        raise ValueError("band_halfwidth must be >= 0")
    if eps is not None and eps <= 0:
        raise ValueError("eps must be positive")
    W, H = grid.width, grid.height
    query = (float(px_m[0]), float(px_m[1]))
    n = _circle_normal(query, E, grid).reshape(1, 3)
    if _is_epipole_query(n, E)[0]:
        uu, vv = grid.pixel_centers()
        cand = np.stack([uu.T.ravel(), vv.T.ravel()], axis=1)
        return EpipolarMask(query, cand, 1.0, full=True)

    if eps is not None:
        sel_c, sel_r = _threshold_candidates(query, E, grid, eps)
        tol = eps
    else:
        rows, valid, full = band_rows(n, grid, band_halfwidth)
        rows, valid, full = rows[0], valid[0], full[0]
        cols = np.broadcast_to(np.arange(W)[:, None], rows.shape)
        sel_c, sel_r = cols[valid], rows[valid]
        if full.any():
            fc = np.repeat(np.flatnonzero(full), H)
            fr = np.tile(np.arange(H), int(full.sum()))
            sel_c = np.concatenate([sel_c, fc])
            sel_r = np.concatenate([sel_r, fr])
        tol = band_tolerance(grid, band_halfwidth)
    order = np.lexsort((sel_r, sel_c))
    cand = np.stack([sel_c[order] + 0.5, sel_r[order] + 0.5], axis=1)
    return EpipolarMask(query, cand, tol)


def epipoles(source, grid: EquirectGrid) -> tuple[tuple[float, float], tuple[float, float]]:
    """Both epipoles in the target frame: pixels of +t_mn and -t_mn.

    ``source`` is the relative pose or an essential matrix; for the latter the
    baseline direction is recovered as the left null vector of E, which fixes
    it only up to sign.
    """
    if isinstance(source, PoseSE3):
        t = source.t
    else:
        Em = _as_matrix(source)
        _, s, vt = np.linalg.svd(Em.T)
        t = vt[-1] * (s[0] if s[0] > 0 else 0.0)
    if np.linalg.norm(t) <= 1e-12:
        raise DegenerateBaselineError("epipoles undefined for zero baseline")
    t = t / np.linalg.norm(t)
    a = direction_to_pixel(t, grid)
    b = direction_to_pixel(-t, grid)
    return (float(a[0]), float(a[1])), (float(b[0]), float(b[1]))


def curve_distance(curve: EpipolarCurve, point, grid: EquirectGrid) -> float:
    """Pixel distance from ``point`` to the curve drawn as a polyline.

    Consecutive samples are joined, including the wrap from the last column
    back to the first. Full columns count as vertical segments.
    """
    p = np.asarray(point, dtype=float)
    W = grid.width
    best = math.inf
    if len(curve.u):
        pts = np.stack([curve.u, curve.v], axis=1)
        nxt = np.roll(pts, -1, axis=0)
        nxt[-1, 0] += W
        for shift in (-W, 0.0, W):
            q = p + np.array([shift, 0.0])
            seg = nxt - pts
            denom = np.einsum("ij,ij->i", seg, seg)
            lam = np.clip(np.einsum("ij,ij->i", q - pts, seg) / np.where(denom == 0, 1, denom), 0, 1)
            proj = pts + lam[:, None] * seg
            best = min(best, float(np.min(np.linalg.norm(proj - q, axis=1))))
    for u in curve.full_columns:
        du = abs((p[0] - u + W / 2) % W - W / 2)
        best = min(best, du)
    return best


def direction_grid(grid: EquirectGrid) -> np.ndarray:
    """Unit directions of all pixel centers, shape (H, W, 3)."""
    uu, vv = grid.pixel_centers()
    return pixel_to_angles(uu, vv, grid).direction


__all__ = [
    "DEFAULT_EPS",
    "DegenerateBaselineError",
    "EpipolarCurve",
    "EpipolarMask",
    "EssentialMatrix",
    "angles_to_unit",
    "band_rows",
    "band_tolerance",
    "curve_distance",
    "direction_grid",
    "epipolar_curve",
    "epipolar_mask",
    "epipoles",
    "essential",
    "relative_pose",
    "residual",
    "skew",
]
