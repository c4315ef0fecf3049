"""Ray-based pixel attention over a triplane.

For pixel (u, v) the camera ray is sampled at K evenly spaced depths r_k,
each sample is shifted by a per-head offset and looked up in the triplane:

    F(u, v) = sum_j W_j sum_k A[k, j] * F_triplane(x_k + dx[k, j])

with A = softmax over k of free logits, so every head's weights sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .camera import EquirectGrid, PoseSE3, pixel_to_angles
from .triplane import ExtentError, Triplane, sample_3d, sample_3d_grad

FREE = "free"
ALONG_RAY = "along_ray"


@dataclass(frozen=True)
class RaySampleConfig:
    K: int = 32
    r_min: float = 1.0
    r_max: float = 100.0
    J: int = 8

    def __post_init__(self) -> None:
        if self.K < 1 or self.J < 1:
            raise ValueError("K and J must be >= 1")
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")

    def depths(self) -> np.ndarray:
        if self.K == 1:
            return np.array([self.r_min])
        return self.r_min + np.arange(self.K) * (self.r_max - self.r_min) / (self.K - 1)


@dataclass(frozen=True)
class RayAttentionParams:
    """Head weights (J,) or (J, C), logits (K, J), offsets (K, J, 3) or (K, J).

    In ``along_ray`` mode offsets are signed distances along the ray.
    """

    head_weights: np.ndarray
    logits: np.ndarray
    offsets: np.ndarray
    mode: str = FREE

    def __post_init__(self) -> None:
        hw = np.asarray(self.head_weights, dtype=float)
        lg = np.asarray(self.logits, dtype=float)
        off = np.asarray(self.offsets, dtype=float)
        if lg.ndim != 2:
            raise ValueError("logits must be (K, J)")
        K, J = lg.shape
        if hw.shape[0] != J or hw.ndim not in (1, 2):
            raise ValueError(f"head_weights must be (J,) or (J, C) with J={J}")
        want = (K, J, 3) if self.mode == FREE else (K, J)
        if self.mode not in (FREE, ALONG_RAY):
            raise ValueError(f"unknown offset mode {self.mode!r}")
        if off.shape != want:
            raise ValueError(f"offsets must be {want} in {self.mode} mode, got {off.shape}")
        for a in (hw, lg, off):
            if not np.all(np.isfinite(a)):
                raise ValueError("parameters must be finite")
        object.__setattr__(self, "head_weights", hw)
        object.__setattr__(self, "logits", lg)
        object.__setattr__(self, "offsets", off)

    @property
    def K(self) -> int:
        return self.logits.shape[0]

    @property
    def J(self) -> int:
        return self.logits.shape[1]

    def weights(self) -> np.ndarray:
        """A[k, j]: softmax over depth samples, per head."""
        z = self.logits - self.logits.max(axis=0, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=0, keepdims=True)

    @classmethod
    def initial(cls, cfg: RaySampleConfig, mode: str = FREE, channels: int | None = None) -> "RayAttentionParams":
        """Zero offsets, uniform weights, head weights 1/J."""
        hw = np.full(cfg.J, 1.0 / cfg.J) if channels is None else np.full((cfg.J, channels), 1.0 / cfg.J)
        off = np.zeros((cfg.K, cfg.J, 3) if mode == FREE else (cfg.K, cfg.J))
        return cls(hw, np.zeros((cfg.K, cfg.J)), off, mode)

    def zeros_like(self) -> "RayAttentionParams":
        return replace(
            self,
            head_weights=np.zeros_like(self.head_weights),
            logits=np.zeros_like(self.logits),
            offsets=np.zeros_like(self.offsets),
        )


def world_ray(pose: PoseSE3, pixel, grid: EquirectGrid) -> tuple[np.ndarray, np.ndarray]:
    """Camera center and world-frame unit direction of a pixel's ray."""
    d_cam = pixel_to_angles(pixel[0], pixel[1], grid).direction
    return pose.center, pose.R.T @ d_cam


def sample_ray_points(pose: PoseSE3, pixel, grid: EquirectGrid, cfg: RaySampleConfig) -> np.ndarray:
    center, d = world_ray(pose, pixel, grid)
    return center + cfg.depths()[:, None] * d


def _perturbed(pose, pixel, grid, cfg, params) -> tuple[np.ndarray, np.ndarray]:
    if (params.K, params.J) != (cfg.K, cfg.J):
        raise ValueError(f"params are K={params.K}, J={params.J}; config says K={cfg.K}, J={cfg.J}")
    base = sample_ray_points(pose, pixel, grid, cfg)
    _, d = world_ray(pose, pixel, grid)
    if params.mode == FREE:
        delta = params.offsets
    else:
        delta = params.offsets[..., None] * d
    return base[:, None, :] + delta, d


def _check_extents(tp: Triplane, pts: np.ndarray) -> None:
    inside = tp.contains(pts)
    if not inside.all():
        k, j = map(int, np.argwhere(~inside)[0])
        raise ExtentError(f"ray sample (k={k}, j={j}) at {pts[k, j].tolist()} is outside the triplane")


def _combine(params: RayAttentionParams, per_head: np.ndarray) -> np.ndarray:
    """sum_j W_j * per_head[j] for per_head of shape (J, C)."""
    hw = params.head_weights
    if hw.ndim == 1:
        return hw @ per_head
    return (hw * per_head).sum(axis=0)


def ray_pixel_attention(
    tp: Triplane,
    pose: PoseSE3,
    pixel,
    grid: EquirectGrid,
    cfg: RaySampleConfig,
    params: RayAttentionParams,
) -> np.ndarray:
    pts, _ = _perturbed(pose, pixel, grid, cfg, params)
    _check_extents(tp, pts)
    F = sample_3d(tp, pts)  # (K, J, C)
    A = params.weights()
    per_head = np.einsum("kj,kjc->jc", A, F)
    return _combine(params, per_head)


@dataclass(frozen=True)
class RayAttentionGrad:
    """Jacobians of the output feature (C,) w.r.t. each parameter group.

    Shapes: ``logits`` (C, K, J); ``offsets`` (C, K, J, 3) or (C, K, J);
    ``head_weights`` (C, J) or (C, J, C). ``on_boundary`` (K, J) flags samples
    where the offset derivative is one-sided.
    """

    logits: np.ndarray
    offsets: np.ndarray
    head_weights: np.ndarray
    on_boundary: np.ndarray
    mode: str = FREE

    def vjp(self, upstream) -> RayAttentionParams:
        """Gradient of ``upstream . output`` packed as a parameter set."""
        g = np.asarray(upstream, dtype=float)
        return RayAttentionParams(
            head_weights=np.tensordot(g, self.head_weights, axes=(0, 0)),
            logits=np.tensordot(g, self.logits, axes=(0, 0)),
            offsets=np.tensordot(g, self.offsets, axes=(0, 0)),
            mode=self.mode,
        )


def ray_attention_grad(
    tp: Triplane,
    pose: PoseSE3,
    pixel,
    grid: EquirectGrid,
    cfg: RaySampleConfig,
    params: RayAttentionParams,
) -> RayAttentionGrad:
    pts, d = _perturbed(pose, pixel, grid, cfg, params)
    _check_extents(tp, pts)
    F = sample_3d(tp, pts)  # (K, J, C)
    JF, boundary = sample_3d_grad(tp, pts)  # (K, J, C, 3)
    A = params.weights()
    K, J, C = F.shape
    hw = params.head_weights
    w_jc = np.broadcast_to(hw[:, None], (J, C)) if hw.ndim == 1 else hw  # (J, C)

    mean = np.einsum("kj,kjc->jc", A, F)
    # softmax Jacobian: d out / d a[k,j] = W_j * A[k,j] * (F[k,j] - mean_j)
    d_logits = np.einsum("jc,kj,kjc->ckj", w_jc, A, F - mean[None])
    d_off = np.einsum("jc,kj,kjcd->ckjd", w_jc, A, JF)
    if params.mode == ALONG_RAY:
        d_off = d_off @ d
    if hw.ndim == 1:
        d_hw = mean.T  # (C, J)
    else:
        d_hw = np.zeros((C, J, C))
        d_hw[np.arange(C), :, np.arange(C)] = mean.T
    return RayAttentionGrad(d_logits, d_off, d_hw, np.asarray(boundary), params.mode)


def refine_step(params: RayAttentionParams, grads: RayAttentionParams, step_size: float) -> RayAttentionParams:
    """One gradient-descent step on logits, offsets and head weights.

    Weights are recomputed from the updated logits, so the per-head
    normalization holds after any step.
    """
    if not step_size > 0:
        raise ValueError("step_size must be positive")
    return replace(
        params,
        head_weights=params.head_weights - step_size * grads.head_weights,
        logits=params.logits - step_size * grads.logits,
        offsets=params.offsets - step_size * grads.offsets,
    )


def squared_error(tp, pose, pixel, grid, cfg, params, target) -> float:
    out = ray_pixel_attention(tp, pose, pixel, grid, cfg, params)
    return 0.5 * float(np.sum((out - target) ** 2))


def squared_error_grad(tp, pose, pixel, grid, cfg, params, target) -> RayAttentionParams:
    out = ray_pixel_attention(tp, pose, pixel, grid, cfg, params)
    return ray_attention_grad(tp, pose, pixel, grid, cfg, params).vjp(out - np.asarray(target))


def default_offset_scale(tp: Triplane) -> float:
    """A tenth of the smallest triplane cell, handy for random offsets in tests."""
    return 0.1 * min(min(p.cell_size) for p in tp.planes())


__all__ = [
    "ALONG_RAY",
    "FREE",
    "RayAttentionGrad",
    "RayAttentionParams",
    "RaySampleConfig",
    "default_offset_scale",
    "ray_attention_grad",
    "ray_pixel_attention",
    "refine_step",
    "sample_ray_points",
    "squared_error",
    "squared_error_grad",
    "world_ray",
]
