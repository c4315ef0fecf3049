"""Panoramic epipolar geometry, triplane sampling and sparse interframe attention."""

from .attention import (
    AttentionParams,
    AttentionStats,
    CandidateMask,
    CostReport,
    cost_model,
    full_attention,
    interframe_attention,
    masked_attention,
)
from .camera import (
    DegenerateProjectionError,
    EquirectGrid,
    GeometryError,
    PixelDomainError,
    Pose4DoF,
    PoseSE3,
    RayDir,
    angles_to_pixel,
    pixel_to_angles,
    pose4dof_to_se3,
    project_point,
)
from .epipolar import (
    DegenerateBaselineError,
    EpipolarCurve,
    EpipolarMask,
    EssentialMatrix,
    epipolar_curve,
    epipolar_mask,
    epipoles,
    essential,
    relative_pose,
    residual,
)
from .ray_attention import RayAttentionParams, RaySampleConfig, ray_attention_grad, ray_pixel_attention
from .sequence import (
    Schedule,
    Trajectory,
    build_frame_masks,
    dense_schedule,
    downscale_grid,
    load_trajectory,
    sparse_schedule,
)
from .triplane import FeaturePlane, Triplane, bilinear_grad, bilinear_sample, sample_3d

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
