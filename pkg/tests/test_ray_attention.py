import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from panoepi.acceptance import check_gradients
from panoepi.camera import EquirectGrid, Pose4DoF, PoseSE3, pose4dof_to_se3
from panoepi.ray_attention import (
    ALONG_RAY,
    FREE,
    RayAttentionParams,
    RaySampleConfig,
    ray_attention_grad,
    ray_pixel_attention,
    refine_step,
    sample_ray_points,
    squared_error,
    squared_error_grad,
    world_ray,
)
from panoepi.triplane import ExtentError, Triplane, sample_3d

GRID = EquirectGrid(512, 128)
POSE = pose4dof_to_se3(Pose4DoF((3.0, -2.0, 8.0), 0.3))
PIXEL = (200.3, 40.2)


@pytest.fixture
def tp(rng):
    return Triplane.random(rng, channels=4, resolution=17, z_resolution=9)


def _random_params(rng, cfg, mode=FREE, per_channel=None):
    shape = (cfg.K, cfg.J, 3) if mode == FREE else (cfg.K, cfg.J)
    hw = rng.uniform(0.1, 1, cfg.J if per_channel is None else (cfg.J, per_channel))
    return RayAttentionParams(hw, rng.standard_normal((cfg.K, cfg.J)), rng.uniform(-1, 1, shape), mode)


def test_config_validation():
    cfg = RaySampleConfig()
    assert (cfg.K, cfg.r_min, cfg.r_max, cfg.J) == (32, 1.0, 100.0, 8)
    for bad in (dict(K=0), dict(J=0), dict(r_min=0.0), dict(r_min=5, r_max=5)):
        with pytest.raises(ValueError):
            RaySampleConfig(**bad)
    assert RaySampleConfig(K=1, r_min=3).depths().tolist() == [3.0]


def test_params_validation(rng):
    with pytest.raises(ValueError):
        RayAttentionParams(np.ones(2), np.zeros((3, 2)), np.zeros((3, 2)))  # free mode needs (K, J, 3)
    with pytest.raises(ValueError):
        RayAttentionParams(np.ones(3), np.zeros((3, 2)), np.zeros((3, 2, 3)))
    with pytest.raises(ValueError):
        RayAttentionParams(np.ones(2), np.zeros((3, 2)), np.zeros((3, 2)), mode="sideways")
    with pytest.raises(ValueError):
        RayAttentionParams(np.ones(2), np.full((3, 2), np.nan), np.zeros((3, 2, 3)))


def test_sample_points_examples():
    pts = sample_ray_points(PoseSE3.identity(), (256, 64), GRID, RaySampleConfig(K=2, r_min=1, r_max=2))
    np.testing.assert_allclose(pts, [[1, 0, 0], [2, 0, 0]], atol=1e-15)


@given(st.integers(2, 40), st.floats(0.1, 10), st.floats(1, 90))
def test_sample_points_collinear_evenly_spaced(K, r_min, span):
    cfg = RaySampleConfig(K=K, r_min=r_min, r_max=r_min + span)
    pts = sample_ray_points(POSE, PIXEL, GRID, cfg)
    center, d = world_ray(POSE, PIXEL, GRID)
    rel = pts - center
    assert np.abs(np.cross(rel, d)).max() < 1e-12 * (r_min + span)
    np.testing.assert_allclose(np.linalg.norm(np.diff(pts, axis=0), axis=1), span / (K - 1), atol=1e-12)


def test_weights_normalized(rng):
    for scale in (1e-3, 1, 100, 1e4):
        p = RayAttentionParams(np.ones(5), rng.standard_normal((7, 5)) * scale, np.zeros((7, 5, 3)))
        np.testing.assert_allclose(p.weights().sum(axis=0), 1.0, atol=1e-12)


def test_initial_params():
    cfg = RaySampleConfig(K=6, J=3)
    p = RayAttentionParams.initial(cfg)
    np.testing.assert_allclose(p.weights(), 1 / 6)
    np.testing.assert_allclose(p.head_weights, 1 / 3)
    assert p.offsets.shape == (6, 3, 3) and not p.offsets.any()
    assert RayAttentionParams.initial(cfg, ALONG_RAY, channels=4).head_weights.shape == (3, 4)


def test_single_sample_reduces_to_sample_3d(tp):
    cfg = RaySampleConfig(K=1, r_min=4.0, J=1)
    out = ray_pixel_attention(tp, POSE, PIXEL, GRID, cfg, RayAttentionParams.initial(cfg))
    np.testing.assert_allclose(out, sample_3d(tp, sample_ray_points(POSE, PIXEL, GRID, cfg)[0]), atol=1e-12)


def test_constant_triplane_uniform_logits(rng):
    const = Triplane.constant(1.75, channels=3, resolution=5)
    cfg = RaySampleConfig(K=5, r_min=1, r_max=20, J=3)
    hw = np.array([0.2, 0.5, 0.7])
    p = RayAttentionParams(hw, np.zeros((5, 3)), rng.uniform(-0.5, 0.5, (5, 3, 3)))
    np.testing.assert_allclose(ray_pixel_attention(const, POSE, PIXEL, GRID, cfg, p), hw.sum() * 1.75, atol=1e-12)


def _naive(tp, pose, pixel, grid, cfg, params):
    center, d = world_ray(pose, pixel, grid)
    A = np.exp(params.logits) / np.exp(params.logits).sum(axis=0)
    out = np.zeros(tp.channels)
    for j in range(cfg.J):
        acc = np.zeros(tp.channels)
        for k, r in enumerate(cfg.depths()):
            off = params.offsets[k, j] if params.mode == FREE else params.offsets[k, j] * d
            acc += A[k, j] * sample_3d(tp, center + r * d + off)
        out += params.head_weights[j] * acc
    return out


@pytest.mark.parametrize("mode", [FREE, ALONG_RAY])
@pytest.mark.parametrize("per_channel", [None, 4])
def test_matches_naive_loop(rng, tp, mode, per_channel):
    cfg = RaySampleConfig(K=6, r_min=1, r_max=25, J=3)
    for _ in range(10):
        p = _random_params(rng, cfg, mode, per_channel)
        np.testing.assert_allclose(
            ray_pixel_attention(tp, POSE, PIXEL, GRID, cfg, p), _naive(tp, POSE, PIXEL, GRID, cfg, p), atol=1e-12
        )


def test_linear_in_triplane(rng, tp):
    other = Triplane.random(rng, channels=4, resolution=17, z_resolution=9)
    cfg = RaySampleConfig(K=5, r_min=1, r_max=20, J=2)
    p = _random_params(rng, cfg)
    a = ray_pixel_attention(tp, POSE, PIXEL, GRID, cfg, p)
    b = ray_pixel_attention(other, POSE, PIXEL, GRID, cfg, p)
    np.testing.assert_allclose(ray_pixel_attention(tp + other, POSE, PIXEL, GRID, cfg, p), a + b, atol=1e-12)


def test_extent_error_names_sample(tp):
    cfg = RaySampleConfig(K=4, r_min=1, r_max=400, J=2)
    with pytest.raises(ExtentError, match=r"k=\d+, j=\d+"):
        ray_pixel_attention(tp, POSE, PIXEL, GRID, cfg, RayAttentionParams.initial(cfg))


def test_grad_trivial_cases(rng):
    const = Triplane.constant(1.0, channels=2, resolution=5)
    cfg = RaySampleConfig(K=4, r_min=1, r_max=20, J=2)
    g = ray_attention_grad(const, POSE, PIXEL, GRID, cfg, _random_params(rng, cfg))
    np.testing.assert_allclose(g.offsets, 0.0, atol=1e-15)
    tp = Triplane.random(rng, channels=2, resolution=9)
    cfg1 = RaySampleConfig(K=1, r_min=5, J=3)
    g = ray_attention_grad(tp, POSE, PIXEL, GRID, cfg1, _random_params(rng, cfg1))
    np.testing.assert_array_equal(g.logits, 0.0)


def test_grad_matches_finite_differences():
    res = check_gradients(seed=7, instances=40)
    assert res.ok, res.line()


def test_refine_step(rng, tp):
    cfg = RaySampleConfig(K=5, r_min=1, r_max=20, J=2)
    p = _random_params(rng, cfg)
    same = refine_step(p, p.zeros_like(), 0.1)
    for name in ("head_weights", "logits", "offsets"):
        np.testing.assert_array_equal(getattr(same, name), getattr(p, name))
    with pytest.raises(ValueError):
        refine_step(p, p, 0.0)

    target = rng.standard_normal(tp.channels)
    before = squared_error(tp, POSE, PIXEL, GRID, cfg, p, target)
    g = squared_error_grad(tp, POSE, PIXEL, GRID, cfg, p, target)
    for step in (1e-2, 1e-3, 1e-4):
        q = refine_step(p, g, step)
        np.testing.assert_allclose(q.weights().sum(axis=0), 1.0, atol=1e-12)
        assert squared_error(tp, POSE, PIXEL, GRID, cfg, q, target) <= before
