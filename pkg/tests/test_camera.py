import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from panoepi.acceptance import random_rotation, random_se3
from panoepi.camera import (
    DegenerateProjectionError,
    EquirectGrid,
    PixelDomainError,
    Pose4DoF,
    PoseSE3,
    angles_to_pixel,
    angles_to_unit,
    direction_to_pixel,
    pixel_to_angles,
    pose4dof_to_se3,
    project_point,
    ray_from_angles,
    unit_to_angles,
    wrap_yaw,
)
from panoepi.epipolar import relative_pose

GRID = EquirectGrid(512, 128)
grids = st.builds(
    EquirectGrid,
    width=st.integers(1, 300).map(lambda w: 2 * w),
    height=st.integers(2, 300),
)
finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_grid_default_and_parse():
    assert EquirectGrid() == GRID
    assert EquirectGrid.parse("512x128") == GRID
    assert GRID.shape == (128, 512)
    for bad in ("512", "511x128", "0x4", "axb", "4x1"):
        with pytest.raises(ValueError):
            EquirectGrid.parse(bad)


@pytest.mark.parametrize(
    "u, v, yaw, pitch",
    [
        (256, 64, 0.0, 0.0),
        (0, 64, -math.pi, 0.0),
        (384, 32, math.pi / 2, math.pi / 4),
    ],
)
def test_pixel_to_angles_anchors(u, v, yaw, pitch):
    r = pixel_to_angles(u, v, GRID)
    assert r.yaw == pytest.approx(yaw, abs=1e-15)
    assert r.pitch == pytest.approx(pitch, abs=1e-15)
    assert angles_to_pixel(r, GRID) == pytest.approx((u, v), abs=1e-12)


@pytest.mark.parametrize("u, v", [(-0.1, 5), (512, 5), (3, -1e-9), (3, 128.0001), (math.nan, 3)])
def test_pixel_domain(u, v):
    with pytest.raises(PixelDomainError):
        pixel_to_angles(u, v, GRID)


def test_poles_are_exact():
    assert pixel_to_angles(10, 0, GRID).pitch == math.pi / 2
    assert pixel_to_angles(10, 128, GRID).pitch == -math.pi / 2


def test_unit_anchors():
    np.testing.assert_allclose(angles_to_unit(0.0, 0.0), [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(angles_to_unit(math.pi / 2, 0.0), [0, 1, 0], atol=1e-15)
    assert unit_to_angles([0, 0, 1]) == (0.0, math.pi / 2)
    assert unit_to_angles([0, 0, -1]) == (0.0, -math.pi / 2)


@given(grids, st.data())
def test_pixel_center_roundtrip(grid, data):
    c = data.draw(st.integers(0, grid.width - 1))
    r = data.draw(st.integers(0, grid.height - 1))
    ray = pixel_to_angles(c + 0.5, r + 0.5, grid)
    u, v = angles_to_pixel(ray, grid)
    assert abs(u - c - 0.5) < 1e-9 and abs(v - r - 0.5) < 1e-9
    u2, v2 = direction_to_pixel(ray.direction, grid)
    assert abs(u2 - c - 0.5) < 1e-9 and abs(v2 - r - 0.5) < 1e-9


@given(st.floats(-math.pi, math.pi, exclude_max=True), st.floats(-1.5, 1.5))
def test_angles_roundtrip(yaw, pitch):
    ray = ray_from_angles(yaw, pitch)
    back = pixel_to_angles(*angles_to_pixel(ray, GRID), GRID)
    assert abs(back.yaw - yaw) < 1e-12 and abs(back.pitch - pitch) < 1e-12


@given(st.tuples(finite, finite, finite))
def test_direction_roundtrip(v):
    d = np.array(v)
    n = np.linalg.norm(d)
    assume(n > 1e-6 and np.linalg.norm(d[:2]) > 1e-6 * n)
    d = d / n
    np.testing.assert_allclose(angles_to_unit(*unit_to_angles(d)), d, atol=1e-12)
    assert abs(np.linalg.norm(angles_to_unit(*unit_to_angles(d))) - 1) < 1e-12


def test_yaw_periodicity():
    a = pixel_to_angles(0.0, 40.0, GRID)
    b = pixel_to_angles(np.nextafter(512.0, 0), 40.0, GRID)
    assert math.isclose(a.yaw % (2 * math.pi), b.yaw % (2 * math.pi), abs_tol=1e-12)
    np.testing.assert_allclose(a.direction, b.direction, atol=1e-12)


@given(st.floats(-100, 100))
def test_wrap_yaw_range(y):
    w = wrap_yaw(y)
    assert -math.pi <= w < math.pi
    assert math.isclose(math.cos(w), math.cos(y), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(y), abs_tol=1e-9)


def test_project_point_anchors():
    ident = PoseSE3.identity()
    assert project_point([3.0, 0, 0], ident, GRID) == pytest.approx((256, 64))
    assert project_point([0, 0, 5.0], ident, GRID) == pytest.approx((256, 0))
    with pytest.raises(DegenerateProjectionError):
        project_point([0, 0, 0], ident, GRID)


def test_project_point_parallel(rng):
    for _ in range(200):
        pose = random_se3(rng)
        Q = rng.uniform(-30, 30, 3)
        u, v = project_point(Q, pose, GRID)
        d = pixel_to_angles(u, v, GRID).direction
        x = pose.apply(Q)
        assert np.linalg.norm(np.cross(d, x / np.linalg.norm(x))) < 1e-10
        assert d @ x > 0


def test_pose4dof_conversion():
    np.testing.assert_allclose(pose4dof_to_se3(Pose4DoF((0, 0, 0), 0.0)).matrix(), np.eye(4), atol=1e-15)
    p = pose4dof_to_se3(Pose4DoF((0, 0, 0), math.pi / 2))
    # camera-to-world rotation takes the forward axis to world +Y
    np.testing.assert_allclose(p.R.T @ [1, 0, 0], [0, 1, 0], atol=1e-15)
    q = pose4dof_to_se3(Pose4DoF((4, -2, 1.6), 0.7))
    np.testing.assert_allclose(q.center, [4, -2, 1.6], atol=1e-12)


def test_pose4dof_yaw_normalized():
    assert Pose4DoF((0, 0, 0), 3 * math.pi).yaw == pytest.approx(-math.pi)
    assert -math.pi <= Pose4DoF((0, 0, 0), -7.0).yaw < math.pi


def test_relative_pose_matches_homogeneous_oracle(rng):
    for _ in range(50):
        a = pose4dof_to_se3(Pose4DoF(rng.uniform(-50, 50, 3), rng.uniform(-4, 4)))
        b = pose4dof_to_se3(Pose4DoF(rng.uniform(-50, 50, 3), rng.uniform(-4, 4)))
        oracle = b.matrix() @ np.linalg.inv(a.matrix())
        np.testing.assert_allclose(relative_pose(a, b).matrix(), oracle, atol=1e-12)


def test_composition_associative(rng):
    for _ in range(50):
        a, b, c = (random_se3(rng) for _ in range(3))
        Q = rng.uniform(-10, 10, (5, 3))
        np.testing.assert_allclose(((a @ b) @ c).apply(Q), (a @ (b @ c)).apply(Q), atol=1e-10)
        np.testing.assert_allclose((a @ a.inverse()).matrix(), np.eye(4), atol=1e-12)


def test_pose_validation(rng):
    with pytest.raises(ValueError):
        PoseSE3(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        PoseSE3(random_rotation(rng) * 1.001, np.zeros(3))
