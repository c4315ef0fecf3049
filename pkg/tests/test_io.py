import numpy as np
import pytest

from panoepi.attention import CandidateMask
from panoepi.camera import EquirectGrid
from panoepi.io import (
    FormatError,
    load_masks,
    load_params,
    load_triplane,
    masks_from_bytes,
    masks_to_bytes,
    params_from_bytes,
    params_to_bytes,
    ppm_bytes,
    read_ppm,
    save_masks,
    save_params,
    save_triplane,
    triplane_from_bytes,
    triplane_to_bytes,
    write_ppm,
)
from panoepi.ray_attention import ALONG_RAY, RayAttentionParams, RaySampleConfig
from panoepi.triplane import Triplane


def test_triplane_roundtrip(tmp_path, rng):
    tp = Triplane.random(rng, channels=3, resolution=6, z_resolution=4)
    save_triplane(tmp_path / "a.tpl", tp)
    back = load_triplane(tmp_path / "a.tpl")
    for a, b in zip(tp.planes(), back.planes()):
        assert (a.label, a.extent_a, a.extent_b) == (b.label, b.extent_a, b.extent_b)
        np.testing.assert_array_equal(b.features, a.features.astype(np.float32))


@pytest.mark.parametrize("mode", ["free", ALONG_RAY])
def test_params_roundtrip(tmp_path, rng, mode):
    cfg = RaySampleConfig(K=4, J=3)
    p = RayAttentionParams.initial(cfg, mode, channels=5)
    p = RayAttentionParams(rng.standard_normal(p.head_weights.shape), rng.standard_normal(p.logits.shape),
                           rng.standard_normal(p.offsets.shape), mode)
    save_params(tmp_path / "p.rap", p)
    q = load_params(tmp_path / "p.rap")
    assert q.mode == mode
    for name in ("head_weights", "logits", "offsets"):
        np.testing.assert_array_equal(getattr(q, name), getattr(p, name))


def test_masks_roundtrip(tmp_path):
    m = CandidateMask.from_lists([[0, 5], [], [7, 1, 2]], 8)
    epi = np.array([False, False, True])
    save_masks(tmp_path / "m.bin", m, epi, EquirectGrid(4, 2), 1)
    back, epi2 = load_masks(tmp_path / "m.bin")
    np.testing.assert_array_equal(back.indptr, m.indptr)
    np.testing.assert_array_equal(back.indices, m.indices)
    np.testing.assert_array_equal(epi2, epi)


@pytest.mark.parametrize("kind", ["triplane", "params", "masks"])
def test_corruption_and_truncation_detected(rng, kind):
    if kind == "triplane":
        data, load = triplane_to_bytes(Triplane.random(rng, channels=2, resolution=4)), triplane_from_bytes
    elif kind == "params":
        data, load = params_to_bytes(RayAttentionParams.initial(RaySampleConfig(K=3, J=2))), params_from_bytes
    else:
        data = masks_to_bytes(CandidateMask.from_lists([[0], [1, 2]], 4), np.zeros(2, bool), EquirectGrid(2, 2), 0)
        load = masks_from_bytes
    for pos in (0, 5, len(data) // 2, len(data) - 1):
        bad = bytearray(data)
        bad[pos] ^= 0x40
        with pytest.raises(FormatError):
            load(bytes(bad))
    for cut in (3, len(data) // 2, len(data) - 1):
        with pytest.raises(FormatError):
            load(data[:cut])
    with pytest.raises(FormatError):
        load(b"")


def test_ppm_roundtrip(tmp_path, rng):
    rgb = rng.integers(0, 256, (5, 7, 3), dtype=np.uint8)
    gray = rng.integers(0, 256, (4, 3), dtype=np.uint8)
    write_ppm(tmp_path / "c.ppm", rgb)
    write_ppm(tmp_path / "g.pgm", gray)
    np.testing.assert_array_equal(read_ppm(tmp_path / "c.ppm"), rgb)
    np.testing.assert_array_equal(read_ppm(tmp_path / "g.pgm"), gray)
    assert ppm_bytes(rgb).startswith(b"P6\n7 5\n255\n")
    with pytest.raises(ValueError):
        ppm_bytes(rgb.astype(np.int16))
    with pytest.raises(ValueError):
        ppm_bytes(np.zeros((2, 2, 4), np.uint8))
