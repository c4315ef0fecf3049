"""Binary file formats and portable pixmap output.

All integers and floats are little-endian. Every binary file ends with a
CRC-32 of all preceding bytes.

Triplane (``.tpl``)::

    magic   b"TPLN"
    u32     version (1)
    u32     channels C
    3x      u32 n_a, u32 n_b, f64 a_min, f64 a_max, f64 b_min, f64 b_max
            (planes in order xy, xz, yz)
    3x      f32[n_a * n_b * C] features, row-major (n_a, n_b, C)
    u32     crc32

Ray attention parameters (``.rap``)::

    magic   b"RAYP"
    u32     layout version (1)
    u32     K, u32 J
    u32     head weight width (0 = one scalar per head, else C)
    u32     offset mode (0 = free 3-D, 1 = along ray)
    f64[]   head weights, logits (K, J), offsets (K, J, 3) or (K, J)
    u32     crc32

Epipolar masks (``.bin``), one CSR row per query pixel::

    magic   b"EPMK"
    u32     version (1)
    u32     H, u32 W, u32 band halfwidth
    u64     n_queries, u64 nnz
    u64[n_queries + 1]  row pointer
    u32[nnz]            candidate pixel index (row * W + col), per row sorted
                        by column then row
    u8[n_queries]       1 where the query sits on an epipole (full mask)
    u32     crc32
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .attention import CandidateMask
from .camera import EquirectGrid
from .ray_attention import ALONG_RAY, FREE, RayAttentionParams
from .triplane import PLANES, FeaturePlane, Triplane

TRIPLANE_MAGIC = b"TPLN"
PARAMS_MAGIC = b"RAYP"
MASK_MAGIC = b"EPMK"
VERSION = 1


class FormatError(ValueError):
    pass


def _seal(body: bytes) -> bytes:
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def _unseal(data: bytes, magic: bytes, what: str) -> memoryview:
    if len(data) < 12 or data[:4] != magic:
        raise FormatError(f"not a {what} file")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise FormatError(f"{what} checksum mismatch (corrupted file)")
    (version,) = struct.unpack_from("<I", body, 4)
    if version != VERSION:
        raise FormatError(f"unsupported {what} version {version}")
    return memoryview(body)


def triplane_to_bytes(tp: Triplane) -> bytes:
    parts = [TRIPLANE_MAGIC, struct.pack("<II", VERSION, tp.channels)]
    for p in tp.planes():
        na, nb = p.features.shape[:2]
        parts.append(struct.pack("<II4d", na, nb, *p.extent_a, *p.extent_b))
    for p in tp.planes():
        parts.append(np.ascontiguousarray(p.features, dtype="<f4").tobytes())
    return _seal(b"".join(parts))


def triplane_from_bytes(data: bytes) -> Triplane:
    body = _unseal(data, TRIPLANE_MAGIC, "triplane")
    (channels,) = struct.unpack_from("<I", body, 8)
    off = 12
    headers = []
    for _ in PLANES:
        na, nb, a0, a1, b0, b1 = struct.unpack_from("<II4d", body, off)
        headers.append((na, nb, (a0, a1), (b0, b1)))
        off += struct.calcsize("<II4d")
    planes = []
    for label, (na, nb, ea, eb) in zip(PLANES, headers):
        count = na * nb * channels
        if off + 4 * count > len(body):
            raise FormatError("triplane payload truncated")
        feats = np.frombuffer(body, dtype="<f4", count=count, offset=off).reshape(na, nb, channels)
        off += 4 * count
        planes.append(FeaturePlane(label, feats.astype(np.float64), ea, eb))
    if off != len(body):
        raise FormatError("trailing bytes after triplane payload")
    return Triplane(*planes)


def save_triplane(path: str | Path, tp: Triplane) -> None:
    Path(path).write_bytes(triplane_to_bytes(tp))


def load_triplane(path: str | Path) -> Triplane:
    return triplane_from_bytes(Path(path).read_bytes())


def params_to_bytes(params: RayAttentionParams) -> bytes:
    hw = params.head_weights
    width = 0 if hw.ndim == 1 else hw.shape[1]
    mode = 0 if params.mode == FREE else 1
    head = struct.pack("<4sIIIII", PARAMS_MAGIC, VERSION, params.K, params.J, width, mode)
    payload = b"".join(
        np.ascontiguousarray(a, dtype="<f8").tobytes() for a in (hw, params.logits, params.offsets)
    )
    return _seal(head + payload)


def params_from_bytes(data: bytes) -> RayAttentionParams:
    body = _unseal(data, PARAMS_MAGIC, "ray-attention params")
    _, _, K, J, width, mode = struct.unpack_from("<4sIIIII", body, 0)
    off = struct.calcsize("<4sIIIII")
    shapes = [
        (J,) if width == 0 else (J, width),
        (K, J),
        (K, J, 3) if mode == 0 else (K, J),
    ]
    arrays = []
    for shape in shapes:
        n = int(np.prod(shape))
        if off + 8 * n > len(body):
            raise FormatError("params payload truncated")
        arrays.append(np.frombuffer(body, dtype="<f8", count=n, offset=off).reshape(shape).copy())
        off += 8 * n
    if off != len(body):
        raise FormatError("trailing bytes after params payload")
    return RayAttentionParams(*arrays, mode=FREE if mode == 0 else ALONG_RAY)


def save_params(path: str | Path, params: RayAttentionParams) -> None:
    Path(path).write_bytes(params_to_bytes(params))


def load_params(path: str | Path) -> RayAttentionParams:
    return params_from_bytes(Path(path).read_bytes())


def masks_to_bytes(mask: CandidateMask, at_epipole: np.ndarray, grid: EquirectGrid, band: int) -> bytes:
    head = struct.pack(
        "<4sIIIIQQ", MASK_MAGIC, VERSION, grid.height, grid.width, band, mask.n_queries, mask.nnz
    )
    return _seal(
        head
        + mask.indptr.astype("<u8").tobytes()
        + mask.indices.astype("<u4").tobytes()
        + np.asarray(at_epipole, dtype=np.uint8).tobytes()
    )


def masks_from_bytes(data: bytes) -> tuple[CandidateMask, np.ndarray]:
    body = _unseal(data, MASK_MAGIC, "mask")
    _, _, H, W, _band, nq, nnz = struct.unpack_from("<4sIIIIQQ", body, 0)
    off = struct.calcsize("<4sIIIIQQ")
    expected = off + 8 * (nq + 1) + 4 * nnz + nq
    if expected != len(body):
        raise FormatError("mask payload size mismatch")
    indptr = np.frombuffer(body, dtype="<u8", count=nq + 1, offset=off).astype(np.int64)
    off += 8 * (nq + 1)
    indices = np.frombuffer(body, dtype="<u4", count=nnz, offset=off).astype(np.int64)
    off += 4 * nnz
    epi = np.frombuffer(body, dtype=np.uint8, count=nq, offset=off).astype(bool)
    return CandidateMask(indptr, indices, H * W), epi


def save_masks(path: str | Path, mask: CandidateMask, at_epipole, grid: EquirectGrid, band: int) -> None:
    Path(path).write_bytes(masks_to_bytes(mask, at_epipole, grid, band))


def load_masks(path: str | Path) -> tuple[CandidateMask, np.ndarray]:
    return masks_from_bytes(Path(path).read_bytes())


def ppm_bytes(image: np.ndarray) -> bytes:
    """Binary PPM (P6) for an (H, W, 3) uint8 image, PGM (P5) for (H, W)."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        raise ValueError("image must be uint8")
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"unsupported image shape {img.shape}")
    h, w = img.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode() + np.ascontiguousarray(img).tobytes()


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    Path(path).write_bytes(ppm_bytes(image))


def read_ppm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # exactly one whitespace byte separates the header from the raster
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic not in (b"P5", b"P6") or maxval != 255:
        raise FormatError("unsupported pixmap")
    channels = 3 if magic == b"P6" else 1
    arr = np.frombuffer(data, dtype=np.uint8, count=w * h * channels, offset=pos)
    return arr.reshape((h, w, 3) if channels == 3 else (h, w))
