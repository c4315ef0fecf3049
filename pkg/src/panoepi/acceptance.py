"""Acceptance suites shared by the test suite and ``panoepi selftest``.

Each ``check_*`` function runs one numbered criterion at its stated scale and
tolerance and returns a :class:`SuiteResult`. Oracles here are written
independently of the library code they check wherever that is practical.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from .attention import AttentionParams, AttentionStats, CandidateMask, cost_model, full_attention, interframe_attention
from .bench import BenchSpec, run_bench, trend_checks
from .camera import (
    EquirectGrid,
    Pose4DoF,
    PoseSE3,
    angles_to_pixel,
    direction_to_pixel,
    pixel_to_angles,
    pose4dof_to_se3,
    project_point,
)
from .epipolar import (
    DEFAULT_EPS,
    band_tolerance,
    curve_distance,
    epipolar_curve,
    epipolar_mask,
    epipoles,
    essential,
    relative_pose,
    residual,
)
from .io import FormatError, load_triplane, save_triplane
from .ray_attention import RayAttentionParams, RaySampleConfig, ray_attention_grad, ray_pixel_attention, sample_ray_points
from .sequence import dense_pair_count, dense_schedule, pair_masks, sparse_pair_count, sparse_schedule
from .triplane import ExtentError, FeaturePlane, Triplane, bilinear_grad, bilinear_sample, sample_3d


@dataclass
class SuiteResult:
    number: int | None
    title: str
    passed: int = 0
    total: int = 0
    details: list[str] = field(default_factory=list)
    seconds: float = 0.0
    time_limit: float | None = None

    def check(self, ok: bool, detail: str | None = None) -> bool:
        self.total += 1
        self.passed += bool(ok)
        if not ok and detail:
            self.details.append(detail)
        return bool(ok)

    @property
    def ok(self) -> bool:
        in_time = self.time_limit is None or self.seconds < self.time_limit
        return self.total > 0 and self.passed == self.total and in_time

    def line(self) -> str:
        tag = f"criterion {self.number:>2}" if self.number is not None else "suite       "
        limit = f" (limit {self.time_limit:g}s)" if self.time_limit is not None else ""
        msg = f"{'PASS' if self.ok else 'FAIL'} {tag} {self.title}: {self.passed}/{self.total} checks, {self.seconds:.2f}s{limit}"
        if self.details:
            msg += " | " + "; ".join(self.details[:3])
        return msg


def _timed(number, title, limit=None):
    def wrap(fn: Callable[..., None]):
        def run(seed: int = 0, **kw) -> SuiteResult:
            res = SuiteResult(number, title, time_limit=limit)
            t0 = time.perf_counter()
            fn(res, np.random.default_rng(seed), **kw)
            res.seconds = time.perf_counter() - t0
            if limit is not None and res.seconds >= limit:
                res.details.append(f"runtime {res.seconds:.2f}s exceeds {limit}s")
            return res

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


# --- random fixtures ------------------------------------------------------


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.standard_normal(4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_se3(rng: np.random.Generator, spread: float = 20.0) -> PoseSE3:
    R = random_rotation(rng)
    center = rng.uniform(-spread, spread, 3)
    return PoseSE3(R, -R @ center)


def random_4dof(rng: np.random.Generator, spread: float = 50.0) -> PoseSE3:
    x, y = rng.uniform(-spread, spread, 2)
    return pose4dof_to_se3(Pose4DoF((x, y, rng.uniform(1.0, 3.0)), rng.uniform(-math.pi, math.pi)))


def random_pose_pair(rng: np.random.Generator, min_baseline: float = 0.5) -> tuple[PoseSE3, PoseSE3]:
    """Alternates full 6-DoF and ground-camera 4-DoF pairs."""
    make = random_se3 if rng.random() < 0.5 else random_4dof
    while True:
        a, b = make(rng), make(rng)
        if np.linalg.norm(a.center - b.center) >= min_baseline:
            return a, b


def random_pixel_centers(rng: np.random.Generator, grid: EquirectGrid, n: int) -> np.ndarray:
    cols = rng.integers(0, grid.width, n)
    rows = rng.integers(0, grid.height, n)
    return np.stack([cols + 0.5, rows + 0.5], axis=1)


# --- independent oracles ----------------------------------------------------


def _oracle_dirs(u, v, W, H):
    yaw, pitch = np.broadcast_arrays((np.asarray(u) / W - 0.5) * 2 * math.pi, (0.5 - np.asarray(v) / H) * math.pi)
    return np.stack([np.cos(pitch) * np.cos(yaw), np.cos(pitch) * np.sin(yaw), np.sin(pitch)], axis=-1)


def bracket_oracle_mask(E: np.ndarray, query, grid: EquirectGrid, band: int) -> set[int]:
    """Exhaustive residual scan: pixel (r, c) is a candidate when the raw residual
    changes sign (or vanishes at the lower end) over rows [r - b, r + b + 1] of
    its column, clipped to the image."""
    W, H = grid.width, grid.height
    n = E @ _oracle_dirs(query[0], query[1], W, H)
    r = np.arange(H)
    v_lo = np.maximum(r - band, 0).astype(float)
    v_hi = np.minimum(r + band + 1, H).astype(float)
    u = np.arange(W) + 0.5
    f_lo = _oracle_dirs(u[None, :], v_lo[:, None], W, H) @ n
    f_hi = _oracle_dirs(u[None, :], v_hi[:, None], W, H) @ n
    hit = (f_lo == 0) | (f_lo * f_hi < 0)
    rows, cols = np.nonzero(hit)
    return set((rows * W + cols).tolist())


def threshold_oracle_mask(E: np.ndarray, query, grid: EquirectGrid, eps: float) -> set[int]:
    """Exhaustive scan: every pixel whose baseline-normalized residual is within ``eps``."""
    W, H = grid.width, grid.height
    n = E @ _oracle_dirs(query[0], query[1], W, H) / (np.linalg.norm(E) / math.sqrt(2.0))
    u, v = np.meshgrid(np.arange(W) + 0.5, np.arange(H) + 0.5)
    hit = np.abs(_oracle_dirs(u, v, W, H) @ n) <= eps
    return set(np.flatnonzero(hit).tolist())


def oracle_bilinear(plane: FeaturePlane, p: np.ndarray) -> np.ndarray:
    """Bilinear lookup using node coordinate tables and ``searchsorted``."""
    F = plane.features
    na, nb = F.shape[:2]
    a_nodes = np.linspace(*plane.extent_a, na)
    b_nodes = np.linspace(*plane.extent_b, nb)
    i = np.clip(np.searchsorted(a_nodes, p[:, 0], side="right") - 1, 0, na - 2)
    j = np.clip(np.searchsorted(b_nodes, p[:, 1], side="right") - 1, 0, nb - 2)
    s = ((p[:, 0] - a_nodes[i]) / (a_nodes[i + 1] - a_nodes[i]))[:, None]
    t = ((p[:, 1] - b_nodes[j]) / (b_nodes[j + 1] - b_nodes[j]))[:, None]
    top = F[i, j] + s * (F[i + 1, j] - F[i, j])
    bottom = F[i, j + 1] + s * (F[i + 1, j + 1] - F[i, j + 1])
    return top + t * (bottom - top)


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


# --- criteria ---------------------------------------------------------------


@_timed(1, "projection round trip on 128x512", limit=1.0)
def check_projection_roundtrip(res: SuiteResult, rng) -> None:
    grid = EquirectGrid(512, 128)
    uu, vv = grid.pixel_centers()
    ray = pixel_to_angles(uu, vv, grid)
    u1, v1 = angles_to_pixel(ray, grid)
    err_angles = max(np.abs(u1 - uu).max(), np.abs(v1 - vv).max())
    u2, v2 = direction_to_pixel(ray.direction, grid)
    err_unit = max(np.abs(u2 - uu).max(), np.abs(v2 - vv).max())
    res.check(err_angles < 1e-9, f"angle path error {err_angles:.3g}")
    res.check(err_unit < 1e-9, f"unit-vector path error {err_unit:.3g}")
    res.check(uu.size == 128 * 512, "pixel count")


@_timed(2, "epipolar soundness on 1000 correspondences", limit=1.0)
def check_epipolar_soundness(res: SuiteResult, rng, n: int = 1000) -> None:
    grid = EquirectGrid(512, 128)
    worst = 0.0
    for _ in range(n // 10):
        pm, pn = random_pose_pair(rng)
        E = essential(relative_pose(pm, pn))
        # points 2-60 m from the first camera, visible from both
        d = rng.standard_normal((10, 3))
        Q = pm.center + d / np.linalg.norm(d, axis=1, keepdims=True) * rng.uniform(2, 60, (10, 1))
        Q = Q[np.linalg.norm(Q - pn.center, axis=1) > 1e-3]
        px_m = np.stack(project_point(Q, pm, grid), axis=-1)
        px_n = np.stack(project_point(Q, pn, grid), axis=-1)
        r = np.abs(residual(px_m, px_n, E, grid))
        worst = max(worst, float(r.max()))
        for val in r:
            res.check(val < 1e-10)
    if worst >= 1e-10:
        res.details.append(f"max |residual| {worst:.3g}")


@_timed(3, "mask equals exhaustive residual oracles", limit=30.0)
def check_mask_oracle(res: SuiteResult, rng, pairs: int = 50, queries: int = 20, band: int = 1) -> None:
    """Band masks against a per-column sign scan; thresholded masks against a full residual scan."""
    for grid in (EquirectGrid(32, 16), EquirectGrid(64, 32)):
        thresholds = (DEFAULT_EPS, band_tolerance(grid, band))
        for _ in range(pairs):
            pm, pn = random_pose_pair(rng)
            E = essential(relative_pose(pm, pn))
            qs = random_pixel_centers(rng, grid, queries)
            batch, _ = pair_masks(E, grid, band, queries=qs)
            for k, q in enumerate(qs):
                want = bracket_oracle_mask(E.E, q, grid, band)
                got = set(epipolar_mask(q, E, grid, band).flat_indices(grid).tolist())
                ok = got == want and set(batch.row(k).tolist()) == want
                res.check(ok, f"{grid.width}x{grid.height} query {tuple(q)}: |mask|={len(got)} |oracle|={len(want)}")
                for eps in thresholds:
                    want = threshold_oracle_mask(E.E, q, grid, eps)
                    got = set(epipolar_mask(q, E, grid, band, eps).flat_indices(grid).tolist())
                    res.check(got == want, f"{grid.width}x{grid.height} query {tuple(q)} eps={eps:.3g}: |mask|={len(got)} |oracle|={len(want)}")


@_timed(4, "sparsity M/(HW) <= 3/128 with band 1 on 128x512")
def check_sparsity(res: SuiteResult, rng, queries: int = 100) -> None:
    grid = EquirectGrid(512, 128)
    counts = []
    for _ in range(queries // 10):
        pm, pn = random_pose_pair(rng)
        E = essential(relative_pose(pm, pn))
        for q in random_pixel_centers(rng, grid, 10):
            counts.append(epipolar_mask(q, E, grid, 1).count)
    mean = Fraction(sum(counts), len(counts) * grid.size)
    res.check(mean <= Fraction(3, 128), f"mean M/(HW) = {float(mean):.5f}")
    res.check(len(counts) == queries, "query count")


@_timed(5, "masked attention with full masks equals dense attention")
def check_masked_vs_full(res: SuiteResult, rng, trials: int = 3) -> None:
    H, W, C = 16, 64, 8
    L = H * W
    for _ in range(trials):
        for n in (1, 2, 3):
            feats = rng.standard_normal((n, L, C))
            params = AttentionParams.random(rng, C)
            sched = dense_schedule(n)
            got = interframe_attention(feats, sched, params, masks=None)
            explicit = interframe_attention(
                feats, sched, params, masks={p: CandidateMask.full(L, L) for p in sched.pairs()}
            )
            for i, att in enumerate(sched.attended):
                if att:
                    ref = full_attention(feats[i], feats[list(att)].reshape(-1, C), params)
                else:
                    ref = feats[i] @ params.wv.T
                for out in (got, explicit):
                    diff = float(np.abs(out[i] - ref).max())
                    res.check(diff < 1e-12, f"N={n} frame {i}: max diff {diff:.3g}")


@_timed(6, "instrumented score counts equal closed forms, N=1..10")
def check_cost_exactness(res: SuiteResult, rng, window: int = 2) -> None:
    H, W, C = 4, 8, 4
    L = H * W
    params = AttentionParams.random(rng, C)
    for n in range(1, 11):
        feats = rng.standard_normal((n, L, C))
        for sched, pairs in (
            (dense_schedule(n), dense_pair_count(n)),
            (sparse_schedule(n, window), sparse_pair_count(n, window)),
        ):
            stats = AttentionStats()
            interframe_attention(feats, sched, params, None, stats)
            model = cost_model(n, H, W, sched, channels=C, name=sched.name)
            closed = pairs * L * L
            res.check(sched.pair_count == pairs, f"{sched.name} N={n}: {sched.pair_count} pairs != {pairs}")
            res.check(model.frame_pairs == pairs, f"{sched.name} N={n}: model pairs {model.frame_pairs}")
            res.check(
                stats.score_evaluations == closed == model.score_evaluations,
                f"{sched.name} N={n}: counted {stats.score_evaluations}, model {model.score_evaluations}, closed {closed}",
            )
        if n >= window:
            res.check(sparse_pair_count(n, window) == window * n - window * (window + 1) // 2)


@_timed(7, "sparse-vs-dense scaling trends", limit=120.0)
def check_scaling_trends(res: SuiteResult, rng, spec: BenchSpec | None = None) -> None:
    spec = spec or BenchSpec(seed=int(rng.integers(2**31)))
    result = run_bench(spec)
    for row in result.rows:
        res.check(row.frame_pairs == row.closed_form_pairs, f"{row.schedule} N={row.n_frames} pair count")
    for tc in trend_checks(result):
        res.check(tc.passed, f"{tc.name} = {tc.value:.3f} (want {tc.expected})")
    res.check(Fraction(30 * 29, 10 * 9) == Fraction(870, 90), "dense closed form")
    res.check(Fraction(2 * 30 - 3, 2 * 10 - 3) == Fraction(57, 17), "sparse closed form")


@_timed(8, "triplane aggregation: nodes, linearity, oracle sum")
def check_triplane(res: SuiteResult, rng, points: int = 1000) -> None:
    kw = dict(channels=4, resolution=9, z_resolution=7)
    t1, t2 = Triplane.random(rng, **kw), Triplane.random(rng, **kw)
    for plane in t1.planes():
        na, nb = plane.features.shape[:2]
        i, j = np.meshgrid(np.arange(na), np.arange(nb), indexing="ij")
        got = bilinear_sample(plane, plane.node_position(i, j))
        err = float(np.abs(got - plane.features).max())
        res.check(err <= 1e-12, f"{plane.label} node error {err:.3g}")

    ext = t1.extents
    lo = np.array([ext[a][0] for a in "xyz"])
    hi = np.array([ext[a][1] for a in "xyz"])
    x = rng.uniform(lo, hi, (points, 3))
    a, b = rng.standard_normal(2)
    combo = Triplane(
        *(FeaturePlane(p.label, a * p.features + b * q.features, p.extent_a, p.extent_b) for p, q in zip(t1.planes(), t2.planes()))
    )
    lin = float(np.abs(sample_3d(combo, x) - (a * sample_3d(t1, x) + b * sample_3d(t2, x))).max())
    res.check(lin < 1e-12, f"superposition error {lin:.3g}")

    oracle = oracle_bilinear(t1.xy, x[:, [0, 1]]) + oracle_bilinear(t1.xz, x[:, [0, 2]]) + oracle_bilinear(t1.yz, x[:, [1, 2]])
    err = np.abs(sample_3d(t1, x) - oracle).max(axis=1)
    for e in err:
        res.check(e < 1e-12)
    if err.max() >= 1e-12:
        res.details.append(f"oracle sum error {err.max():.3g}")


def _interior(tp: Triplane, pts: np.ndarray, margin: float = 1e-3) -> bool:
    for label, cols in (("xy", [0, 1]), ("xz", [0, 2]), ("yz", [1, 2])):
        plane = tp.plane(label)
        if not plane.contains(pts[..., cols]).all():
            return False
        g = plane.to_grid(pts[..., cols])
        frac = g - np.floor(g)
        if (frac < margin).any() or (frac > 1 - margin).any():
            return False
    return True


def _ray_instance(rng, tp: Triplane, grid: EquirectGrid, mode: str):
    """Random pose, pixel and parameters whose ray samples are all interior."""
    K, J, C = 4, 2, tp.channels
    while True:
        yaw = rng.uniform(-math.pi, math.pi)
        pose = pose4dof_to_se3(Pose4DoF((*rng.uniform(-40, 40, 2), rng.uniform(5, 15)), yaw))
        px = (rng.uniform(0, grid.width), rng.uniform(0.15, 0.5) * grid.height)
        cfg = RaySampleConfig(K=K, r_min=1.0, r_max=rng.uniform(10, 30), J=J)
        shape = (K, J, 3) if mode == "free" else (K, J)
        hw = rng.uniform(0.2, 1.0, J) if rng.random() < 0.5 else rng.uniform(0.2, 1.0, (J, C))
        params = RayAttentionParams(hw, rng.standard_normal((K, J)), rng.uniform(-2, 2, shape), mode)
        pts = sample_ray_points(pose, px, grid, cfg)[:, None, :]
        if mode == "free":
            pts = pts + params.offsets
        else:
            d = (pts[1, 0] - pts[0, 0]) / np.linalg.norm(pts[1, 0] - pts[0, 0])
            pts = pts + params.offsets[..., None] * d
        if _interior(tp, pts):
            return pose, px, cfg, params


def _fields(params: RayAttentionParams) -> dict:
    return dict(head_weights=params.head_weights, logits=params.logits, offsets=params.offsets, mode=params.mode)


def _fd_jacobian(fn, x: np.ndarray, h: float) -> np.ndarray:
    """Central differences of vector-valued ``fn`` w.r.t. every entry of ``x``: (out, *x.shape)."""
    cols = []
    flat = x.ravel()
    for k in range(flat.size):
        xp, xm = flat.copy(), flat.copy()
        xp[k] += h
        xm[k] -= h
        cols.append((fn(xp.reshape(x.shape)) - fn(xm.reshape(x.shape))) / (2 * h))
    return np.stack(cols, axis=-1).reshape(-1, *x.shape)


@_timed(9, "analytic gradients vs central differences")
def check_gradients(res: SuiteResult, rng, instances: int = 500) -> None:
    worst = {"bilinear": 0.0, "ray": 0.0}
    tp = Triplane.random(rng, channels=3, resolution=11, z_resolution=9)
    for _ in range(instances):
        plane = tp.planes()[rng.integers(3)]
        na, nb = plane.features.shape[:2]
        g = np.array([rng.integers(0, na - 1), rng.integers(0, nb - 1)]) + rng.uniform(0.01, 0.99, 2)
        ca, cb = plane.cell_size
        p = np.array([plane.extent_a[0] + g[0] * ca, plane.extent_b[0] + g[1] * cb])
        jac, _ = bilinear_grad(plane, p)
        fd = _fd_jacobian(lambda q: bilinear_sample(plane, q), p, 1e-6 * min(ca, cb))
        e = _rel_err(jac, fd)
        worst["bilinear"] = max(worst["bilinear"], e)
        res.check(e < 1e-4)

    grid = EquirectGrid(64, 32)
    for k in range(instances):
        mode = "free" if k % 2 == 0 else "along_ray"
        pose, px, cfg, params = _ray_instance(rng, tp, grid, mode)
        grad = ray_attention_grad(tp, pose, px, grid, cfg, params)

        def out(**change):
            return ray_pixel_attention(tp, pose, px, grid, cfg, RayAttentionParams(**{**_fields(params), **change}))

        checks = (
            ("logits", grad.logits, lambda v: out(logits=v), params.logits, 1e-6),
            ("offsets", grad.offsets, lambda v: out(offsets=v), params.offsets, 1e-6),
            ("head_weights", grad.head_weights, lambda v: out(head_weights=v), params.head_weights, 1e-6),
        )
        for _name, analytic, fn, x0, h in checks:
            e = _rel_err(analytic, _fd_jacobian(fn, x0, h))
            worst["ray"] = max(worst["ray"], e)
            res.check(e < 1e-4)
    for key, val in worst.items():
        if val >= 1e-4:
            res.details.append(f"{key} worst relative error {val:.3g}")


@_timed(10, "ray attention normalization and K=J=1 reduction")
def check_ray_normalization(res: SuiteResult, rng, trials: int = 200) -> None:
    for _ in range(trials):
        K, J = rng.integers(1, 40), rng.integers(1, 10)
        scale = 10.0 ** rng.uniform(-3, 2.5)
        params = RayAttentionParams(np.ones(J), rng.standard_normal((K, J)) * scale, np.zeros((K, J, 3)))
        dev = float(np.abs(params.weights().sum(axis=0) - 1.0).max())
        res.check(dev <= 1e-12, f"sum A deviation {dev:.3g} (K={K}, J={J}, scale {scale:.3g})")

    tp = Triplane.random(rng, channels=5, resolution=17)
    grid = EquirectGrid(512, 128)
    for _ in range(trials):
        pose = pose4dof_to_se3(Pose4DoF((*rng.uniform(-50, 50, 2), rng.uniform(2, 20)), rng.uniform(-3, 3)))
        px = (rng.uniform(0, grid.width), rng.uniform(0, grid.height))
        cfg = RaySampleConfig(K=1, r_min=rng.uniform(0.5, 20), r_max=100.0, J=1)
        params = RayAttentionParams.initial(cfg)
        point = sample_ray_points(pose, px, grid, cfg)[0]
        try:
            direct = sample_3d(tp, point)
        except ExtentError:
            continue
        got = ray_pixel_attention(tp, pose, px, grid, cfg, params)
        diff = float(np.abs(got - direct).max())
        res.check(diff <= 1e-12, f"K=J=1 reduction diff {diff:.3g}")


@_timed(11, "traced curves pass within 1 px of both epipoles on 128x512")
def check_epipoles(res: SuiteResult, rng, pairs: int = 100, queries: int = 5) -> None:
    grid = EquirectGrid(512, 128)
    worst = 0.0
    for _ in range(pairs):
        pm, pn = random_pose_pair(rng)
        rel = relative_pose(pm, pn)
        E = essential(rel)
        e1, e2 = epipoles(rel, grid)
        for q in random_pixel_centers(rng, grid, queries):
            curve = epipolar_curve(q, E, grid)
            if curve.at_epipole:
                continue
            d = max(curve_distance(curve, e1, grid), curve_distance(curve, e2, grid))
            worst = max(worst, d)
            res.check(d <= 1.0, f"query {tuple(q)}: {d:.3f} px from an epipole")
    if worst > 1.0:
        res.details.append(f"worst distance {worst:.3f} px")


def check_triplane_file(seed: int = 0, corrupt_byte: int | None = None) -> SuiteResult:
    """Save/load round trip of a triplane file; ``corrupt_byte`` flips one byte first."""
    res = SuiteResult(None, "triplane file round trip")
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    tp = Triplane.random(rng, channels=4, resolution=6)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "plane.tpl"
        save_triplane(path, tp)
        if corrupt_byte is not None:
            data = bytearray(path.read_bytes())
            data[corrupt_byte % len(data)] ^= 0xFF
            path.write_bytes(bytes(data))
        try:
            back = load_triplane(path)
        except FormatError as exc:
            res.check(False, str(exc))
        else:
            for p, q in zip(tp.planes(), back.planes()):
                same = np.array_equal(p.features.astype(np.float32), q.features) and p.extent_a == q.extent_a
                res.check(same, f"{p.label} plane differs after round trip")
    res.seconds = time.perf_counter() - t0
    return res


CRITERIA = {
    1: check_projection_roundtrip,
    2: check_epipolar_soundness,
    3: check_mask_oracle,
    4: check_sparsity,
    5: check_masked_vs_full,
    6: check_cost_exactness,
    7: check_scaling_trends,
    8: check_triplane,
    9: check_gradients,
    10: check_ray_normalization,
    11: check_epipoles,
}


def run_all(seed: int = 0, corrupt_byte: int | None = None, report: Callable[[str], None] | None = None) -> list[SuiteResult]:
    results = []
    for number, fn in CRITERIA.items():
        r = fn(seed + number)
        results.append(r)
        if report:
            report(r.line())
    r = check_triplane_file(seed, corrupt_byte)
    results.append(r)
    if report:
        report(r.line())
    return results
