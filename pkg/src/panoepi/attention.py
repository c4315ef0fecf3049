"""Scaled dot-product attention, dense and candidate-masked, with an exact
operation-count cost model.

Masks are stored in CSR form: query ``q`` attends ``indices[indptr[q]:indptr[q+1]]``.
Each query's softmax and weighted sum run over its candidates in mask order
with the same kernel regardless of batching, so results do not depend on
chunking or thread count.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

COST_CSV_VERSION = 1


@dataclass(frozen=True)
class AttentionParams:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    scale: float | None = None

    def __post_init__(self) -> None:
        mats = [np.asarray(m, dtype=float) for m in (self.wq, self.wk, self.wv)]
        c = mats[0].shape[0]
        for m in mats:
            if m.shape != (c, c):
                raise ValueError(f"projection matrices must all be {c}x{c}, got {m.shape}")
            if not np.all(np.isfinite(m)):
                raise ValueError("projection matrices must be finite")
        scale = float(c if self.scale is None else self.scale)
        if not scale > 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "wq", mats[0])
        object.__setattr__(self, "wk", mats[1])
        object.__setattr__(self, "wv", mats[2])
        object.__setattr__(self, "scale", scale)

    @property
    def channels(self) -> int:
        return self.wq.shape[0]

    @classmethod
    def random(cls, rng: np.random.Generator, channels: int, scale: float | None = None) -> "AttentionParams":
        s = 1.0 / math.sqrt(channels)
        return cls(*(rng.standard_normal((channels, channels)) * s for _ in range(3)), scale=scale)

    @classmethod
    def identity(cls, channels: int) -> "AttentionParams":
        eye = np.eye(channels)
        return cls(eye, eye.copy(), eye.copy())


def full_attention(queries: np.ndarray, keys_values: np.ndarray, params: AttentionParams) -> np.ndarray:
    """Dense ``softmax(Q K^T / sqrt(d)) V``."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    kv = np.atleast_2d(np.asarray(keys_values, dtype=float))
    C = params.channels
    if queries.shape[1] != C or kv.shape[1] != C:
        raise ValueError(f"feature width must be {C}")
    Q = queries @ params.wq.T
    K = kv @ params.wk.T
    V = kv @ params.wv.T
    S = Q @ K.T / math.sqrt(params.scale)
    S -= S.max(axis=1, keepdims=True)
    P = np.exp(S)
    P /= P.sum(axis=1, keepdims=True)
    return P @ V


@dataclass(frozen=True)
class CandidateMask:
    """Per-query candidate key indices in CSR layout."""

    indptr: np.ndarray
    indices: np.ndarray
    n_keys: int

    def __post_init__(self) -> None:
        indptr = np.asarray(self.indptr, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        if indptr.ndim != 1 or indptr[0] != 0 or np.any(np.diff(indptr) < 0) or indptr[-1] != len(indices):
            raise ValueError("malformed CSR index pointer")
        if len(indices) and (indices.min() < 0 or indices.max() >= self.n_keys):
            raise IndexError(f"candidate index out of bounds for {self.n_keys} keys")
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)

    @property
    def n_queries(self) -> int:
        return len(self.indptr) - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def row(self, q: int) -> np.ndarray:
        return self.indices[self.indptr[q] : self.indptr[q + 1]]

    @classmethod
    def from_lists(cls, rows: Iterable[Sequence[int]], n_keys: int) -> "CandidateMask":
        rows = [np.asarray(r, dtype=np.int64) for r in rows]
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(r) for r in rows])
        indices = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
        return cls(indptr, indices, n_keys)

    @classmethod
    def full(cls, n_queries: int, n_keys: int) -> "CandidateMask":
        indptr = np.arange(n_queries + 1, dtype=np.int64) * n_keys
        return cls(indptr, np.tile(np.arange(n_keys, dtype=np.int64), n_queries), n_keys)

    @classmethod
    def hstack(cls, masks: Sequence["CandidateMask"]) -> "CandidateMask":
        """Join masks over consecutive key blocks (same queries, keys concatenated)."""
        if not masks:
            raise ValueError("nothing to stack")
        nq = masks[0].n_queries
        if any(m.n_queries != nq for m in masks):
            raise ValueError("masks disagree on query count")
        offsets = np.cumsum([0] + [m.n_keys for m in masks])
        lengths = sum(m.lengths for m in masks)
        indptr = np.zeros(nq + 1, dtype=np.int64)
        indptr[1:] = np.cumsum(lengths)
        indices = np.empty(indptr[-1], dtype=np.int64)
        cursor = indptr[:-1].copy()
        for off, m in zip(offsets, masks):
            ln = m.lengths
            # scatter each query's block right after the previous blocks
            dst = np.repeat(cursor - m.indptr[:-1], ln) + np.arange(m.nnz)
            indices[dst] = m.indices + off
            cursor += ln
        return cls(indptr, indices, int(offsets[-1]))


@dataclass
class AttentionStats:
    """Counters filled in by :func:`masked_attention` (instrumentation)."""

    queries: int = 0
    score_evaluations: int = 0
    empty_masks: int = 0
    max_softmax_size: int = 0
    peak_score_buffer: int = 0

    def merge(self, other: "AttentionStats") -> None:
        self.queries += other.queries
        self.score_evaluations += other.score_evaluations
        self.empty_masks += other.empty_masks
        self.max_softmax_size = max(self.max_softmax_size, other.max_softmax_size)
        self.peak_score_buffer = max(self.peak_score_buffer, other.peak_score_buffer)


def masked_attention(
    queries: np.ndarray,
    keys_values: np.ndarray,
    mask: CandidateMask,
    params: AttentionParams,
    stats: AttentionStats | None = None,
    chunk_scores: int = 1 << 18,
) -> np.ndarray:
    """Attention where each query sees only its candidate keys.

    A query with an empty candidate list falls back to ``W^V @ query``.
    ``chunk_scores`` caps the number of scores materialized at once.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    kv = np.atleast_2d(np.asarray(keys_values, dtype=float))
    C = params.channels
    if queries.shape[1] != C or kv.shape[1] != C:
        raise ValueError(f"feature width must be {C}")
    if mask.n_queries != len(queries):
        raise ValueError(f"mask has {mask.n_queries} rows for {len(queries)} queries")
    if mask.n_keys != len(kv):
        raise IndexError(f"mask addresses {mask.n_keys} keys but {len(kv)} were given")

    Q = queries @ params.wq.T
    K = kv @ params.wk.T
    V = kv @ params.wv.T
    out = np.empty_like(Q)
    lengths = mask.lengths
    empty = lengths == 0
    if empty.any():
        out[empty] = queries[empty] @ params.wv.T

    inv = 1.0 / math.sqrt(params.scale)
    peak = 0
    # Queries with equal candidate counts are batched; each row's arithmetic
    # depends only on its own candidates, so chunking never changes results.
    for L in np.unique(lengths[~empty]):
        group = np.flatnonzero(lengths == L)
        step = max(1, chunk_scores // int(L))
        for s in range(0, len(group), step):
            rows = group[s : s + step]
            idx = mask.indptr[rows][:, None] + np.arange(L)
            keys = mask.indices[idx]  # (rows, L)
            scores = np.matmul(K[keys], Q[rows][:, :, None])[..., 0] * inv
            scores -= scores.max(axis=1, keepdims=True)
            w = np.exp(scores)
            w /= w.sum(axis=1, keepdims=True)
            out[rows] = np.matmul(w[:, None, :], V[keys])[:, 0, :]
            peak = max(peak, scores.size)

    if stats is not None:
        stats.merge(
            AttentionStats(
                queries=len(queries),
                score_evaluations=int(lengths.sum()),
                empty_masks=int(empty.sum()),
                max_softmax_size=int(lengths.max(initial=0)),
                peak_score_buffer=peak,
            )
        )
    return out


def _attended(schedule) -> list[tuple[int, ...]]:
    return [tuple(a) for a in getattr(schedule, "attended", schedule)]


MaskProvider = Callable[[int, int], CandidateMask]


def interframe_attention(
    features: np.ndarray,
    schedule,
    params: AttentionParams,
    masks: MaskProvider | Mapping[tuple[int, int], CandidateMask] | None = None,
    stats: AttentionStats | None = None,
    score_cap: int | None = None,
) -> np.ndarray:
    """Run attention for every frame over the frames it attends.

    ``features`` is (N, L, C) with L pixels per frame. Frame ``i`` queries the
    concatenated pixels of ``schedule[i]`` with one softmax per query across
    all attended frames. ``masks[(i, j)]`` restricts frame-i queries to
    frame-j candidates; ``None`` means full masks. ``score_cap`` raises
    :class:`MemoryError` before a frame whose score buffer would exceed it.
    """
    features = np.asarray(features, dtype=float)
    N, L, _ = features.shape
    attended = _attended(schedule)
    if len(attended) != N:
        raise ValueError(f"schedule covers {len(attended)} frames, features have {N}")
    out = np.empty_like(features)
    for i, att in enumerate(attended):
        if not att:
            empty = CandidateMask(np.zeros(L + 1, dtype=np.int64), np.empty(0, dtype=np.int64), 0)
            out[i] = masked_attention(features[i], features[i][:0], empty, params, stats)
            continue
        if masks is None:
            blocks = [CandidateMask.full(L, L) for _ in att]
        elif callable(masks):
            blocks = [masks(i, j) for j in att]
        else:
            blocks = [masks[(i, j)] for j in att]
        mask = blocks[0] if len(blocks) == 1 else CandidateMask.hstack(blocks)
        if score_cap is not None and mask.nnz > score_cap:
            raise MemoryError(f"frame {i}: {mask.nnz} scores exceed cap {score_cap}")
        kv = features[list(att)].reshape(-1, features.shape[2])
        out[i] = masked_attention(features[i], kv, mask, params, stats)
    return out


# --- cost model -----------------------------------------------------------


@dataclass(frozen=True)
class CostReport:
    schedule: str
    n_frames: int
    height: int
    width: int
    channels: int
    frame_pairs: int
    queries: int
    score_evaluations: int
    dense_baseline_pairs: int
    min_softmax: int
    mean_softmax: float
    max_softmax: int
    empty_queries: int
    mac_estimate: int
    peak_score_buffer: int

    @property
    def reduction(self) -> float:
        """Dense-baseline pairs per evaluated score (inf when nothing is evaluated)."""
        return self.dense_baseline_pairs / self.score_evaluations if self.score_evaluations else math.inf


def cost_model(
    n_frames: int,
    height: int,
    width: int,
    schedule,
    candidates: None | int | Mapping[tuple[int, int], np.ndarray] = None,
    channels: int = 32,
    name: str = "custom",
) -> CostReport:
    """Exact operation counts for scheduled interframe attention.

    ``candidates`` gives per-query candidate counts: ``None`` for full masks
    (M = H*W), an int for a uniform M, or a mapping from scheduled pair
    ``(i, j)`` to an array of H*W counts. The dense baseline is the
    all-pixels-to-all-pixels count (N*H*W)^2.
    """
    if n_frames < 1 or height < 1 or width < 1:
        raise ValueError("counts must be positive")
    attended = _attended(schedule)
    if len(attended) != n_frames:
        raise ValueError("schedule length does not match n_frames")
    L = height * width
    pairs = 0
    sizes = []
    peak = 0
    for i, att in enumerate(attended):
        per_query = np.zeros(L, dtype=np.int64)
        for j in att:
            pairs += 1
            if candidates is None:
                per_query += L
            elif isinstance(candidates, (int, np.integer)):
                per_query += int(candidates)
            else:
                c = np.asarray(candidates[(i, j)], dtype=np.int64)
                if c.shape != (L,):
                    raise ValueError(f"pair {(i, j)}: expected {L} counts, got {c.shape}")
                per_query += c
        sizes.append(per_query)
        peak = max(peak, int(per_query.sum()))
    sizes = np.concatenate(sizes)
    scores = int(sizes.sum())
    tokens = n_frames * L
    macs = 2 * channels * scores + 3 * channels * channels * tokens
    return CostReport(
        schedule=name,
        n_frames=n_frames,
        height=height,
        width=width,
        channels=channels,
        frame_pairs=pairs,
        queries=tokens,
        score_evaluations=scores,
        dense_baseline_pairs=tokens * tokens,
        min_softmax=int(sizes.min()),
        mean_softmax=float(sizes.mean()),
        max_softmax=int(sizes.max()),
        empty_queries=int((sizes == 0).sum()),
        mac_estimate=macs,
        peak_score_buffer=peak,
    )


COST_CSV_COLUMNS = ["schema_version"] + [f.name for f in fields(CostReport)]


def cost_reports_to_csv(reports: Iterable[CostReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COST_CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow({"schema_version": COST_CSV_VERSION, **asdict(r)})
    return buf.getvalue()


@dataclass(frozen=True)
class RayCostReport:
    """Per-image cost of conditioning pixels on a triplane.

    ``cross`` is standard cross-attention from every pixel to every triplane
    node; ``ray`` is ray-based sampling with K depths and J heads, each sample
    a sum of three bilinear lookups (4 corners each).
    """

    pixels: int
    triplane_tokens: int
    samples_per_pixel: int
    cross_scores: int
    cross_macs: int
    cross_buffer: int
    ray_lookups: int
    ray_macs: int
    ray_buffer: int

    @property
    def mac_ratio(self) -> float:
        return self.cross_macs / self.ray_macs


def ray_attention_cost(
    height: int, width: int, channels: int, K: int, J: int, plane_shapes: Sequence[tuple[int, int]]
) -> RayCostReport:
    pixels = height * width
    tokens = sum(a * b for a, b in plane_shapes)
    samples = K * J
    return RayCostReport(
        pixels=pixels,
        triplane_tokens=tokens,
        samples_per_pixel=samples,
        cross_scores=pixels * tokens,
        cross_macs=2 * channels * pixels * tokens + 3 * channels * channels * (pixels + tokens),
        cross_buffer=pixels * tokens,
        ray_lookups=pixels * samples * 3 * 4,
        # 12 corner reads per sample plus the weighted head/depth accumulation
        ray_macs=pixels * samples * channels * (12 + 1) + pixels * J * channels,
        ray_buffer=pixels * samples,
    )
