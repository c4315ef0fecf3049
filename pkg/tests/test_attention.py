import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from panoepi.attention import (
    COST_CSV_COLUMNS,
    AttentionParams,
    AttentionStats,
    CandidateMask,
    cost_model,
    cost_reports_to_csv,
    full_attention,
    interframe_attention,
    masked_attention,
    ray_attention_cost,
)
from panoepi.sequence import dense_schedule, sparse_schedule


def _textbook(q, kv, p):
    out = np.empty((len(q), p.channels))
    for i, x in enumerate(q):
        s = np.array([(p.wq @ x) @ (p.wk @ y) for y in kv]) / math.sqrt(p.scale)
        w = np.exp(s - s.max())
        out[i] = (w / w.sum()) @ np.array([p.wv @ y for y in kv])
    return out


def test_params_validation(rng):
    with pytest.raises(ValueError):
        AttentionParams(np.eye(2), np.eye(3), np.eye(2))
    with pytest.raises(ValueError):
        AttentionParams(np.eye(2), np.eye(2), np.eye(2), scale=0.0)
    assert AttentionParams.identity(4).scale == 4.0


def test_full_attention_examples(rng):
    p = AttentionParams.random(rng, 3)
    x, y = rng.standard_normal((1, 3)), rng.standard_normal((1, 3))
    np.testing.assert_allclose(full_attention(x, y, p), (p.wv @ y[0])[None], atol=1e-12)
    q, kv = rng.standard_normal((5, 3)), rng.standard_normal((9, 3))
    perm = rng.permutation(9)
    np.testing.assert_allclose(full_attention(q, kv[perm], p), full_attention(q, kv, p), atol=1e-12)
    np.testing.assert_allclose(full_attention(q, kv, p), _textbook(q, kv, p), atol=1e-12)
    with pytest.raises(ValueError):
        full_attention(q, rng.standard_normal((9, 4)), p)


def test_mask_validation():
    with pytest.raises(IndexError):
        CandidateMask(np.array([0, 1]), np.array([5]), 3)
    with pytest.raises(ValueError):
        CandidateMask(np.array([0, 2]), np.array([1]), 3)
    m = CandidateMask.from_lists([[0, 2], [], [1]], 3)
    assert m.lengths.tolist() == [2, 0, 1] and m.nnz == 3 and m.row(2).tolist() == [1]


def test_hstack():
    a = CandidateMask.from_lists([[0], [1, 2]], 3)
    b = CandidateMask.from_lists([[1], []], 2)
    s = CandidateMask.hstack([a, b])
    assert s.n_keys == 5
    assert [s.row(i).tolist() for i in range(2)] == [[0, 4], [1, 2]]


def test_masked_examples(rng):
    p = AttentionParams.random(rng, 4)
    q, kv = rng.standard_normal((6, 4)), rng.standard_normal((10, 4))
    np.testing.assert_allclose(masked_attention(q, kv, CandidateMask.full(6, 10), p), full_attention(q, kv, p), atol=1e-12)
    single = CandidateMask.from_lists([[k] for k in range(6)], 10)
    np.testing.assert_allclose(masked_attention(q, kv, single, p), kv[:6] @ p.wv.T, atol=1e-12)
    with pytest.raises(IndexError):
        masked_attention(q, kv[:5], CandidateMask.full(6, 10), p)


def test_empty_mask_falls_back_and_is_flagged(rng):
    p = AttentionParams.random(rng, 3)
    q, kv = rng.standard_normal((3, 3)), rng.standard_normal((4, 3))
    stats = AttentionStats()
    out = masked_attention(q, kv, CandidateMask.from_lists([[0, 1], [], [3]], 4), p, stats)
    np.testing.assert_allclose(out[1], p.wv @ q[1], atol=1e-12)
    assert stats.empty_masks == 1 and stats.score_evaluations == 3


@given(st.integers(0, 10**6), st.integers(1, 40))
def test_masked_matches_per_query_oracle(seed, chunk):
    rng = np.random.default_rng(seed)
    C = int(rng.integers(1, 6))
    p = AttentionParams.random(rng, C)
    q, kv = rng.standard_normal((12, C)), rng.standard_normal((15, C))
    rows = [rng.choice(15, size=rng.integers(1, 8), replace=False) for _ in range(12)]
    m = CandidateMask.from_lists(rows, 15)
    out = masked_attention(q, kv, m, p)
    for i, r in enumerate(rows):
        np.testing.assert_allclose(out[i], _textbook(q[i : i + 1], kv[r], p)[0], atol=1e-12)
    # results are bitwise independent of chunking
    assert masked_attention(q, kv, m, p, chunk_scores=chunk).tobytes() == out.tobytes()


def test_softmax_rows_sum_to_one(rng):
    # identity value projection on one-hot values exposes the weights
    C = 6
    p = AttentionParams(rng.standard_normal((C, C)), rng.standard_normal((C, C)), np.eye(C))
    kv = np.eye(C) * 1.0
    q = rng.standard_normal((20, C)) * 5
    rows = [rng.choice(C, size=rng.integers(1, C + 1), replace=False) for _ in range(20)]
    out = masked_attention(q, kv, CandidateMask.from_lists(rows, C), p)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)


def test_interframe_joint_softmax(rng):
    C, L = 3, 5
    feats = rng.standard_normal((3, L, C))
    p = AttentionParams.random(rng, C)
    out = interframe_attention(feats, dense_schedule(3), p)
    np.testing.assert_allclose(out[0], full_attention(feats[0], feats[[1, 2]].reshape(-1, C), p), atol=1e-12)
    sparse = interframe_attention(feats, sparse_schedule(3), p)
    np.testing.assert_allclose(sparse[0], feats[0] @ p.wv.T, atol=1e-12)
    np.testing.assert_allclose(sparse[1], full_attention(feats[1], feats[0], p), atol=1e-12)
    with pytest.raises(MemoryError):
        interframe_attention(feats, dense_schedule(3), p, score_cap=2 * L * L - 1)


def test_cost_model_examples():
    H, W = 4, 8
    r = cost_model(1, H, W, [[0]], None)
    assert r.score_evaluations == (H * W) ** 2 and r.dense_baseline_pairs == (H * W) ** 2
    N = 6
    s = cost_model(N, H, W, sparse_schedule(N), W)
    interior = sum(1 for i in range(N) if i >= 2)
    assert s.score_evaluations == H * W * W * (2 * interior + 1)
    assert s.frame_pairs == 2 * N - 3
    d = cost_model(N, H, W, dense_schedule(N))
    assert d.score_evaluations == N * (N - 1) * (H * W) ** 2 and d.reduction > 1


def test_cost_model_matches_instrumentation(rng):
    H, W, C = 3, 4, 2
    N = 5
    L = H * W
    sched = sparse_schedule(N)
    masks = {pair: CandidateMask.from_lists([rng.choice(L, rng.integers(0, L), replace=False) for _ in range(L)], L) for pair in sched.pairs()}
    stats = AttentionStats()
    interframe_attention(rng.standard_normal((N, L, C)), sched, AttentionParams.random(rng, C), masks, stats)
    r = cost_model(N, H, W, sched, {k: v.lengths for k, v in masks.items()}, C)
    assert r.score_evaluations == stats.score_evaluations
    assert r.max_softmax == stats.max_softmax_size


def test_cost_model_monotone(rng):
    H, W, N = 2, 4, 4
    sched = dense_schedule(N)
    base = {p: rng.integers(0, 8, H * W) for p in sched.pairs()}
    more = {p: c + rng.integers(0, 3, H * W) for p, c in base.items()}
    assert cost_model(N, H, W, sched, more).score_evaluations >= cost_model(N, H, W, sched, base).score_evaluations


def test_dense_to_masked_ratio_closed_form():
    H, W, b = 8, 16, 1
    M = W * (2 * b + 1)
    for N in (3, 10, 30):
        dense = cost_model(N, H, W, dense_schedule(N)).score_evaluations
        masked = cost_model(N, H, W, sparse_schedule(N), M).score_evaluations
        assert dense * (2 * N - 3) * M == masked * N * (N - 1) * H * W


def test_cost_csv():
    text = cost_reports_to_csv([cost_model(2, 2, 2, dense_schedule(2), name="dense")])
    header, row = text.strip().split("\n")
    assert header.split(",") == COST_CSV_COLUMNS and row.startswith("1,dense,2")
    assert cost_reports_to_csv([]).strip() == ",".join(COST_CSV_COLUMNS)


def test_ray_cost():
    rc = ray_attention_cost(128, 512, 32, 32, 8, [(256, 256)] * 3)
    assert rc.cross_scores == 128 * 512 * 3 * 256 * 256
    assert rc.ray_buffer == 128 * 512 * 32 * 8
    assert rc.mac_ratio > 10
