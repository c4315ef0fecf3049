import csv
import io
import math
from fractions import Fraction

import pytest

from panoepi.bench import (
    BENCH_CSV_COLUMNS,
    BenchSpec,
    bench_trajectory,
    format_summary,
    ray_cost_summary,
    run_bench,
    trend_checks,
)
from panoepi.camera import EquirectGrid


@pytest.fixture(scope="module")
def small_result(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench") / "b.csv"
    spec = BenchSpec(frames=(3, 6), grid=EquirectGrid(16, 4), channels=4, out=out)
    return run_bench(spec), out


def test_spec_validation():
    for bad in (dict(repetitions=2), dict(frames=()), dict(frames=(0,)), dict(band=-1), dict(channels=0)):
        with pytest.raises(ValueError):
            BenchSpec(**bad)


def test_trajectory_spacing():
    traj = bench_trajectory(30)
    assert len(traj) == 30
    assert math.dist(traj.frames[0].pose.t, traj.frames[1].pose.t) == pytest.approx(10.0)


def test_rows_and_counts(small_result):
    result, _ = small_result
    assert len(result.rows) == 4
    for r in result.rows:
        assert r.status == "ok" and r.frame_pairs == r.closed_form_pairs
        assert r.score_evaluations == r.model_score_evaluations and r.median_seconds > 0
    assert result.row("dense", 6).frame_pairs == 30 and result.row("sparse", 6).frame_pairs == 9
    with pytest.raises(KeyError):
        result.row("dense", 7)


def test_csv(small_result):
    result, out = small_result
    text = out.read_text()
    assert text == result.to_csv()
    rows = list(csv.DictReader(io.StringIO(text)))
    assert list(rows[0]) == BENCH_CSV_COLUMNS and len(rows) == 4
    assert {r["schema_version"] for r in rows} == {"1"}


def test_trend_pair_checks(small_result):
    result, _ = small_result
    checks = {c.name: c for c in trend_checks(result, 3, 6)}
    assert checks["dense pair ratio"].passed and checks["dense pair ratio"].value == float(Fraction(30, 6))
    assert checks["sparse pair ratio"].passed and checks["sparse pair ratio"].value == 3.0
    assert checks["dense score counts match model"].passed


def test_capped_rows():
    spec = BenchSpec(frames=(2, 4), grid=EquirectGrid(8, 4), channels=2)
    # the cap is per frame; both N=2 frames together fit, a frame attending three others does not
    cap = run_bench(spec).row("dense", 2).score_evaluations
    result = run_bench(BenchSpec(frames=(2, 4), grid=EquirectGrid(8, 4), channels=2, dense_cap=cap))
    assert result.row("dense", 2).status == "ok"
    capped = result.row("dense", 4)
    assert capped.status == "capped" and math.isnan(capped.median_seconds)
    assert "capped" in format_summary(result) and ",capped" in result.to_csv()


def test_ray_cost_summary():
    assert "ratio" in ray_cost_summary()
