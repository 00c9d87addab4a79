import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carnot import io
from carnot.algebra import heisenberg
from carnot.cli import main
from carnot.harness import (BallTooLargeError, MissingArtifactsError, SweepRow, build_report, distortion,
                            fit_loglog_slope, generate_heisenberg_ball, heisenberg_ball_estimate, pair_ratio,
                            render_report, sweep_epsilon)
from carnot.nets import PointCloud


def test_ball_small_radius():
    cloud = generate_heisenberg_ball(2)
    pts = {tuple(p) for p in cloud.points}
    assert tuple(cloud.points[0]) == (0.0, 0.0, 0.0)
    for g in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)]:
        assert tuple(map(float, g)) in pts
    assert len(cloud) == 11


def test_ball_growth():
    counts = {R: len(generate_heisenberg_ball(R)) for R in (4, 8, 16)}
    assert counts[4] == 171 and counts[8] == 2727
    for R in (4, 8):
        assert 8 <= counts[2 * R] / counts[R] <= 32


def test_ball_points_are_lattice_and_separated():
    cloud = generate_heisenberg_ball(5)
    a, b, c = cloud.points.T
    assert np.all(a == np.round(a)) and np.all(b == np.round(b))
    assert np.allclose((c - a * b / 2) % 1.0, 0)
    assert np.all(heisenberg().with_mode("floating").quasinorm(cloud.points) < 5)
    D = cloud.distance_matrix()
    assert D[np.triu_indices(len(cloud), 1)].min() >= 1.0


def test_ball_refusal():
    with pytest.raises(BallTooLargeError) as err:
        generate_heisenberg_ball(100, max_points=10**6)
    assert err.value.estimate == heisenberg_ball_estimate(100)
    with pytest.raises(ValueError):
        generate_heisenberg_ball(1.5)


def test_two_point_isometry():
    cloud = PointCloud(np.array([[0.0], [2.0]]))
    assert distortion(cloud, cloud.points, 1.0).distortion == 1.0


def test_distortion_needs_two_points():
    with pytest.raises(ValueError):
        distortion(PointCloud(np.zeros((1, 1))), np.zeros((1, 1)))


def test_collapse_reports_infinity():
    cloud = PointCloud(np.arange(4.0)[:, None])
    vals = np.array([[0.0], [1.0], [1.0], [3.0]])
    rep = distortion(cloud, vals)
    assert rep.distortion == math.inf and rep.contraction == 0
    assert sorted(rep.contraction_pair) == [1, 2]
    assert rep.to_json()["distortion"] == "inf"


@pytest.fixture(scope="module")
def h3_cloud():
    return generate_heisenberg_ball(4)


@settings(max_examples=10)
@given(st.integers(0, 2**31), st.floats(0.01, 100))
def test_distortion_scale_and_isometry_invariance(seed, scale):
    cloud = generate_heisenberg_ball(3)
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((len(cloud), 5))
    Q = np.linalg.qr(rng.standard_normal((5, 5)))[0]
    base = distortion(cloud, vals, 0.8).distortion
    assert distortion(cloud, scale * vals, 0.8).distortion == pytest.approx(base, rel=1e-9)
    assert distortion(cloud, vals @ Q.T, 0.8).distortion == pytest.approx(base, rel=1e-9)


def test_witnesses_reproduce(h3_cloud):
    rng = np.random.default_rng(0)
    vals = rng.standard_normal((len(h3_cloud), 4))
    for kwargs in ({}, {"max_exhaustive": 10, "samples": 5000}):
        rep = distortion(h3_cloud, vals, 0.875, **kwargs)
        assert abs(pair_ratio(h3_cloud, vals, *rep.expansion_pair, 0.875) - rep.expansion) <= 1e-12 * rep.expansion
        assert abs(pair_ratio(h3_cloud, vals, *rep.contraction_pair, 0.875) - rep.contraction) <= 1e-12 * rep.contraction
        assert rep.distortion >= 1


def test_sampled_mode_bounded_by_exhaustive(h3_cloud):
    vals = np.random.default_rng(1).standard_normal((len(h3_cloud), 3))
    full = distortion(h3_cloud, vals)
    sampled = distortion(h3_cloud, vals, max_exhaustive=10, samples=2000)
    assert full.exhaustive and not sampled.exhaustive
    assert sampled.distortion <= full.distortion * (1 + 1e-12)


def test_callable_embedding(h3_cloud):
    f = lambda P: P[:, :2] * 3.0
    assert distortion(h3_cloud, f).distortion == distortion(h3_cloud, f(h3_cloud.points)).distortion


@pytest.mark.parametrize("power", [0.5, 1.0])
def test_slope_recovers_power_law(power):
    eps = [2.0**-j for j in range(2, 7)]
    fit = fit_loglog_slope([(e, 3.7 * e**-power) for e in eps])
    assert fit.slope == pytest.approx(power, abs=1e-12)
    assert fit.used == 5 and fit.dropped == 0


def test_slope_drops_bad_rows():
    rows = [SweepRow(0.25, 2.0, 1.0, True, ""), SweepRow(0.125, math.nan, math.nan, False, "boom"),
            SweepRow(0.0625, 8.0, 1.0, True, ""), SweepRow(0.03125, 16.0, 1.0, True, "")]
    fit = fit_loglog_slope(rows)
    assert fit.used == 3 and fit.dropped == 1


def test_sweep_marks_failures(h3_cloud):
    def builder(e):
        if e == 0.125:
            raise RuntimeError("cell failed")
        return h3_cloud.points * e

    rows = sweep_epsilon(h3_cloud, builder, [0.25, 0.125, 0.0625])
    assert [r.ok for r in rows] == [True, False, True]
    assert "cell failed" in rows[1].error
    with pytest.raises(ValueError):
        sweep_epsilon(h3_cloud, builder, [0.25, 0.125])


def test_report_empty_dir(tmp_path):
    with pytest.raises(MissingArtifactsError) as err:
        build_report(tmp_path)
    assert "validate.json" in str(err.value)
    assert main(["report", str(tmp_path)]) == 2


SMALL_PIPELINE = [
    ["validate", "h3"],
    ["validate", "engel", "--scalar", "rational"],
    ["net", "--R", "4", "--delta", "2"],
    ["color", "--R", "4", "--delta", "1"],
    ["extend-frame", "--n", "300"],
    ["oscillator", "--samples", "20", "--fill", "1500"],
    ["embed", "assouad", "--R", "4", "--eps", "0.125"],
    ["distortion", "--eps", "0.125"],
    ["sweep", "--family", "weierstrass-block", "--R", "4"],
]


def run_pipeline(out):
    codes = [main(cmd + ["--out", str(out)]) for cmd in SMALL_PIPELINE]
    return codes + [main(["report", str(out)])]


@pytest.fixture(scope="module")
def pipeline_runs(tmp_path_factory):
    a, b = tmp_path_factory.mktemp("run_a"), tmp_path_factory.mktemp("run_b")
    return a, run_pipeline(a), b, run_pipeline(b)


def test_pipeline_succeeds(pipeline_runs):
    a, codes, _, _ = pipeline_runs
    assert codes == [0] * len(codes)
    report = io.read_json(a / "report.json")
    assert report["all_pass"] and len(report["suites"]) == 8


def test_pipeline_outputs(pipeline_runs):
    a = pipeline_runs[0]
    header, pts = io.read_points_csv(a / "cloud.csv")
    assert header == ["x_1_1", "x_1_2", "x_2_1"] and len(pts) == 171
    emb = io.read_indexed_csv(a / "embedding.csv")
    dist = io.read_json(a / "distortion.json")
    assert emb.shape[0] == 171 and dist["distortion"] != "inf"
    sweep = io.read_json(a / "sweep.json")
    assert sweep["config"]["fit_key"] == "holder" and len(sweep["rows"]) == 5


def test_pipeline_deterministic(pipeline_runs):
    a, _, b, _ = pipeline_runs
    for name in sorted(p.name for p in a.iterdir()):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_report_idempotent(pipeline_runs):
    a = pipeline_runs[0]
    first = build_report(a)
    assert build_report(a) == first
    assert "overall: PASS" in render_report(first)


def test_report_flags_failures(tmp_path):
    io.write_json(tmp_path / "net.json", {"ok": False, "config": {}})
    io.write_json(tmp_path / "distortion.json", {"distortion": 3.0})
    rep = build_report(tmp_path)
    assert rep["artifacts"] == ["net.json", "distortion.json"]
    assert not rep["all_pass"] and rep["suites"]["distortion.json"]["pass"]
    assert main(["report", str(tmp_path)]) == 1


def test_cli_rejects_lattice_for_other_groups(tmp_path):
    with pytest.raises(SystemExit):
        main(["net", "--group", "engel", "--out", str(tmp_path)])


def test_cli_points_roundtrip(tmp_path):
    pts = np.random.default_rng(0).uniform(-1, 1, (40, 3))
    io.write_points_csv(tmp_path / "pts.csv", pts, ["x_1_1", "x_1_2", "x_2_1"])
    assert main(["net", "--points", str(tmp_path / "pts.csv"), "--delta", "0.5", "--out", str(tmp_path)]) == 0
    assert np.array_equal(io.read_points_csv(tmp_path / "cloud.csv")[1], pts)


def test_frame_csv_roundtrip(tmp_path):
    v = np.random.default_rng(0).standard_normal((4, 2, 3))
    io.write_frame_csv(tmp_path / "f.csv", v)
    assert np.array_equal(io.read_frame_csv(tmp_path / "f.csv"), v)
