import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sccl.geometry import (
    ScanGeometry,
    backproj_weight,
    magnification,
    pose_at,
    preweight,
    project_point,
    rotate_coords,
)

from conftest import BENCH_SD, BENCH_SO, small_geom

finite = st.floats(-50, 50, allow_nan=False)
angle = st.floats(0, 2 * math.pi, allow_nan=False, exclude_max=True)


def line_plane_oracle(geom, beta, p):
    """Intersect the ray S -> p with plane E by solving for the ray parameter directly."""
    pose = pose_at(geom, beta)
    s = pose.source_pos
    d = np.asarray(p, dtype=float) - s
    lam = (pose.det_center[2] - s[2]) / d[2]
    hit = s + lam * d
    return hit[0] - pose.det_center[0], hit[1] - pose.det_center[1]


class TestScanGeometry:
    def test_rejects_tilt_outside_open_interval(self):
        for deg in (0.0, 90.0, 95.0, -10.0):
            with pytest.raises(ValueError, match="tilt_alpha"):
                small_geom(tilt_deg=deg)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(dist_so=50.0, dist_sd=40.0),
            dict(dist_so=0.0),
            dict(n_views=0),
            dict(det_rows=1),
            dict(pitch_u=0.0),
        ],
    )
    def test_rejects_bad_fields(self, kw):
        base = dict(dist_so=BENCH_SO, dist_sd=BENCH_SD, n_views=8, det_rows=16, det_cols=16, pitch_u=0.5, pitch_v=0.5)
        base.update(kw)
        with pytest.raises(ValueError):
            ScanGeometry.from_degrees(45.0, **base)

    def test_derived_lengths(self, bench_geom):
        g = bench_geom
        assert g.dist_od == pytest.approx(BENCH_SD - BENCH_SO)
        assert g.virtual_source_distance == pytest.approx(BENCH_SD * math.sqrt(0.5))
        assert g.detector_z == pytest.approx((BENCH_SD - BENCH_SO) * math.sqrt(0.5))

    def test_betas_uniform(self):
        b = small_geom(n_views=12).betas()
        assert b[0] == 0.0
        assert np.allclose(np.diff(b), 2 * np.pi / 12)
        assert b[-1] < 2 * np.pi

    def test_pixel_centres(self):
        g = small_geom(det=4, pitch=0.5)
        assert np.allclose(g.u_coords(), [-0.75, -0.25, 0.25, 0.75])


class TestPose:
    def test_beta_zero_azimuth(self, bench_geom):
        p = pose_at(bench_geom, 0.0)
        r = BENCH_SO * math.sqrt(0.5)
        assert p.source_pos[0] == pytest.approx(0.0, abs=1e-12)
        assert p.source_pos[1] == pytest.approx(r)
        assert p.det_center[1] == pytest.approx(-(BENCH_SD - BENCH_SO) * math.sqrt(0.5))

    def test_source_height_at_bench_geometry(self, bench_geom):
        assert pose_at(bench_geom, 0.0).source_pos[2] == pytest.approx(-32.37841951053201, rel=1e-12)

    def test_fixed_detector_axes(self, bench_geom):
        for beta in (0.0, 1.0, 4.0):
            p = pose_at(bench_geom, beta)
            assert np.array_equal(p.u_axis, [1.0, 0.0, 0.0])
            assert np.array_equal(p.v_axis, [0.0, 1.0, 0.0])

    def test_collinear_and_distances(self, bench_geom, rng):
        for beta in rng.uniform(0, 2 * np.pi, 100):
            p = pose_at(bench_geom, beta)
            s, d = p.source_pos, p.det_center
            assert np.linalg.norm(s - d) == pytest.approx(BENCH_SD, rel=1e-12)
            assert np.linalg.norm(s) == pytest.approx(BENCH_SO, rel=1e-12)
            assert np.linalg.norm(np.cross(s, d)) < 1e-9 * BENCH_SD**2

    def test_rejects_non_finite_beta(self, bench_geom):
        with pytest.raises(ValueError):
            pose_at(bench_geom, float("nan"))


class TestRotateCoords:
    def test_identity_and_quarter_turn(self):
        assert rotate_coords(0.0, 1.5, -2.0) == pytest.approx((1.5, -2.0))
        up, vp = rotate_coords(math.pi / 2, 1.0, 0.0)
        assert up == pytest.approx(0.0, abs=1e-15)
        assert vp == pytest.approx(1.0)

    @given(angle, finite, finite)
    def test_round_trip_and_norm(self, beta, u, v):
        up, vp = rotate_coords(beta, u, v)
        u2, v2 = rotate_coords(-beta, up, vp)
        assert u2 == pytest.approx(u, abs=1e-9)
        assert v2 == pytest.approx(v, abs=1e-9)
        n = u * u + v * v
        assert up * up + vp * vp == pytest.approx(n, rel=1e-12, abs=1e-300)

    def test_second_coordinate_is_line_coordinate(self):
        # v' is the s = u sin b + v cos b used by the filtration
        beta, u, v = 0.7, 1.2, -0.4
        assert rotate_coords(beta, u, v)[1] == pytest.approx(u * math.sin(beta) + v * math.cos(beta))


class TestProjectPoint:
    def test_origin_projects_to_detector_centre(self, bench_geom):
        for beta in (0.0, 0.3, 2.0, 5.5):
            u, v = project_point(bench_geom, beta, (0.0, 0.0, 0.0))
            assert abs(u) < 1e-12 and abs(v) < 1e-12

    def test_magnification_at_origin(self, bench_geom):
        assert magnification(bench_geom, 0.0) == pytest.approx(4.249399432190435, rel=1e-12)

    @settings(max_examples=200)
    @given(angle, st.floats(-8, 8), st.floats(-8, 8), st.floats(-10, 10))
    def test_matches_line_plane_oracle(self, beta, x, y, z):
        g = small_geom()
        got = project_point(g, beta, (x, y, z))
        want = line_plane_oracle(g, beta, (x, y, z))
        assert got[0] == pytest.approx(want[0], rel=1e-9, abs=1e-9)
        assert got[1] == pytest.approx(want[1], rel=1e-9, abs=1e-9)

    def test_vectorised(self, bench_geom, rng):
        pts = rng.uniform(-5, 5, (7, 3))
        u, v = project_point(bench_geom, 1.1, pts)
        for k, p in enumerate(pts):
            uk, vk = project_point(bench_geom, 1.1, p)
            assert u[k] == pytest.approx(uk) and v[k] == pytest.approx(vk)

    def test_rejects_point_behind_source(self, bench_geom):
        with pytest.raises(ValueError):
            project_point(bench_geom, 0.0, (0.0, 0.0, bench_geom.source_z))
        with pytest.raises(ValueError):
            project_point(bench_geom, 0.0, (0.0, 0.0, bench_geom.source_z - 1.0))


class TestWeights:
    def test_backproj_weight_values(self, bench_geom):
        assert backproj_weight(bench_geom, 0.0) == pytest.approx((BENCH_SD / BENCH_SO) ** 2, rel=1e-12)
        assert backproj_weight(bench_geom, 0.0) == pytest.approx(18.05739553430039, rel=1e-12)
        assert backproj_weight(bench_geom, bench_geom.detector_z) == pytest.approx(1.0, rel=1e-12)

    def test_backproj_weight_decreasing(self, bench_geom):
        z = np.linspace(-20, 100, 500)
        w = backproj_weight(bench_geom, z)
        assert np.all(w > 0) and np.all(np.diff(w) < 0)

    def test_backproj_weight_rejects_singularity(self, bench_geom):
        with pytest.raises(ValueError):
            backproj_weight(bench_geom, bench_geom.source_z)

    def test_preweight_centre(self, bench_geom):
        assert preweight(bench_geom, 0.3, 0.0, 0.0) == pytest.approx(math.sqrt(0.5), rel=1e-12)

    def test_preweight_at_most_one(self, bench_geom):
        u = bench_geom.u_coords()
        v = bench_geom.v_coords()
        for beta in (0.0, 1.0, 3.3):
            assert np.all(preweight(bench_geom, beta, u[None, :], v[:, None]) <= 1.0)

    def test_preweight_depends_on_s_and_radius_only(self, bench_geom):
        # reflect (u, v) across the line direction (sin b, cos b): s and u^2 + v^2 are kept
        beta, u, v = 0.8, 12.0, -7.0
        e = np.array([math.sin(beta), math.cos(beta)])
        p = np.array([u, v])
        q = 2 * (p @ e) * e - p
        assert preweight(bench_geom, beta, *q) == pytest.approx(preweight(bench_geom, beta, u, v), rel=1e-13)
