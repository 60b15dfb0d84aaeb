import math

import numpy as np
import pytest

from sccl.geometry import backproj_weight
from sccl.projector import (
    ProjectionStack,
    add_noise,
    back_project,
    back_project_weighted,
    box_in_fov,
    forward_project,
)
from sccl.volume import Grid, Volume

from conftest import small_geom
from oracles import random_box_phantom, ray_march


def oracle_error(vol, geom, beta, rng, substeps, n_rays=300):
    """Relative l2 difference to the ray-marching oracle over rays that hit the object."""
    img = forward_project(vol, geom, [beta]).data[0]
    rows, cols = np.nonzero(img > 0)
    pick = rng.choice(rows.size, min(n_rays, rows.size), replace=False)
    got = img[rows[pick], cols[pick]]
    want = ray_march(vol, geom, beta, rows[pick], cols[pick], substeps)
    return np.linalg.norm(got - want) / np.linalg.norm(want)


def empty(grid):
    return Volume(grid, grid.zeros())


@pytest.fixture
def oracle_geom():
    return small_geom(n_views=8, det=96, pitch=0.2)


class TestForward:
    def test_zero_volume(self):
        g = small_geom(n_views=4, det=32)
        st = forward_project(empty(Grid.centered(8, 8, 8, 0.2)), g)
        assert st.data.shape == (4, 32, 32)
        assert not st.data.any()

    def test_linear_in_attenuation(self, rng):
        g = small_geom(n_views=4, det=48)
        vol = random_box_phantom(rng, max_n=16)
        a = forward_project(vol, g).data
        b = forward_project(Volume(vol.grid, 2.0 * vol.data), g).data
        assert np.array_equal(b, 2.0 * a)

    def test_central_chord(self):
        # the centre ray at beta = 0 crosses a centred cube diagonally in the yz plane
        g = small_geom(n_views=1, det=33, pitch=0.3)
        grid = Grid.centered(1, 1, 1, 0.4)
        st = forward_project(Volume(grid, np.full(grid.shape, 2.5)), g, [0.0])
        assert st.data[0, 16, 16] == pytest.approx(2.5 * 0.4 * math.sqrt(2.0), rel=1e-12)

    def test_uniform_slab_path_length(self):
        # a laterally unbounded slab of thickness T gives T / cos(ray tilt)
        g = small_geom(n_views=1, det=9, pitch=0.5)
        grid = Grid.centered(200, 200, 4, 0.25)
        with pytest.warns(UserWarning, match="truncated"):
            st = forward_project(Volume(grid, np.ones(grid.shape)), g, [0.3])
        assert st.data[0, 4, 4] == pytest.approx(1.0 * math.sqrt(2.0), rel=1e-12)

    def test_oracle_converges_to_projector(self, rng, oracle_geom):
        # oracle error shrinks like its step: the projector is the exact integral
        vol = random_box_phantom(rng)
        beta = rng.uniform(0, 2 * np.pi)
        e16 = oracle_error(vol, oracle_geom, beta, np.random.default_rng(1), 16)
        e256 = oracle_error(vol, oracle_geom, beta, np.random.default_rng(1), 256)
        assert e256 < 0.002
        assert e256 < e16 / 6

    @pytest.mark.parametrize("k", range(4))
    def test_matches_fine_oracle(self, rng, oracle_geom, k):
        for _ in range(k):
            random_box_phantom(rng)
        vol = random_box_phantom(rng)
        assert oracle_error(vol, oracle_geom, rng.uniform(0, 2 * np.pi), rng, 64) < 0.005

    def test_truncation_warning(self):
        g = small_geom(n_views=4, det=16, pitch=0.1)
        vol = Volume(Grid.centered(20, 20, 4, 0.2), np.ones((4, 20, 20)))
        with pytest.warns(UserWarning, match="truncated"):
            forward_project(vol, g)

    def test_no_warning_inside_fov(self, recwarn):
        g = small_geom(n_views=4, det=64, pitch=0.5)
        forward_project(Volume(Grid.centered(8, 8, 8, 0.2), np.ones((8, 8, 8))), g)
        assert not [w for w in recwarn if "truncated" in str(w.message)]

    def test_rejects_grid_across_detector_plane(self):
        g = small_geom(n_views=2)
        grid = Grid.centered(4, 4, 4, 1.0, center=(0.0, 0.0, g.detector_z))
        with pytest.raises(ValueError, match="detector plane"):
            forward_project(empty(grid), g)

    def test_rejects_empty_angles(self):
        with pytest.raises(ValueError):
            forward_project(empty(Grid.centered(4, 4, 4, 0.1)), small_geom(), [])

    def test_box_in_fov(self):
        g = small_geom(det=64, pitch=0.5)
        assert box_in_fov(g, (-1, -1, -1), (1, 1, 1))
        assert not box_in_fov(g, (-10, -10, -1), (10, 10, 1))


class TestBackward:
    def test_adjointness(self, rng):
        g = small_geom(n_views=16, det=96, pitch=0.25)
        grid = Grid.centered(24, 24, 16, 0.1)
        x = rng.uniform(0, 1, grid.shape)
        y = rng.uniform(0, 1, (16, 96, 96))
        ax = forward_project(Volume(grid, x), g).data
        bty = back_project(ProjectionStack(g.betas(), y, g.pitch_u, g.pitch_v), g, grid, "adjoint").data
        lhs, rhs = np.vdot(ax, y), np.vdot(x, bty)
        assert abs(lhs - rhs) / abs(lhs) < 0.02

    def test_fdk_weight_profile(self):
        # a single all-ones view backprojects to the distance weight of each slice
        g = small_geom(n_views=1, det=128, pitch=0.5)
        grid = Grid.centered(4, 4, 12, 0.3)
        st = ProjectionStack([0.4], np.ones((1, 128, 128)), 0.5, 0.5)
        bp = back_project(st, g, grid, "fdk").data
        col = bp[:, 1, 2]
        w = backproj_weight(g, grid.z())
        assert np.allclose(col / col[0], w / w[0], rtol=1e-6, atol=0)
        assert np.allclose(col, w, rtol=1e-12)

    def test_uniform_stack_has_fourfold_symmetry(self):
        g = small_geom(n_views=8, det=40, pitch=0.5)
        grid = Grid.centered(30, 30, 6, 0.2)
        st = ProjectionStack(g.betas(), np.ones((8, 40, 40)), 0.5, 0.5)
        bp = back_project(st, g, grid).data
        assert np.allclose(np.rot90(bp, 1, axes=(1, 2)), bp, rtol=0, atol=1e-9)

    def test_sum_over_views(self, rng):
        g = small_geom(n_views=6, det=48, pitch=0.4)
        grid = Grid.centered(12, 12, 8, 0.2)
        st = ProjectionStack(g.betas(), rng.normal(size=(6, 48, 48)), 0.4, 0.4)
        full = back_project(st, g, grid, "fdk").data
        parts = sum(back_project(st.subset(np.arange(6) == k), g, grid, "fdk").data for k in range(6))
        assert np.allclose(full, parts, rtol=1e-12, atol=1e-12)

    def test_weighted_quadrature_factor(self, rng):
        g = small_geom(n_views=6, det=48, pitch=0.4)
        grid = Grid.centered(12, 12, 8, 0.2)
        st = ProjectionStack(g.betas(), rng.uniform(size=(6, 48, 48)), 0.4, 0.4)
        a = back_project_weighted(st, g, grid).data
        b = back_project(st, g, grid, "fdk").data
        assert np.allclose(a, b * math.pi / 6, rtol=1e-12)

    def test_unknown_weighting(self):
        g = small_geom(n_views=2, det=16)
        st = ProjectionStack(g.betas(), np.zeros((2, 16, 16)), g.pitch_u, g.pitch_v)
        with pytest.raises(ValueError, match="weighting"):
            back_project(st, g, Grid.centered(4, 4, 4, 0.1), "cosine")

    def test_stack_geometry_mismatch(self):
        g = small_geom(n_views=2, det=16)
        st = ProjectionStack(g.betas(), np.zeros((2, 15, 16)), g.pitch_u, g.pitch_v)
        with pytest.raises(ValueError):
            back_project(st, g, Grid.centered(4, 4, 4, 0.1))


class TestNoise:
    def test_zero_sigma_is_identity(self, rng):
        st = ProjectionStack([0.0], rng.normal(size=(1, 8, 8)), 1.0, 1.0)
        out = add_noise(st, 0.0, seed=5)
        assert np.array_equal(out.data, st.data)
        assert out.data is not st.data

    def test_statistics(self):
        st = ProjectionStack([0.0, 1.0], np.zeros((2, 200, 200)), 1.0, 1.0)
        d = add_noise(st, 0.3, seed=11).data
        n = d.size
        assert abs(d.mean()) < 3 * 0.3 / math.sqrt(n)
        assert d.std() == pytest.approx(0.3, rel=0.01)

    def test_seeded(self):
        st = ProjectionStack([0.0], np.ones((1, 16, 16)), 1.0, 1.0)
        assert np.array_equal(add_noise(st, 0.1, seed=3).data, add_noise(st, 0.1, seed=3).data)
        assert not np.array_equal(add_noise(st, 0.1, seed=3).data, add_noise(st, 0.1, seed=4).data)

    def test_negative_sigma(self):
        with pytest.raises(ValueError):
            add_noise(ProjectionStack([0.0], np.ones((1, 2, 2)), 1.0, 1.0), -0.1)
