import numpy as np
import pytest

from sccl.projector import ProjectionStack, back_project, forward_project
from sccl.sirt import NonFiniteResidual, SirtOptions, residual_norms, sirt, sirt_reconstruct
from sccl.volume import Grid, Volume

from conftest import small_geom


def block_phantom(n):
    grid = Grid.centered(n, n, n, 0.1)
    data = np.zeros(grid.shape)
    data[n // 4 : 3 * n // 4, n // 5 : 4 * n // 5, n // 3 : 2 * n // 3] = 0.5
    data[n // 2 :, : n // 2, : n // 2] += 0.3
    return Volume(grid, data)


def matrix_ops(A):
    return (lambda x: A @ x), (lambda y: A.T @ y)


class TestGenericSirt:
    def test_scalar_one_step(self):
        # x1 = lam * (1/2) * 2 * (1/2) * 4 = 2 for A = [2], b = [4]
        run = sirt(lambda x: 2.0 * x, lambda y: 2.0 * y, np.array([4.0]), (1,), SirtOptions(n_iters=1))
        assert run.x[0] == 2.0
        assert run.residuals == [0.0]

    def test_first_step_unrolled(self, rng):
        A = rng.uniform(0, 1, (7, 5))
        A[:, 3] = 0.0  # an unused column is skipped, not divided by zero
        b = rng.uniform(0, 1, 7)
        fwd, bwd = matrix_ops(A)
        run = sirt(fwd, bwd, b, (5,), SirtOptions(n_iters=1, relaxation=0.8, nonnegativity=False))
        R = 1.0 / A.sum(axis=1)
        C = np.zeros(5)
        C[A.sum(axis=0) > 0] = 1.0 / A.sum(axis=0)[A.sum(axis=0) > 0]
        want = 0.8 * C * (A.T @ (R * b))
        assert np.allclose(run.x, want, rtol=1e-14, atol=0)
        assert run.residuals[0] == pytest.approx(np.linalg.norm(b - A @ want), rel=1e-12)

    def test_converges_on_consistent_system(self, rng):
        A = rng.uniform(0, 1, (40, 12))
        x_true = rng.uniform(0, 1, 12)
        fwd, bwd = matrix_ops(A)
        run = sirt(fwd, bwd, A @ x_true, (12,), SirtOptions(n_iters=3000))
        assert np.allclose(run.x, x_true, atol=1e-6)

    def test_nonnegativity_clamp(self, rng):
        A = np.eye(3)
        fwd, bwd = matrix_ops(A)
        b = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(sirt(fwd, bwd, b, (3,), SirtOptions(1)).x, [1.0, 0.0, 3.0])
        assert np.array_equal(sirt(fwd, bwd, b, (3,), SirtOptions(1, nonnegativity=False)).x, b)

    def test_zero_data(self):
        fwd, bwd = matrix_ops(np.ones((3, 2)))
        run = sirt(fwd, bwd, np.zeros(3), (2,), SirtOptions(5))
        assert not run.x.any()
        assert run.residuals == [0.0] * 5
        assert run.initial_residual == 0.0

    def test_non_finite_residual(self):
        fwd, bwd = matrix_ops(np.ones((1, 1)))
        with pytest.raises(NonFiniteResidual), np.errstate(invalid="ignore"):
            sirt(fwd, bwd, np.array([np.inf]), (1,), SirtOptions(1, nonnegativity=False))

    def test_callback(self):
        seen = []
        fwd, bwd = matrix_ops(np.eye(2))
        sirt(fwd, bwd, np.ones(2), (2,), SirtOptions(3), callback=lambda it, x, r: seen.append(it))
        assert seen == [0, 1, 2]

    @pytest.mark.parametrize("kw", [dict(n_iters=0), dict(relaxation=0.0), dict(relaxation=2.5)])
    def test_rejects_bad_options(self, kw):
        with pytest.raises(ValueError):
            SirtOptions(**kw)


class TestSirtReconstruct:
    def test_residual_non_increasing_16(self):
        vol = block_phantom(16)
        g = small_geom(n_views=32, det=64, pitch=0.25)
        stack = forward_project(vol, g)
        _, run = sirt_reconstruct(stack, g, vol.grid, SirtOptions(50))
        r = np.array(residual_norms(run))
        assert r.size == 50
        assert r[0] < run.initial_residual
        assert np.all(np.diff(r) <= 0)

    def test_residual_small_32(self):
        vol = block_phantom(32)
        g = small_geom(n_views=48, det=128, pitch=0.25)
        stack = forward_project(vol, g)
        rec, run = sirt_reconstruct(stack, g, vol.grid, SirtOptions(100))
        assert run.residuals[-1] / run.initial_residual < 0.05
        assert np.all(rec.data >= 0)

    def test_zero_stack(self):
        g = small_geom(n_views=8, det=32)
        grid = Grid.centered(6, 6, 6, 0.2)
        stack = ProjectionStack(g.betas(), np.zeros((8, 32, 32)), g.pitch_u, g.pitch_v)
        rec, run = sirt_reconstruct(stack, g, grid, SirtOptions(3))
        assert not rec.data.any()
        assert residual_norms(run) == [0.0, 0.0, 0.0]

    def test_uses_unweighted_backprojection(self, rng):
        # one step from zero equals C * B(R * b) with the plain voxel-driven B
        g = small_geom(n_views=6, det=40, pitch=0.3)
        grid = Grid.centered(8, 8, 6, 0.15)
        stack = forward_project(Volume(grid, rng.uniform(0, 1, grid.shape)), g)
        rec, _ = sirt_reconstruct(stack, g, grid, SirtOptions(1, nonnegativity=False))
        ones_img = ProjectionStack(g.betas(), np.ones(stack.data.shape), g.pitch_u, g.pitch_v)
        rows = forward_project(Volume(grid, np.ones(grid.shape)), g).data
        R = np.divide(1.0, rows, out=np.zeros_like(rows), where=rows > 0)
        C = 1.0 / back_project(ones_img, g, grid).data
        scaled = ProjectionStack(g.betas(), R * stack.data, g.pitch_u, g.pitch_v)
        want = C * back_project(scaled, g, grid).data
        assert np.allclose(rec.data, want, rtol=1e-12)
