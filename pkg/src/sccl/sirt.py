"""SIRT baseline built on the ray-driven / voxel-driven projector pair."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import ScanGeometry
from .projector import ProjectionStack, back_project, forward_project
from .volume import Grid, Volume

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SirtOptions:
    n_iters: int = 200
    relaxation: float = 1.0
    nonnegativity: bool = True

    def __post_init__(self):
        if int(self.n_iters) < 1:
            raise ValueError(f"n_iters must be >= 1, got {self.n_iters}")
        if not 0.0 < self.relaxation <= 2.0:
            raise ValueError(f"relaxation must lie in (0, 2], got {self.relaxation}")


@dataclass
class SirtRun:
    """Result of a SIRT run.

    ``residuals[k]`` is ``||b - A x_{k+1}||`` after update ``k + 1``;
    ``initial_residual`` is ``||b||`` for the zero start.
    """

    x: np.ndarray
    residuals: list = field(default_factory=list)
    initial_residual: float = 0.0


class NonFiniteResidual(FloatingPointError):
    pass


def _safe_reciprocal(a):
    out = np.zeros_like(a, dtype=np.float64)
    np.divide(1.0, a, out=out, where=a > 0)
    return out


def sirt(
    forward: Callable[[np.ndarray], np.ndarray],
    backward: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    x_shape,
    opts: SirtOptions = SirtOptions(),
    callback=None,
) -> SirtRun:
    """Generic SIRT: ``x <- x + lam * C * backward(R * (b - forward(x)))``.

    ``R`` and ``C`` are the reciprocal row sums (``forward`` of ones) and column
    sums (``backward`` of ones); rows or columns summing to zero are skipped.
    """
    b = np.asarray(b, dtype=np.float64)
    R = _safe_reciprocal(forward(np.ones(x_shape)))
    C = _safe_reciprocal(backward(np.ones(b.shape)))
    x = np.zeros(x_shape)
    run = SirtRun(x=x, initial_residual=float(np.linalg.norm(b)))

    ax = np.zeros(b.shape)
    for it in range(int(opts.n_iters)):
        r = b - ax
        x += opts.relaxation * C * backward(R * r)
        if opts.nonnegativity:
            np.maximum(x, 0.0, out=x)
        ax = forward(x)
        res = float(np.linalg.norm(b - ax))
        if not np.isfinite(res):
            raise NonFiniteResidual(f"residual became non-finite at iteration {it + 1}")
        run.residuals.append(res)
        if callback is not None:
            callback(it, x, res)
    return run


def sirt_reconstruct(
    stack: ProjectionStack, geom: ScanGeometry, grid: Grid, opts: SirtOptions = SirtOptions(), log_every: int = 0
) -> tuple[Volume, SirtRun]:
    """SIRT reconstruction of ``stack`` on ``grid``.

    Uses :func:`forward_project` as the system matrix and the unweighted
    voxel-driven :func:`back_project` as its transpose.
    """
    stack.check_matches(geom)
    betas = stack.betas

    def fwd(x):
        return forward_project(Volume(grid, x), geom, betas).data

    def bwd(y):
        return back_project(ProjectionStack(betas, y, stack.pitch_u, stack.pitch_v), geom, grid).data

    def report(it, x, res):
        if log_every and (it + 1) % log_every == 0:
            log.info("SIRT iteration %d: residual %.6g", it + 1, res)

    with warnings.catch_warnings():
        # ones-volume row sums routinely exceed the FOV; that is expected here
        warnings.filterwarnings("ignore", message="non-zero voxels project outside")
        run = sirt(fwd, bwd, stack.data, grid.shape, opts, callback=report)
    return Volume(grid, run.x), run


def residual_norms(run: SirtRun) -> list:
    """Per-iteration data residual norms, one per update."""
    return list(run.residuals)
