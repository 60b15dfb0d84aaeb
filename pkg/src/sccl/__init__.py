"""Simulation and FDK-type reconstruction for square cross-section FOV
rotational computed laminography."""

__version__ = "0.1.0"

from .fdk import FilterKernel, quadrant_of, ramp_kernel, reconstruct_fdk
from .geometry import ScanGeometry, backproj_weight, preweight, project_point
from .metrics import MetricReport, evaluate, mssim, rmse, z_profile
from .phantom import make_cylinder, make_pcb_phantom, make_point, make_slab
from .projector import ProjectionStack, add_noise, back_project, back_project_weighted, forward_project
from .sirt import SirtOptions, residual_norms, sirt_reconstruct
from .volume import Grid, Volume

__all__ = [
    "FilterKernel",
    "Grid",
    "MetricReport",
    "ProjectionStack",
    "ScanGeometry",
    "SirtOptions",
    "Volume",
    "add_noise",
    "back_project",
    "back_project_weighted",
    "backproj_weight",
    "evaluate",
    "forward_project",
    "make_cylinder",
    "make_pcb_phantom",
    "make_point",
    "make_slab",
    "mssim",
    "preweight",
    "project_point",
    "quadrant_of",
    "ramp_kernel",
    "reconstruct_fdk",
    "residual_norms",
    "rmse",
    "sirt_reconstruct",
    "z_profile",
]
