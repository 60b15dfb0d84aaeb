"""Set up a laminography scan, simulate a small circuit board and look at a view.

The source circles below the board on a cone of half-angle alpha while the
flat detector sits above it, parallel to the board.  Because the detector
axes never rotate, a point at fixed height traces a circle on the detector,
and its radius grows with the distance from the detector plane.

Run from the repository root::

    python demos/01_scan_and_project.py [output_dir]
"""

import sys
from pathlib import Path

import numpy as np

from sccl import ScanGeometry, forward_project, make_pcb_phantom, project_point
from sccl.geometry import backproj_weight, magnification
from sccl.io import write_pgm, write_stack, write_volume

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")

geom = ScanGeometry.from_degrees(
    45.0, dist_so=45.79, dist_sd=194.58, n_views=64, det_rows=192, det_cols=192, pitch_u=0.34, pitch_v=0.34
)
print(f"source plane z = {geom.source_z:.3f} mm, detector plane z = {geom.detector_z:.3f} mm")
print(f"magnification at the rotation centre: {magnification(geom, 0.0):.4f}")

# a point 1 mm above the centre sweeps a circle on the detector
betas = geom.betas()
uv = np.array([project_point(geom, b, (0.0, 0.0, 1.0)) for b in betas])
print(f"z = +1 mm point: detector circle radius {np.hypot(*uv.T).mean():.3f} mm")
uv = np.array([project_point(geom, b, (0.0, 0.0, -1.0)) for b in betas])
print(f"z = -1 mm point: detector circle radius {np.hypot(*uv.T).mean():.3f} mm")

# the distance weight used in backprojection falls off with height
for z in (-2.0, 0.0, 2.0):
    print(f"backprojection weight at z = {z:+.1f} mm: {backproj_weight(geom, z):.4f}")

board = make_pcb_phantom(100, 100, 30, 0.14, seed=7)
# the board is wider than the square field of view, so the projector warns
# that the outermost voxels are truncated in some views
stack = forward_project(board, geom)
print(f"projected {stack.n_views} views; max line integral {stack.data.max():.3f}")

write_volume(out / "board", board)
write_stack(out / "board_views", stack)
lo, hi = write_pgm(out / "view_000.pgm", stack.data[0])
write_pgm(out / "board_mid_layer.pgm", board.data[board.nz // 2])
print(f"wrote {out}/view_000.pgm (window {lo:.3f}..{hi:.3f}) and the board volume")
