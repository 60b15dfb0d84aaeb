"""Command-line driver: ``simulate``, ``reconstruct``, ``evaluate`` and ``slice``.

Exit codes: 0 on success, 1 for invalid input (config, file format, raster
mismatch, out-of-range index), 2 for runtime or numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ReconConfig, geometry_summary, load_config
from .fdk import reconstruct_fdk
from .io import FormatError, read_stack, read_volume, write_pgm, write_stack, write_volume
from .metrics import default_roi, evaluate
from .phantom import make_cylinder, make_pcb_phantom, make_point, make_slab
from .projector import add_noise, forward_project, set_threads
from .sirt import sirt_reconstruct
from .volume import Grid, Volume

log = logging.getLogger("sccl")


class InputError(Exception):
    """User-facing input problem (exit code 1)."""


def build_phantom(cfg: ReconConfig) -> Volume:
    p, g = cfg.phantom, cfg.phantom_grid
    kind = p["type"]
    if kind == "pcb":
        if tuple(g.origin) != tuple(Grid.centered(g.nx, g.ny, g.nz, g.voxel_pitch).origin):
            raise InputError("phantom.center: the pcb phantom is always centred on the origin")
        return make_pcb_phantom(
            g.nx,
            g.ny,
            g.nz,
            g.voxel_pitch,
            layer_zs=p["layer_zs"],
            trace_attn=p["trace_attn"],
            substrate_attn=p["substrate_attn"],
            seed=p["seed"],
            n_vias=p["n_vias"],
            traces_per_layer=p["traces_per_layer"],
        )
    if kind == "cylinder":
        return make_cylinder(g, p["radius"], p["height"], p["value"])
    if kind == "point":
        return make_point(g, p["index"], p["value"])
    return make_slab(g, p["z0"], p["z1"], p["value"])


def _provenance(cfg: ReconConfig, args, method: str, wall: float) -> dict:
    return {
        "config_hash": cfg.digest(),
        "method": method,
        "wall_time_s": round(wall, 3),
        "deterministic": bool(args.deterministic),
        "threads": args.threads_used,
        "geometry": geometry_summary(cfg.geometry),
        "software": f"sccl {__version__}",
    }


def _check_stack(cfg: ReconConfig, stack):
    geom = cfg.geometry
    try:
        stack.check_matches(geom)
    except ValueError as exc:
        raise InputError(f"stack does not match config geometry: {exc}") from None
    if stack.n_views != geom.n_views:
        raise InputError(f"stack has {stack.n_views} views, config geometry.n_views is {geom.n_views}")
    if not np.allclose(stack.betas, geom.betas(), rtol=0, atol=1e-9):
        raise InputError("stack projection angles are not the uniform set implied by the config")


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if not cfg.phantom:
        raise InputError("phantom: simulate needs a phantom block")
    t0 = time.perf_counter()
    vol = build_phantom(cfg)
    stack = forward_project(vol, cfg.geometry)
    sigma = cfg.phantom["noise_sigma"]
    if sigma > 0:
        stack = add_noise(stack, sigma, seed=cfg.phantom["noise_seed"])
    wall = time.perf_counter() - t0
    out = cfg.output_dir
    stack_path = Path(args.stack) if args.stack else out / "projections"
    truth_path = Path(args.truth) if args.truth else out / "phantom"
    prov = _provenance(cfg, args, "forward_project", wall)
    write_stack(stack_path, stack, prov)
    write_volume(truth_path, vol, dict(prov, method="phantom"))
    print(f"stack  {stack_path}.raw ({stack.n_views} views, {stack.det_rows}x{stack.det_cols})")
    print(f"truth  {truth_path}.raw ({vol.nx}x{vol.ny}x{vol.nz})")
    return 0


def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config)
    stack, _ = read_stack(args.stack)
    _check_stack(cfg, stack)
    method = cfg.recon["method"]
    t0 = time.perf_counter()
    if method == "fdk":
        vol = reconstruct_fdk(stack, cfg.geometry, cfg.recon_grid, window=cfg.recon["window"], half_width=cfg.recon["half_width"])
    else:
        vol, run = sirt_reconstruct(stack, cfg.geometry, cfg.recon_grid, cfg.sirt_options, log_every=args.log_every)
        log.info("SIRT residual %.6g -> %.6g", run.initial_residual, run.residuals[-1])
    wall = time.perf_counter() - t0
    if not np.all(np.isfinite(vol.data)):
        raise FloatingPointError("reconstruction contains non-finite values")
    out = Path(args.out) if args.out else cfg.output_dir / f"recon_{method}"
    write_volume(out, vol, _provenance(cfg, args, method, wall))
    print(f"volume {out}.raw ({method}, {wall:.2f} s)")
    for s in cfg.output["slices"]:
        img = out.with_name(f"{out.name}_{s['axis']}{s['index']:04d}.pgm")
        write_pgm(img, _take_slice(vol, s["axis"], s["index"]))
        print(f"slice  {img}")
    return 0


def cmd_evaluate(args) -> int:
    vol, _ = read_volume(args.volume)
    ref, _ = read_volume(args.reference)
    if vol.grid.shape != ref.grid.shape:
        raise InputError(f"raster mismatch: {vol.grid.shape_xyz} vs reference {ref.grid.shape_xyz}")
    roi = default_roi(ref.grid.shape, args.margin)
    report = evaluate(vol, ref, roi)
    text = f"rmse {report.rmse:.9g}\nmssim {report.mssim:.9g}\nroi_zyx {list(map(list, report.roi))}\n"
    sys.stdout.write(text)
    out = Path(args.out) if args.out else Path(str(args.volume).removesuffix(".json").removesuffix(".raw") + "_metrics.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = report.as_dict()
    doc.update(volume=str(args.volume), reference=str(args.reference))
    out.write_text(json.dumps(doc, indent=2) + "\n")
    return 0


def _take_slice(vol: Volume, axis: str, index: int) -> np.ndarray:
    n = dict(zip("xyz", vol.grid.shape_xyz))[axis]
    if not 0 <= index < n:
        raise InputError(f"slice index {index} outside [0, {n}) along {axis}")
    if axis == "z":
        return vol.data[index]
    if axis == "y":
        return vol.data[:, index, :]
    return vol.data[:, :, index]


def cmd_slice(args) -> int:
    vol, _ = read_volume(args.volume)
    lo, hi = write_pgm(args.out, _take_slice(vol, args.axis, args.index))
    print(f"slice  {args.out} window [{lo:.6g}, {hi:.6g}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sccl", description="Square cross-section FOV laminography toolkit.")
    ap.add_argument("--threads", type=int, default=None, help="worker threads for the compute kernels")
    ap.add_argument(
        "--deterministic",
        action="store_true",
        help="fixed accumulation order (the kernels always use one; recorded in sidecars)",
    )
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="build the phantom and forward project it")
    p.add_argument("--config", required=True)
    p.add_argument("--stack", help="output stack path (default: <output.dir>/projections)")
    p.add_argument("--truth", help="output phantom path (default: <output.dir>/phantom)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct a stack with FDK or SIRT")
    p.add_argument("--config", required=True)
    p.add_argument("--stack", required=True)
    p.add_argument("--out", help="output volume path (default: <output.dir>/recon_<method>)")
    p.add_argument("--log-every", type=int, default=0, help="SIRT progress interval")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="RMSE and MSSIM against a reference volume")
    p.add_argument("volume")
    p.add_argument("reference")
    p.add_argument("--margin", type=int, default=5, help="ROI margin in voxels")
    p.add_argument("--out", help="report path (default: <volume>_metrics.json)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("slice", help="export one slice as a 16-bit PGM")
    p.add_argument("volume")
    p.add_argument("--axis", choices=("x", "y", "z"), required=True)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_slice)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; those are input problems here
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    args.threads_used = set_threads(args.threads) if args.threads else None
    try:
        return args.func(args)
    except (ConfigError, FormatError, InputError, FileNotFoundError, ValueError, IndexError) as exc:
        # ValueError/IndexError come from module preconditions on the inputs
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # numerical or runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
