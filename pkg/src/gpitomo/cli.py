"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric or
geometry error. Angles are given in degrees on the command line; everything
internal is radians. All subcommands are deterministic given their flags,
seed, and input bytes; ``--threads`` is accepted for interface stability and
never changes outputs.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .backproject import backproject
from .dataset import (build_dataset, export_learned, load_manifest)
from .geometry import (ConeBeamGeometry, GeometryError, ViewAngleSet,
                       make_geometry, make_view_angles)
from .gtf import GtfError, read_gtf, write_gtf
from .images import ProjectionSet, Volume3D
from .metrics import evaluate
from .phantom import random_anatomy_phantom
from .projector import forward_project
from .recon import SartParams, sart_reconstruct, view_sweep

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_geometry(args) -> ConeBeamGeometry:
    if args.geometry:
        path = Path(args.geometry)
        if not path.exists():
            raise FileNotFoundError(f"geometry file not found: {path}")
        return ConeBeamGeometry.from_json(path.read_text())
    return make_geometry()


def _load_volume(path, geom) -> Volume3D:
    arr, _ = read_gtf(path)
    return Volume3D(arr.astype(np.float64),
                    (geom.voxel_spacing_x, geom.voxel_spacing_y,
                     geom.voxel_spacing_z))


def _load_projections(path, geom) -> ProjectionSet:
    arr, meta = read_gtf(path)
    if meta is None or "angles_deg" not in meta:
        raise GtfError(f"{path}: missing angles_deg metadata sidecar")
    angles = [math.radians(a) for a in meta["angles_deg"]]
    return ProjectionSet.from_array(arr.astype(np.float64), angles,
                                    (geom.detector_pitch_u, geom.detector_pitch_v))


def _parse_angles(spec) -> ViewAngleSet:
    degs = sorted(float(x) % 360.0 for x in spec.split(","))
    return ViewAngleSet(tuple(math.radians(d) for d in degs))


def _cmd_phantom(args):
    geom = _load_geometry(args)
    dims = (geom.volume_nx, geom.volume_ny, geom.volume_nz)
    spacing = (geom.voxel_spacing_x, geom.voxel_spacing_y, geom.voxel_spacing_z)
    vol = random_anatomy_phantom(args.seed, dims, spacing)
    write_gtf(args.out, vol.data, metadata={"axis_order": "zyx",
                                            "seed": args.seed})
    return EXIT_OK


def _cmd_project(args):
    geom = _load_geometry(args)
    vol = _load_volume(args.volume, geom)
    if args.angles:
        angles = _parse_angles(args.angles)
    else:
        angles = make_view_angles(args.views, mode=args.mode)
    projs = forward_project(vol, geom, angles)
    write_gtf(args.out, projs.as_array(),
              metadata={"axis_order": "view,v,u",
                        "angles_deg": angles.degrees()})
    return EXIT_OK


def _cmd_backproject(args):
    geom = _load_geometry(args)
    projs = _load_projections(args.projections, geom)
    gpi = backproject(projs, geom)
    write_gtf(args.out, gpi.data,
              metadata={"axis_order": "zyx",
                        "angles_deg": projs.angles.degrees()})
    return EXIT_OK


def _cmd_dataset(args):
    geom = _load_geometry(args)
    build_dataset(args.n, args.seed, geom, args.out,
                  m_gen_views=args.views,
                  train_fraction=args.train_fraction)
    return EXIT_OK


def _cmd_recon(args):
    geom = _load_geometry(args)
    projs = _load_projections(args.projections, geom)
    params = SartParams(iterations=args.iterations,
                        relaxation=args.relaxation,
                        tv_weight=args.tv_weight,
                        tv_steps=args.tv_steps,
                        nonnegative=args.nonnegative)
    vol = sart_reconstruct(projs, geom, params)
    write_gtf(args.out, vol.data, metadata={"axis_order": "zyx"})
    return EXIT_OK


def _cmd_sweep(args):
    manifest = load_manifest(args.dataset)
    counts = [int(x) for x in args.views.split(",")]
    params = SartParams(iterations=args.iterations,
                        relaxation=args.relaxation,
                        tv_weight=args.tv_weight)
    report = view_sweep(manifest, counts, method=args.method, params=params)
    out = Path(args.out)
    out.write_text(report.to_csv())
    config = {"views": counts, "iterations": args.iterations,
              "relaxation": args.relaxation, "tv_weight": args.tv_weight,
              "dataset": str(args.dataset)}
    Path(str(out) + ".json").write_text(report.sidecar(config))
    return EXIT_OK


def _cmd_eval(args):
    pred, _ = read_gtf(args.pred)
    truth, _ = read_gtf(args.truth)
    report = evaluate(pred.astype(np.float64), truth.astype(np.float64))
    d = report.to_dict()
    if d["psnr_infinite"]:
        d["psnr"] = None
    print(json.dumps(d, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_export_learned(args):
    manifest = load_manifest(args.dataset)
    export_learned(manifest, args.out, args.input_views)
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="gpitomo",
                     description="Cone-beam geometry engine and sparse-view "
                                 "reconstruction toolkit")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker count hint; outputs never depend on it")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--geometry", help="geometry JSON path (defaults apply)")

    p = sub.add_parser("phantom", help="write a seeded procedural phantom volume")
    common(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("project", help="forward-project a volume (DRRs)")
    common(p)
    p.add_argument("--volume", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--views", type=int, default=12)
    p.add_argument("--mode", choices=["input", "generated"], default="generated")
    p.add_argument("--angles", help="explicit comma-separated angles in degrees")
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("backproject", help="back-project projections to a GPI")
    common(p)
    p.add_argument("--projections", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_backproject)

    p = sub.add_parser("dataset", help="build a phantom dataset on disk")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--views", type=int, default=12,
                   help="generated views per sample")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("recon", help="SART reconstruction")
    common(p)
    p.add_argument("--projections", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=20)
    p.add_argument("--relaxation", type=float, default=1.0)
    p.add_argument("--tv-weight", type=float, default=0.0)
    p.add_argument("--tv-steps", type=int, default=5)
    p.add_argument("--nonnegative", action="store_true")
    p.set_defaults(func=_cmd_recon)

    p = sub.add_parser("sweep", help="view-count sweep with metrics CSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--views", required=True,
                   help="comma-separated input view counts")
    p.add_argument("--method", choices=["gpi", "sart", "gpi-sart"],
                   default="gpi-sart")
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--relaxation", type=float, default=1.0)
    p.add_argument("--tv-weight", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0,
                   help="recorded in the sidecar; sweeps are deterministic")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("eval", help="metrics between two GTF tensors")
    p.add_argument("pred")
    p.add_argument("truth")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("export-learned",
                       help="write GPI/volume pairs for the learned stage")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--input-views", type=int, required=True)
    p.set_defaults(func=_cmd_export_learned)
    return parser


def run_cli(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if e.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except (GtfError, FileNotFoundError, json.JSONDecodeError, KeyError, OSError) as e:
        print(f"gpitomo: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (GeometryError, ValueError, ZeroDivisionError,
            FloatingPointError) as e:
        print(f"gpitomo: numeric/geometry error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
