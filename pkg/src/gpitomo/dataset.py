"""Dataset pipeline: [-1, 1] normalization with invertible scale records,
volume resampling, seeded train/test splits, and on-disk sample generation.

Normalization is per-sample min-max (volume and projection set each keep
their own scale record) so that metrics can always be computed back in
original units and no information leaks across samples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.ndimage import map_coordinates

from .geometry import ConeBeamGeometry, make_view_angles
from .gtf import read_gtf, write_gtf
from .images import ProjectionSet, Volume3D
from .phantom import random_anatomy_phantom
from .projector import forward_project

__all__ = ["ScaleRecord", "SampleRecord", "DatasetManifest",
           "normalize", "denormalize", "resample_volume",
           "build_dataset", "load_manifest", "split_counts", "export_learned"]


@dataclass(frozen=True)
class ScaleRecord:
    """Inverse of a min-max map onto [-1, 1]."""

    lo: float
    hi: float
    degenerate: bool = False

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(lo=float(d["lo"]), hi=float(d["hi"]),
                   degenerate=bool(d["degenerate"]))


def normalize(tensor):
    """Linear map min -> -1, max -> +1; constant input maps to all zeros."""
    arr = np.asarray(tensor, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("cannot normalize: non-finite values present")
    lo, hi = float(arr.min()), float(arr.max())
    if lo == hi:
        return np.zeros_like(arr), ScaleRecord(lo, hi, degenerate=True)
    out = (arr - lo) * (2.0 / (hi - lo)) - 1.0
    return out, ScaleRecord(lo, hi)


def denormalize(tensor, record: ScaleRecord):
    """Exact inverse of normalize; a degenerate record rebuilds the constant."""
    arr = np.asarray(tensor, dtype=np.float64)
    if record.degenerate:
        return np.full_like(arr, record.lo)
    return (arr + 1.0) * (0.5 * (record.hi - record.lo)) + record.lo


def resample_volume(volume: Volume3D, target_dims, target_spacing) -> Volume3D:
    """Trilinear resample onto a new isocenter-centered grid.

    Target voxel centers are expressed in the source's physical frame;
    samples outside the source grid take the nearest-edge value.
    """
    nx, ny, nz = (int(d) for d in target_dims)
    sx, sy, sz = (float(s) for s in target_spacing)
    if min(nx, ny, nz) < 1 or min(sx, sy, sz) <= 0:
        raise ValueError(f"bad resample target {target_dims} @ {target_spacing}")
    if (nx, ny, nz) == volume.dims and np.allclose((sx, sy, sz), volume.spacing):
        return Volume3D(volume.data.copy(), volume.spacing)

    snz, sny, snx = volume.data.shape
    ssx, ssy, ssz = volume.spacing
    xs = ((np.arange(nx) - 0.5 * (nx - 1)) * sx) / ssx + 0.5 * (snx - 1)
    ys = ((np.arange(ny) - 0.5 * (ny - 1)) * sy) / ssy + 0.5 * (sny - 1)
    zs = ((np.arange(nz) - 0.5 * (nz - 1)) * sz) / ssz + 0.5 * (snz - 1)
    zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")
    data = map_coordinates(volume.data, [zz, yy, xx], order=1, mode="nearest")
    return Volume3D(data, (sx, sy, sz))


def split_counts(n_samples, train_fraction=0.8):
    """round(f*n) train samples, clamped so both splits are non-empty for n>=2."""
    n_train = int(round(train_fraction * n_samples))
    if n_samples >= 2:
        n_train = min(max(n_train, 1), n_samples - 1)
    else:
        n_train = n_samples
    return n_train, n_samples - n_train


@dataclass
class SampleRecord:
    sample_id: str
    split: str
    volume_path: str
    projections_path: str
    volume_scale: ScaleRecord
    projection_scale: ScaleRecord
    phantom_seed: int

    def to_dict(self):
        d = asdict(self)
        d["volume_scale"] = self.volume_scale.to_dict()
        d["projection_scale"] = self.projection_scale.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["volume_scale"] = ScaleRecord.from_dict(d["volume_scale"])
        d["projection_scale"] = ScaleRecord.from_dict(d["projection_scale"])
        return cls(**d)


@dataclass
class DatasetManifest:
    geometry: ConeBeamGeometry
    seed: int
    train_fraction: float
    m_gen_views: int
    samples: list = field(default_factory=list)
    root: Path | None = None

    def train_samples(self):
        return [s for s in self.samples if s.split == "train"]

    def test_samples(self):
        return [s for s in self.samples if s.split == "test"]

    def to_dict(self):
        return {
            "geometry": json.loads(self.geometry.to_json()),
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "m_gen_views": self.m_gen_views,
            "samples": [s.to_dict() for s in self.samples],
        }

    def save(self, root):
        root = Path(root)
        path = root / "manifest.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    def load_volume(self, sample: SampleRecord, denorm=False):
        arr, _ = read_gtf(Path(self.root) / sample.volume_path)
        arr = arr.astype(np.float64)
        if denorm:
            arr = denormalize(arr, sample.volume_scale)
        g = self.geometry
        return Volume3D(arr, (g.voxel_spacing_x, g.voxel_spacing_y, g.voxel_spacing_z))

    def load_projections(self, sample: SampleRecord, denorm=False) -> ProjectionSet:
        arr, meta = read_gtf(Path(self.root) / sample.projections_path)
        arr = arr.astype(np.float64)
        if denorm:
            arr = denormalize(arr, sample.projection_scale)
        angles = [math.radians(a) for a in meta["angles_deg"]]
        g = self.geometry
        return ProjectionSet.from_array(arr, angles,
                                        (g.detector_pitch_u, g.detector_pitch_v))


def build_dataset(n_samples, seed, geom: ConeBeamGeometry, out_dir,
                  m_gen_views=12, train_fraction=0.8) -> DatasetManifest:
    """Generate phantoms, project them at the generated-view angles, normalize,
    split 80/20 by a seeded shuffle, and write everything under out_dir."""
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ss = np.random.SeedSequence(int(seed))
    phantom_seeds = ss.generate_state(n_samples, dtype=np.uint64)
    shuffle_rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    order = shuffle_rng.permutation(n_samples)
    n_train, _ = split_counts(n_samples, train_fraction)
    split = {int(order[i]): ("train" if i < n_train else "test")
             for i in range(n_samples)}

    angles = make_view_angles(m_gen_views, mode="generated")
    dims = (geom.volume_nx, geom.volume_ny, geom.volume_nz)
    spacing = (geom.voxel_spacing_x, geom.voxel_spacing_y, geom.voxel_spacing_z)

    manifest = DatasetManifest(geometry=geom, seed=int(seed),
                               train_fraction=float(train_fraction),
                               m_gen_views=int(m_gen_views), root=out_dir)
    for i in range(n_samples):
        sid = f"sample_{i:04d}"
        try:
            vol = random_anatomy_phantom(int(phantom_seeds[i]), dims, spacing)
            projs = forward_project(vol, geom, angles)
            vol_norm, vol_scale = normalize(vol.data)
            proj_norm, proj_scale = normalize(projs.as_array())
            vol_path = f"{sid}_volume.gtf"
            proj_path = f"{sid}_projections.gtf"
            write_gtf(out_dir / vol_path, vol_norm,
                      metadata={"axis_order": "zyx",
                                "scale": vol_scale.to_dict()})
            write_gtf(out_dir / proj_path, proj_norm,
                      metadata={"axis_order": "view,v,u",
                                "angles_deg": angles.degrees(),
                                "scale": proj_scale.to_dict()})
        except OSError as e:
            raise OSError(f"failed writing sample {sid}: {e}") from e
        manifest.samples.append(SampleRecord(
            sample_id=sid, split=split[i],
            volume_path=vol_path, projections_path=proj_path,
            volume_scale=vol_scale, projection_scale=proj_scale,
            phantom_seed=int(phantom_seeds[i])))
    manifest.save(out_dir)
    return manifest


def load_manifest(root) -> DatasetManifest:
    root = Path(root)
    d = json.loads((root / "manifest.json").read_text())
    manifest = DatasetManifest(
        geometry=ConeBeamGeometry.from_json(json.dumps(d["geometry"])),
        seed=int(d["seed"]),
        train_fraction=float(d["train_fraction"]),
        m_gen_views=int(d["m_gen_views"]),
        samples=[SampleRecord.from_dict(s) for s in d["samples"]],
        root=root,
    )
    for s in manifest.samples:
        for rel in (s.volume_path, s.projections_path):
            if not (root / rel).exists():
                raise FileNotFoundError(f"manifest references missing file {rel}")
    ids = [s.sample_id for s in manifest.samples]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate sample ids in manifest")
    return manifest


def _select_views(projections: ProjectionSet, wanted_angles, tol=1e-9):
    """Subset of projections matching the wanted angles (radians, exact)."""
    selected = []
    for target in wanted_angles:
        hit = None
        for p in projections:
            if abs(p.theta - target) <= tol:
                hit = p
                break
        if hit is None:
            raise ValueError(
                f"input angle {math.degrees(target):.3f} deg not present in the "
                f"stored view set {[round(math.degrees(p.theta), 3) for p in projections]}")
        selected.append(hit)
    return ProjectionSet(selected)


def export_learned(manifest: DatasetManifest, out_dir, n_input_views):
    """Write the paired tensors the learned stage consumes.

    Per sample: the normalized ground-truth volume, the normalized GPI from
    the n measured input views, and the normalized GPI from all generated
    views. GPIs are back-projected from original-unit projections and then
    normalized per sample (their raw magnitude grows with view count).
    """
    from .backproject import backproject

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    geom = manifest.geometry
    input_angles = make_view_angles(n_input_views, mode="input")

    records = []
    for s in manifest.samples:
        projs = manifest.load_projections(s, denorm=True)
        src = _select_views(projs, input_angles)
        gpi_src = backproject(src, geom)
        gpi_gen = backproject(projs, geom)
        src_norm, src_scale = normalize(gpi_src.data)
        gen_norm, gen_scale = normalize(gpi_gen.data)
        vol_norm = manifest.load_volume(s, denorm=False)
        vol_path = f"{s.sample_id}_volume.gtf"
        write_gtf(out_dir / vol_path, vol_norm.data,
                  metadata={"axis_order": "zyx",
                            "scale": s.volume_scale.to_dict()})
        src_path = f"{s.sample_id}_gpi_src.gtf"
        gen_path = f"{s.sample_id}_gpi_gen.gtf"
        write_gtf(out_dir / src_path, src_norm,
                  metadata={"axis_order": "zyx", "scale": src_scale.to_dict(),
                            "angles_deg": input_angles.degrees()})
        write_gtf(out_dir / gen_path, gen_norm,
                  metadata={"axis_order": "zyx", "scale": gen_scale.to_dict(),
                            "angles_deg": projs.angles.degrees()})
        records.append({
            "sample_id": s.sample_id,
            "split": s.split,
            "volume_path": vol_path,
            "gpi_src_path": src_path,
            "gpi_gen_path": gen_path,
            "volume_scale": s.volume_scale.to_dict(),
            "projection_scale": s.projection_scale.to_dict(),
            "gpi_src_scale": src_scale.to_dict(),
            "gpi_gen_scale": gen_scale.to_dict(),
        })

    doc = {
        "geometry": json.loads(geom.to_json()),
        "n_input_views": int(n_input_views),
        "m_gen_views": manifest.m_gen_views,
        "input_angles_deg": input_angles.degrees(),
        "seed": manifest.seed,
        "samples": records,
    }
    path = out_dir / "learned_manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
