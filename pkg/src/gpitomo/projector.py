"""Forward models: ray-marching DRRs, an exact-adjoint splat projector, and a
Siddon exact-path oracle.

Two forward models exist on purpose. ``forward_project`` is the realistic DRR
generator (trilinear samples along each source-to-pixel ray, Joseph-style).
``splat_project`` deposits each voxel onto the detector with the same bilinear
weights the back-projector uses to read it, so its matrix is exactly the
transpose of the back-projection matrix; it exists to make adjointness
testable, not to make pretty images.
"""

from __future__ import annotations

import numpy as np

from .geometry import (ConeBeamGeometry, GeometryError, ViewAngleSet,
                       detector_coords, detector_point, pixel_to_uv,
                       source_position, uv_to_pixel)
from .images import Projection2D, ProjectionSet, Volume3D

__all__ = ["forward_project", "splat_project", "siddon_line_integral",
           "siddon_project", "bilinear_coeffs"]

_PARALLEL_EPS = 1e-12


def _index_coords(volume, points):
    """Physical (..., 3) mm points -> fractional (ix, iy, iz) voxel indices."""
    nz, ny, nx = volume.data.shape
    sx, sy, sz = volume.spacing
    ix = points[..., 0] / sx + 0.5 * (nx - 1)
    iy = points[..., 1] / sy + 0.5 * (ny - 1)
    iz = points[..., 2] / sz + 0.5 * (nz - 1)
    return ix, iy, iz


def _trilinear(volume, points):
    """Sample the volume at physical points; outside the grid reads as 0."""
    nz, ny, nx = volume.data.shape
    ix, iy, iz = _index_coords(volume, points)
    x0 = np.floor(ix).astype(np.int64)
    y0 = np.floor(iy).astype(np.int64)
    z0 = np.floor(iz).astype(np.int64)
    fx, fy, fz = ix - x0, iy - y0, iz - z0

    out = np.zeros(ix.shape, dtype=np.float64)
    for dz in (0, 1):
        wz = fz if dz else 1.0 - fz
        for dy in (0, 1):
            wy = fy if dy else 1.0 - fy
            for dx in (0, 1):
                wx = fx if dx else 1.0 - fx
                xi, yi, zi = x0 + dx, y0 + dy, z0 + dz
                ok = ((xi >= 0) & (xi < nx) & (yi >= 0) & (yi < ny)
                      & (zi >= 0) & (zi < nz))
                vals = volume.data[zi.clip(0, nz - 1),
                                   yi.clip(0, ny - 1),
                                   xi.clip(0, nx - 1)]
                out += np.where(ok, wx * wy * wz * vals, 0.0)
    return out


def _ray_bounds(volume, src, dirs):
    """Entry/exit parameters of segments src + t*dirs, t in [0, 1], against
    the volume's trilinear support box (one spacing beyond the voxel centers)."""
    nz, ny, nx = volume.data.shape
    sx, sy, sz = volume.spacing
    half = np.array([0.5 * (nx - 1) * sx + sx,
                     0.5 * (ny - 1) * sy + sy,
                     0.5 * (nz - 1) * sz + sz])
    t_in = np.zeros(dirs.shape[:-1])
    t_out = np.ones(dirs.shape[:-1])
    for a in range(3):
        d = dirs[..., a]
        safe = np.where(np.abs(d) > _PARALLEL_EPS, d, _PARALLEL_EPS)
        t0 = (-half[a] - src[a]) / safe
        t1 = (half[a] - src[a]) / safe
        lo, hi = np.minimum(t0, t1), np.maximum(t0, t1)
        parallel = np.abs(d) <= _PARALLEL_EPS
        inside = np.abs(src[a]) <= half[a]
        lo = np.where(parallel, np.where(inside, 0.0, 1.0), lo)
        hi = np.where(parallel, np.where(inside, 1.0, 0.0), hi)
        t_in = np.maximum(t_in, lo)
        t_out = np.minimum(t_out, hi)
    return t_in, t_out


def forward_project(volume: Volume3D, geom: ConeBeamGeometry,
                    angles: ViewAngleSet, max_chunk=1_000_000) -> ProjectionSet:
    """Ray-marched line integrals source -> pixel center for every view.

    Step size is min(spacing)/2; the per-ray step is shrunk to divide the
    in-box chord exactly, and each sample is weighted by the step so the
    output carries intensity*mm units.
    """
    volume.require_match(geom)
    h = 0.5 * min(volume.spacing)
    nu, nv = geom.detector_nu, geom.detector_nv
    pu = np.arange(nu, dtype=np.float64)
    pv = np.arange(nv, dtype=np.float64)
    aa, bb = np.meshgrid(pu, pv)  # (nv, nu)
    u, v = pixel_to_uv(geom, (aa, bb))

    projections = []
    for theta in angles:
        src = source_position(geom, theta)
        det = detector_point(geom, u, v, theta)  # (nv, nu, 3)
        dirs = det - src
        lengths = np.linalg.norm(dirs, axis=-1)
        t_in, t_out = _ray_bounds(volume, src, dirs)
        chord = np.maximum(t_out - t_in, 0.0) * lengths
        n_steps = np.ceil(chord / h).astype(np.int64)

        img = np.zeros((nv, nu), dtype=np.float64)
        flat_dirs = dirs.reshape(-1, 3)
        flat_tin = t_in.ravel()
        flat_n = n_steps.ravel()
        flat_chord = chord.ravel()
        flat_span = np.maximum(t_out - t_in, 0.0).ravel()
        out = img.ravel()

        active = np.flatnonzero(flat_n > 0)
        if active.size:
            n_max = int(flat_n[active].max())
            rows_per_chunk = max(1, max_chunk // max(n_max, 1))
            for start in range(0, active.size, rows_per_chunk):
                idx = active[start:start + rows_per_chunk]
                n_i = flat_n[idx]
                dt = flat_span[idx] / n_i
                w = flat_chord[idx] / n_i
                # pad every ray to the global max step count so the axis-1
                # summation order cannot depend on the chunk boundaries
                j = np.arange(n_max)
                mask = j[None, :] < n_i[:, None]
                t = flat_tin[idx, None] + (j[None, :] + 0.5) * dt[:, None]
                pts = src + t[..., None] * flat_dirs[idx, None, :]
                samples = _trilinear(volume, pts)
                out[idx] = np.sum(samples * mask, axis=1) * w
        projections.append(Projection2D(img, theta,
                                        (geom.detector_pitch_u, geom.detector_pitch_v)))
    return ProjectionSet(projections)


def bilinear_coeffs(geom: ConeBeamGeometry, points, theta):
    """Detector footprint of 3D points at view ``theta``.

    Returns (a0, b0, weights, masks): the integer pixel corner (a0, b0) plus
    per-corner bilinear weights and in-bounds masks, in the fixed corner order
    (0,0), (1,0), (0,1), (1,1). Shared by backproject and splat_project so the
    two operators are exact algebraic transposes.
    """
    u, v = detector_coords(geom, points, theta)
    a, b = uv_to_pixel(geom, (u, v))
    a0 = np.floor(a).astype(np.int64)
    b0 = np.floor(b).astype(np.int64)
    fa, fb = a - a0, b - b0
    weights = ((1 - fa) * (1 - fb), fa * (1 - fb), (1 - fa) * fb, fa * fb)
    nu, nv = geom.detector_nu, geom.detector_nv
    masks = []
    for da, db in ((0, 0), (1, 0), (0, 1), (1, 1)):
        ai, bi = a0 + da, b0 + db
        masks.append((ai >= 0) & (ai < nu) & (bi >= 0) & (bi < nv))
    return a0, b0, weights, masks


def _voxel_center_grid(geom):
    """(nz, ny, nx, 3) physical voxel-center coordinates."""
    xs, ys, zs = geom.voxel_centers()
    zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")
    return np.stack([xx, yy, zz], axis=-1)


def splat_project(volume: Volume3D, geom: ConeBeamGeometry,
                  angles: ViewAngleSet) -> ProjectionSet:
    """Deposit each voxel onto its 4 surrounding detector pixels per view."""
    volume.require_match(geom)
    pts = _voxel_center_grid(geom).reshape(-1, 3)
    vals = volume.data.ravel()
    projections = []
    for theta in angles:
        a0, b0, weights, masks = bilinear_coeffs(geom, pts, theta)
        img = np.zeros((geom.detector_nv, geom.detector_nu), dtype=np.float64)
        for (da, db), w, ok in zip(((0, 0), (1, 0), (0, 1), (1, 1)), weights, masks):
            ai = (a0 + da)[ok]
            bi = (b0 + db)[ok]
            np.add.at(img, (bi, ai), (w * vals)[ok])
        projections.append(Projection2D(img, theta,
                                        (geom.detector_pitch_u, geom.detector_pitch_v)))
    return ProjectionSet(projections)


def _siddon_batch(volume: Volume3D, src, dst):
    """Exact radiological path lengths for a batch of segments.

    Voxels are constant-valued boxes; a segment lying exactly in a voxel face
    plane is attributed to the voxel on the +normal side (midpoint flooring).
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    nz, ny, nx = volume.data.shape
    sx, sy, sz = volume.spacing
    dims = (nx, ny, nz)
    spacings = (sx, sy, sz)
    d = dst - src
    lengths = np.linalg.norm(d, axis=-1)
    if np.any(lengths == 0.0):
        raise ValueError("degenerate ray: src == dst")

    # clip to the voxel box [-n*s/2, n*s/2] per axis
    a_min = np.zeros(src.shape[:-1])
    a_max = np.ones(src.shape[:-1])
    for ax in range(3):
        half = 0.5 * dims[ax] * spacings[ax]
        da = d[..., ax]
        safe = np.where(np.abs(da) > _PARALLEL_EPS, da, _PARALLEL_EPS)
        t0 = (-half - src[..., ax]) / safe
        t1 = (half - src[..., ax]) / safe
        lo, hi = np.minimum(t0, t1), np.maximum(t0, t1)
        parallel = np.abs(da) <= _PARALLEL_EPS
        inside = np.abs(src[..., ax]) <= half
        lo = np.where(parallel, np.where(inside, 0.0, 1.0), lo)
        hi = np.where(parallel, np.where(inside, 1.0, 0.0), hi)
        a_min = np.maximum(a_min, lo)
        a_max = np.minimum(a_max, hi)
    a_max = np.maximum(a_max, a_min)

    # all plane-crossing parameters, clipped into [a_min, a_max]
    alphas = [a_min[..., None], a_max[..., None]]
    for ax in range(3):
        half = 0.5 * dims[ax] * spacings[ax]
        planes = -half + spacings[ax] * np.arange(dims[ax] + 1)
        da = d[..., ax, None]
        ok = np.abs(da) > _PARALLEL_EPS
        safe = np.where(ok, da, 1.0)
        a = (planes - src[..., ax, None]) / safe
        a = np.where(ok, a, a_min[..., None])
        alphas.append(np.clip(a, a_min[..., None], a_max[..., None]))
    alphas = np.sort(np.concatenate(alphas, axis=-1), axis=-1)

    seg = np.diff(alphas, axis=-1)
    mid = 0.5 * (alphas[..., :-1] + alphas[..., 1:])
    total = np.zeros(src.shape[:-1])
    pts = src[..., None, :] + mid[..., None] * d[..., None, :]
    idx = []
    valid = seg > 0.0
    for ax in range(3):
        half = 0.5 * dims[ax] * spacings[ax]
        i = np.floor((pts[..., ax] + half) / spacings[ax]).astype(np.int64)
        valid &= (i >= 0) & (i < dims[ax])
        idx.append(i)
    ix, iy, iz = (i.clip(0, n - 1) for i, n in zip(idx, dims))
    vals = volume.data[iz, iy, ix]
    total = np.sum(np.where(valid, seg * vals, 0.0), axis=-1) * lengths
    return total


def siddon_line_integral(volume: Volume3D, src, dst) -> float:
    """Exact line integral through the voxel grid from src to dst (mm points)."""
    return float(_siddon_batch(volume, np.asarray(src, dtype=np.float64),
                               np.asarray(dst, dtype=np.float64)))


def siddon_project(volume: Volume3D, geom: ConeBeamGeometry,
                   angles: ViewAngleSet) -> ProjectionSet:
    """Full-view projections using the exact Siddon path (oracle for tests)."""
    volume.require_match(geom)
    nu, nv = geom.detector_nu, geom.detector_nv
    aa, bb = np.meshgrid(np.arange(nu, dtype=np.float64),
                         np.arange(nv, dtype=np.float64))
    u, v = pixel_to_uv(geom, (aa, bb))
    projections = []
    for theta in angles:
        src = source_position(geom, theta)
        det = detector_point(geom, u, v, theta)
        img = _siddon_batch(volume, np.broadcast_to(src, det.shape), det)
        projections.append(Projection2D(img, theta,
                                        (geom.detector_pitch_u, geom.detector_pitch_v)))
    return ProjectionSet(projections)
