"""Geometric back-projection: unweighted voxel-driven accumulation of detector
samples along each voxel's projection ray, producing geometry-preserving
images (GPIs).

The GPI is not a reconstruction: every voxel simply sums, over all views, the
bilinearly interpolated detector value at its own (u, v) footprint. There is
no 1/n averaging and no filtering; out-of-detector footprints contribute 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ConeBeamGeometry, GeometryError, ViewAngleSet
from .images import ProjectionSet, Volume3D
from .projector import _voxel_center_grid, bilinear_coeffs

__all__ = ["backproject", "backproject_view", "GpiPair", "make_gpi_pair"]

_CORNERS = ((0, 0), (1, 0), (0, 1), (1, 1))


def backproject_view(projection_data, theta, geom: ConeBeamGeometry,
                     points=None) -> np.ndarray:
    """Back-project a single (nv, nu) detector image into the voxel grid."""
    if points is None:
        points = _voxel_center_grid(geom).reshape(-1, 3)
    a0, b0, weights, masks = bilinear_coeffs(geom, points, theta)
    acc = np.zeros(points.shape[0], dtype=np.float64)
    for (da, db), w, ok in zip(_CORNERS, weights, masks):
        ai = (a0 + da).clip(0, geom.detector_nu - 1)
        bi = (b0 + db).clip(0, geom.detector_nv - 1)
        acc += np.where(ok, w * projection_data[bi, ai], 0.0)
    return acc.reshape(geom.volume_shape)


def backproject(projections: ProjectionSet, geom: ConeBeamGeometry) -> Volume3D:
    """Sum of per-view back-projections in ascending view-angle order."""
    projections.require_match(geom)
    points = _voxel_center_grid(geom).reshape(-1, 3)
    acc = np.zeros(geom.volume_shape, dtype=np.float64)
    for p in projections:  # ProjectionSet guarantees ascending theta
        acc += backproject_view(p.data, p.theta, geom, points=points)
    return Volume3D(acc, (geom.voxel_spacing_x, geom.voxel_spacing_y,
                          geom.voxel_spacing_z))


@dataclass
class GpiPair:
    """The two geometry-preserving images fed to refinement: one from the
    measured source views, one from the (typically denser) generated views."""

    gpi_src: Volume3D
    gpi_gen: Volume3D
    src_angles: ViewAngleSet
    gen_angles: ViewAngleSet

    def __post_init__(self):
        if (self.gpi_src.data.shape != self.gpi_gen.data.shape
                or self.gpi_src.spacing != self.gpi_gen.spacing):
            raise GeometryError("GPI pair must share dims and spacing")


def make_gpi_pair(src_projections: ProjectionSet,
                  gen_projections: ProjectionSet,
                  geom: ConeBeamGeometry) -> GpiPair:
    """Back-project the two projection sets independently."""
    return GpiPair(
        gpi_src=backproject(src_projections, geom),
        gpi_gen=backproject(gen_projections, geom),
        src_angles=src_projections.angles,
        gen_angles=gen_projections.angles,
    )
