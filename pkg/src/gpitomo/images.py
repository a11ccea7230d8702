"""Array containers for volumes and projection images.

Axis orders follow the on-disk convention everywhere: volumes are (z, y, x)
and projection images are (v, u).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import TWO_PI, ConeBeamGeometry, GeometryError, ViewAngleSet

__all__ = ["Volume3D", "Projection2D", "ProjectionSet"]


@dataclass
class Volume3D:
    """Voxel grid with physical spacing; data is (nz, ny, nx) float."""

    data: np.ndarray
    spacing: tuple  # (sx, sy, sz) mm

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ValueError(f"volume data must be 3D, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("volume contains non-finite values")
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ValueError(f"bad spacing {self.spacing}")

    @property
    def dims(self):
        """(nx, ny, nz)."""
        nz, ny, nx = self.data.shape
        return (nx, ny, nz)

    def matches(self, geom: ConeBeamGeometry) -> bool:
        return (self.dims == (geom.volume_nx, geom.volume_ny, geom.volume_nz)
                and np.allclose(self.spacing, (geom.voxel_spacing_x,
                                               geom.voxel_spacing_y,
                                               geom.voxel_spacing_z)))

    def require_match(self, geom: ConeBeamGeometry):
        if not self.matches(geom):
            raise GeometryError(
                f"volume grid {self.dims} @ {self.spacing} mm does not match "
                f"geometry {(geom.volume_nx, geom.volume_ny, geom.volume_nz)} @ "
                f"{(geom.voxel_spacing_x, geom.voxel_spacing_y, geom.voxel_spacing_z)} mm"
            )

    @classmethod
    def zeros(cls, geom: ConeBeamGeometry):
        return cls(np.zeros(geom.volume_shape),
                   (geom.voxel_spacing_x, geom.voxel_spacing_y, geom.voxel_spacing_z))


@dataclass
class Projection2D:
    """Detector image of line-integral intensities (intensity*mm), (nv, nu)."""

    data: np.ndarray
    theta: float
    pitch: tuple  # (pu, pv) mm

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError(f"projection data must be 2D, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("projection contains non-finite values")
        self.theta = float(self.theta)
        if not (0.0 <= self.theta < TWO_PI):
            raise ValueError(f"theta {self.theta} outside [0, 2*pi)")
        self.pitch = tuple(float(p) for p in self.pitch)

    @property
    def dims(self):
        """(nu, nv)."""
        nv, nu = self.data.shape
        return (nu, nv)


@dataclass
class ProjectionSet:
    """Ordered projections sharing detector dims/pitch, angles ascending."""

    projections: list = field(default_factory=list)

    def __post_init__(self):
        if self.projections:
            first = self.projections[0]
            for p in self.projections[1:]:
                if p.dims != first.dims or p.pitch != first.pitch:
                    raise ValueError("projections disagree on detector dims/pitch")
            # validates ascending order / no duplicates
            ViewAngleSet(tuple(p.theta for p in self.projections))

    def __len__(self):
        return len(self.projections)

    def __iter__(self):
        return iter(self.projections)

    def __getitem__(self, i):
        return self.projections[i]

    @property
    def angles(self) -> ViewAngleSet:
        return ViewAngleSet(tuple(p.theta for p in self.projections))

    def as_array(self):
        """Stacked data, axis order (view, v, u)."""
        return np.stack([p.data for p in self.projections])

    def matches(self, geom: ConeBeamGeometry) -> bool:
        if not self.projections:
            return True
        p = self.projections[0]
        return (p.dims == (geom.detector_nu, geom.detector_nv)
                and np.allclose(p.pitch, (geom.detector_pitch_u, geom.detector_pitch_v)))

    def require_match(self, geom: ConeBeamGeometry):
        if not self.projections:
            raise GeometryError("empty projection set")
        if not self.matches(geom):
            p = self.projections[0]
            raise GeometryError(
                f"projection detector {p.dims} @ {p.pitch} mm does not match "
                f"geometry {(geom.detector_nu, geom.detector_nv)} @ "
                f"{(geom.detector_pitch_u, geom.detector_pitch_v)} mm"
            )

    @classmethod
    def from_array(cls, data, angles, pitch):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"expected (view, v, u) array, got shape {data.shape}")
        angles = list(angles)
        if data.shape[0] != len(angles):
            raise ValueError(f"{data.shape[0]} views but {len(angles)} angles")
        return cls([Projection2D(d, t, pitch) for d, t in zip(data, angles)])
