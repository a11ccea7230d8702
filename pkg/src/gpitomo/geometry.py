"""Cone-beam system geometry: coordinate conventions and the point-to-detector map.

Conventions (all lengths in mm, all angles in radians unless noted):

* The isocenter is the origin of the volume frame.
* At view angle ``theta`` the source sits at ``d_so * (-sin(theta), cos(theta), 0)``
  and the flat detector is perpendicular to the central ray at distance
  ``d_sd`` from the source, with the u-axis along ``(cos(theta), sin(theta), 0)``
  and the v-axis along +z.
* Voxel (i, j, k) is centered at ``((i - (n-1)/2) * spacing)`` per axis;
  detector pixels are addressed the same way, so the detector origin (u=v=0)
  is the grid center.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

__all__ = [
    "GeometryError",
    "ConeBeamGeometry",
    "ViewAngleSet",
    "make_geometry",
    "make_view_angles",
    "detector_coords",
    "source_position",
    "pixel_to_uv",
    "uv_to_pixel",
]

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Raised for invalid geometry parameters or points behind the source plane."""


@dataclass(frozen=True)
class ConeBeamGeometry:
    """Circular-trajectory cone-beam system with a flat centered detector."""

    d_so: float
    d_sd: float
    detector_nu: int
    detector_nv: int
    detector_pitch_u: float
    detector_pitch_v: float
    volume_nx: int
    volume_ny: int
    volume_nz: int
    voxel_spacing_x: float
    voxel_spacing_y: float
    voxel_spacing_z: float

    def __post_init__(self):
        if not (0.0 < self.d_so < self.d_sd):
            raise GeometryError(
                f"require 0 < d_so < d_sd, got d_so={self.d_so}, d_sd={self.d_sd}"
            )
        for name in ("detector_pitch_u", "detector_pitch_v",
                     "voxel_spacing_x", "voxel_spacing_y", "voxel_spacing_z"):
            if getattr(self, name) <= 0.0:
                raise GeometryError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("detector_nu", "detector_nv",
                     "volume_nx", "volume_ny", "volume_nz"):
            if getattr(self, name) < 1:
                raise GeometryError(f"{name} must be >= 1, got {getattr(self, name)}")
        r = self.max_voxel_radius()
        if r >= self.d_so:
            raise GeometryError(
                f"volume reaches the source plane: worst-case in-plane voxel "
                f"radius {r:.3f} mm >= d_so {self.d_so:.3f} mm "
                f"(margin {self.d_so - r:.3f} mm)"
            )

    def max_voxel_radius(self):
        """Largest in-plane distance from the isocenter to any voxel center."""
        hx = 0.5 * (self.volume_nx - 1) * self.voxel_spacing_x
        hy = 0.5 * (self.volume_ny - 1) * self.voxel_spacing_y
        return math.hypot(hx, hy)

    @property
    def volume_shape(self):
        """Array shape in (z, y, x) axis order."""
        return (self.volume_nz, self.volume_ny, self.volume_nx)

    @property
    def detector_shape(self):
        """Array shape in (v, u) axis order."""
        return (self.detector_nv, self.detector_nu)

    def voxel_centers(self):
        """1D center-coordinate arrays (x, y, z) in mm."""
        def axis(n, s):
            return (np.arange(n, dtype=np.float64) - 0.5 * (n - 1)) * s
        return (axis(self.volume_nx, self.voxel_spacing_x),
                axis(self.volume_ny, self.voxel_spacing_y),
                axis(self.volume_nz, self.voxel_spacing_z))

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def make_geometry(d_so=1000.0, d_sd=1500.0, detector_spec=None, volume_spec=None):
    """Build a validated geometry.

    ``detector_spec`` is ``(nu, nv, pitch_u, pitch_v)`` and ``volume_spec`` is
    ``(nx, ny, nz, sx, sy, sz)``; defaults are a 192x192 detector at 2 mm pitch
    and a 128^3 volume at 2 mm spacing.
    """
    if detector_spec is None:
        detector_spec = (192, 192, 2.0, 2.0)
    if volume_spec is None:
        volume_spec = (128, 128, 128, 2.0, 2.0, 2.0)
    nu, nv, pu, pv = detector_spec
    nx, ny, nz, sx, sy, sz = volume_spec
    return ConeBeamGeometry(
        d_so=float(d_so), d_sd=float(d_sd),
        detector_nu=int(nu), detector_nv=int(nv),
        detector_pitch_u=float(pu), detector_pitch_v=float(pv),
        volume_nx=int(nx), volume_ny=int(ny), volume_nz=int(nz),
        voxel_spacing_x=float(sx), voxel_spacing_y=float(sy),
        voxel_spacing_z=float(sz),
    )


@dataclass(frozen=True)
class ViewAngleSet:
    """Strictly increasing view angles in [0, 2*pi)."""

    angles: tuple

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles)
        object.__setattr__(self, "angles", angles)
        if len(angles) == 0:
            raise GeometryError("view angle set must be non-empty")
        for a in angles:
            if not (0.0 <= a < TWO_PI):
                raise GeometryError(f"angle {a} outside [0, 2*pi)")
        for a, b in zip(angles, angles[1:]):
            if b <= a:
                raise GeometryError("angles must be strictly increasing")

    def __len__(self):
        return len(self.angles)

    def __iter__(self):
        return iter(self.angles)

    def as_array(self):
        return np.asarray(self.angles, dtype=np.float64)

    def degrees(self):
        return [math.degrees(a) for a in self.angles]


def make_view_angles(n, mode="input"):
    """Evenly spaced view angles over 360 degrees starting at 0.

    ``mode='input'`` applies the sparse-input conventions: a single view is
    the AP view (0 deg) and two views are AP plus lateral (0 and 90 deg).
    ``mode='generated'`` always uses plain even spacing (default 12 views),
    which makes the 1- and 2-view input sets subsets of the generated set.
    """
    n = int(n)
    if n < 1:
        raise GeometryError(f"need at least one view, got n={n}")
    if mode == "input":
        if n == 1:
            return ViewAngleSet((0.0,))
        if n == 2:
            return ViewAngleSet((0.0, math.pi / 2.0))
    elif mode != "generated":
        raise GeometryError(f"unknown view-angle mode {mode!r}")
    return ViewAngleSet(tuple(i * TWO_PI / n for i in range(n)))


def detector_coords(geom, point, theta):
    """Map 3D points to detector (u, v) coordinates in mm at view ``theta``.

    ``point`` is an (x, y, z) triple or an (..., 3) array. The denominator
    ``d_so + x*sin(theta) - y*cos(theta)`` is the source-to-point distance
    along the central ray; it must be positive.
    """
    p = np.asarray(point, dtype=np.float64)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    s, c = math.sin(theta), math.cos(theta)
    denom = geom.d_so + x * s - y * c
    if np.any(denom <= 0.0):
        raise GeometryError(
            f"point at or behind the source plane at theta={theta} "
            f"(min denominator {np.min(denom):.6g} mm)"
        )
    u = (x * c + y * s) * geom.d_sd / denom
    v = geom.d_sd * z / denom
    if p.ndim == 1:
        return float(u), float(v)
    return u, v


def source_position(geom, theta):
    """X-ray source position at view ``theta``: ``d_so * (-sin, cos, 0)``."""
    return np.array(
        [-geom.d_so * math.sin(theta), geom.d_so * math.cos(theta), 0.0]
    )


def detector_point(geom, u, v, theta):
    """3D position of detector coordinate (u, v) at view ``theta``."""
    s, c = math.sin(theta), math.cos(theta)
    center = (geom.d_sd - geom.d_so) * np.array([s, -c, 0.0])
    u_axis = np.array([c, s, 0.0])
    v_axis = np.array([0.0, 0.0, 1.0])
    return center + np.multiply.outer(np.asarray(u), u_axis) \
        + np.multiply.outer(np.asarray(v), v_axis)


def pixel_to_uv(geom, pixel):
    """Continuous pixel index (a, b) -> physical detector (u, v) in mm."""
    a, b = pixel
    u = (np.asarray(a, dtype=np.float64) - 0.5 * (geom.detector_nu - 1)) * geom.detector_pitch_u
    v = (np.asarray(b, dtype=np.float64) - 0.5 * (geom.detector_nv - 1)) * geom.detector_pitch_v
    return u, v


def uv_to_pixel(geom, uv):
    """Physical detector (u, v) in mm -> continuous pixel index (a, b)."""
    u, v = uv
    a = np.asarray(u, dtype=np.float64) / geom.detector_pitch_u + 0.5 * (geom.detector_nu - 1)
    b = np.asarray(v, dtype=np.float64) / geom.detector_pitch_v + 0.5 * (geom.detector_nv - 1)
    return a, b
