"""Procedural ellipsoid phantoms: deterministic stand-ins for clinical volumes.

All randomness goes through numpy's Philox bit generator, a counter-based
PRNG with fixed constants, so a given seed produces bitwise-identical
phantoms on every platform regardless of thread count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .images import Volume3D

__all__ = ["EllipsoidSpec", "ellipsoid_phantom", "random_anatomy_phantom"]


@dataclass(frozen=True)
class EllipsoidSpec:
    """Axis-aligned-then-z-rotated ellipsoid with additive intensity."""

    center: tuple      # (x, y, z) mm
    semi_axes: tuple   # (a, b, c) mm
    rotation_z: float  # rad
    intensity: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "semi_axes", tuple(float(a) for a in self.semi_axes))
        object.__setattr__(self, "rotation_z", float(self.rotation_z))
        object.__setattr__(self, "intensity", float(self.intensity))
        if any(a <= 0 for a in self.semi_axes):
            raise ValueError(f"semi-axes must be > 0, got {self.semi_axes}")

    def contains(self, x, y, z):
        """Boundary counts as inside."""
        cx, cy, cz = self.center
        a, b, c = self.semi_axes
        cs, sn = math.cos(self.rotation_z), math.sin(self.rotation_z)
        dx, dy, dz = x - cx, y - cy, z - cz
        xr = cs * dx + sn * dy
        yr = -sn * dx + cs * dy
        return (xr / a) ** 2 + (yr / b) ** 2 + (dz / c) ** 2 <= 1.0


def specs_to_json(specs):
    return json.dumps([asdict(s) for s in specs], indent=2)


def specs_from_json(text):
    return [EllipsoidSpec(**d) for d in json.loads(text)]


def _center_grids(dims, spacing):
    nx, ny, nz = dims
    sx, sy, sz = spacing
    xs = (np.arange(nx) - 0.5 * (nx - 1)) * sx
    ys = (np.arange(ny) - 0.5 * (ny - 1)) * sy
    zs = (np.arange(nz) - 0.5 * (nz - 1)) * sz
    zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")
    return xx, yy, zz


def ellipsoid_phantom(specs, dims, spacing) -> Volume3D:
    """Sum of ellipsoid intensities at every voxel center, (z, y, x) layout."""
    xx, yy, zz = _center_grids(dims, spacing)
    data = np.zeros(xx.shape, dtype=np.float64)
    for s in specs:
        data += np.where(s.contains(xx, yy, zz), s.intensity, 0.0)
    return Volume3D(data, spacing)


def random_anatomy_phantom(seed, dims, spacing) -> Volume3D:
    """Seeded anatomy-like phantom: a body, two low-intensity lungs, and 3-8
    random internal ellipsoids. Pure function of (seed, dims, spacing)."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    nx, ny, nz = dims
    sx, sy, sz = spacing
    ext = np.array([0.5 * nx * sx, 0.5 * ny * sy, 0.5 * nz * sz])

    body_axes = ext * rng.uniform(0.60, 0.85, size=3)
    specs = [EllipsoidSpec((0.0, 0.0, 0.0), tuple(body_axes),
                           rng.uniform(-0.2, 0.2), 1.0)]

    for side in (-1.0, 1.0):
        lung_axes = body_axes * rng.uniform(0.28, 0.42, size=3)
        center = (side * 0.45 * body_axes[0] * rng.uniform(0.8, 1.0),
                  rng.uniform(-0.15, 0.15) * body_axes[1],
                  rng.uniform(-0.2, 0.2) * body_axes[2])
        specs.append(EllipsoidSpec(center, tuple(lung_axes),
                                   rng.uniform(-0.3, 0.3), -0.7))

    n_internal = int(rng.integers(3, 9))
    for _ in range(n_internal):
        axes = body_axes * rng.uniform(0.05, 0.25, size=3)
        center = tuple(rng.uniform(-0.6, 0.6) * body_axes)
        specs.append(EllipsoidSpec(center, tuple(axes),
                                   rng.uniform(0.0, 2.0 * math.pi),
                                   rng.uniform(0.2, 0.8)))
    return ellipsoid_phantom(specs, dims, spacing)
