import numpy as np
from scipy.ndimage import gaussian_filter

from gpitomo.geometry import make_geometry
from gpitomo.images import Volume3D


def small_geometry():
    """Desk-scale geometry used across tests."""
    return make_geometry(detector_spec=(24, 24, 6.0, 6.0),
                         volume_spec=(16, 16, 16, 4.0, 4.0, 4.0))


def smooth_bulk_phantom(rng, geom):
    """Positive pedestal plus gentle smooth fluctuations, filling the grid.

    Built for forward-model comparisons: with a detector whose rays all cross
    the volume bulk, every unmasked pixel integrates a field whose relative
    variation per voxel is small, so interpolation-model differences stay
    well under the comparison tolerance.
    """
    fluct = gaussian_filter(rng.standard_normal(geom.volume_shape), 3.0)
    peak = np.abs(fluct).max()
    if peak > 0:
        fluct *= 0.3 / peak
    return Volume3D(1.0 + fluct, (geom.voxel_spacing_x, geom.voxel_spacing_y,
                                  geom.voxel_spacing_z))
