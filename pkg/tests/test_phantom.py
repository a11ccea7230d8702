import math

import numpy as np
import pytest

from gpitomo.phantom import (EllipsoidSpec, ellipsoid_phantom,
                             random_anatomy_phantom, specs_from_json,
                             specs_to_json)

DIMS = (12, 12, 12)
SPACING = (4.0, 4.0, 4.0)


def test_empty_spec_list_gives_zero_volume():
    vol = ellipsoid_phantom([], DIMS, SPACING)
    assert np.all(vol.data == 0.0)


def test_covering_ellipsoid_gives_ones():
    big = EllipsoidSpec((0.0, 0.0, 0.0), (1000.0, 1000.0, 1000.0), 0.0, 1.0)
    vol = ellipsoid_phantom([big], DIMS, SPACING)
    assert np.all(vol.data == 1.0)


def test_nonpositive_semi_axes_rejected():
    with pytest.raises(ValueError):
        EllipsoidSpec((0, 0, 0), (1.0, 0.0, 1.0), 0.0, 1.0)


def test_overlap_counts_twice_against_brute_force():
    e1 = EllipsoidSpec((-4.0, 0.0, 0.0), (12.0, 10.0, 8.0), 0.3, 1.0)
    e2 = EllipsoidSpec((4.0, 2.0, 0.0), (10.0, 12.0, 9.0), -0.8, 1.0)
    vol = ellipsoid_phantom([e1, e2], DIMS, SPACING)
    # voxel-by-voxel brute force with the direct inequality
    for iz in range(DIMS[2]):
        for iy in range(DIMS[1]):
            for ix in range(DIMS[0]):
                x = (ix - 5.5) * 4.0
                y = (iy - 5.5) * 4.0
                z = (iz - 5.5) * 4.0
                expect = 0.0
                for e in (e1, e2):
                    cs, sn = math.cos(e.rotation_z), math.sin(e.rotation_z)
                    dx, dy, dz = x - e.center[0], y - e.center[1], z - e.center[2]
                    xr = cs * dx + sn * dy
                    yr = -sn * dx + cs * dy
                    if (xr / e.semi_axes[0]) ** 2 + (yr / e.semi_axes[1]) ** 2 \
                            + (dz / e.semi_axes[2]) ** 2 <= 1.0:
                        expect += e.intensity
                assert vol.data[iz, iy, ix] == expect


def test_mirror_symmetry_in_x():
    specs = [EllipsoidSpec((8.0, 4.0, -4.0), (10.0, 6.0, 8.0), 0.0, 1.0),
             EllipsoidSpec((-8.0, 4.0, -4.0), (10.0, 6.0, 8.0), 0.0, 1.0)]
    vol = ellipsoid_phantom(specs, DIMS, SPACING)
    assert np.array_equal(vol.data, vol.data[:, :, ::-1])


def test_same_seed_is_bitwise_identical():
    a = random_anatomy_phantom(42, DIMS, SPACING)
    b = random_anatomy_phantom(42, DIMS, SPACING)
    assert np.array_equal(a.data, b.data)


def test_distinct_seeds_differ():
    distinct = 0
    for s in range(100):
        a = random_anatomy_phantom(2 * s, (8, 8, 8), SPACING)
        b = random_anatomy_phantom(2 * s + 1, (8, 8, 8), SPACING)
        if not np.array_equal(a.data, b.data):
            distinct += 1
    assert distinct == 100


def test_value_range_bound():
    # body 1.0, lungs -0.7, at most 8 internals of at most 0.8 each
    for s in range(20):
        vol = random_anatomy_phantom(s, DIMS, SPACING)
        assert vol.data.min() >= -0.7 - 1e-12
        assert vol.data.max() <= 7.4 + 1e-12


def test_specs_json_roundtrip():
    specs = [EllipsoidSpec((1.0, 2.0, 3.0), (4.0, 5.0, 6.0), 0.25, 0.5)]
    assert specs_from_json(specs_to_json(specs)) == specs
