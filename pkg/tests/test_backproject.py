import numpy as np
import pytest

from gpitomo.backproject import GpiPair, backproject, make_gpi_pair
from gpitomo.geometry import (GeometryError, ViewAngleSet, make_geometry,
                              make_view_angles, source_position, detector_point,
                              pixel_to_uv, uv_to_pixel, detector_coords)
from gpitomo.images import ProjectionSet, Volume3D
from gpitomo.phantom import EllipsoidSpec, ellipsoid_phantom
from gpitomo.projector import forward_project


def odd_geometry():
    return make_geometry(detector_spec=(25, 25, 6.0, 6.0),
                         volume_spec=(15, 15, 15, 4.0, 4.0, 4.0))


def test_zero_projections_give_zero_gpi():
    geom = odd_geometry()
    angles = make_view_angles(4, mode="generated")
    pset = ProjectionSet.from_array(np.zeros((4, 25, 25)), angles, (6.0, 6.0))
    assert np.all(backproject(pset, geom).data == 0.0)


def test_empty_projection_set_rejected():
    geom = odd_geometry()
    with pytest.raises(GeometryError, match="empty"):
        backproject(ProjectionSet([]), geom)


def test_mismatched_detector_rejected():
    geom = odd_geometry()
    pset = ProjectionSet.from_array(np.zeros((1, 8, 8)), [0.0], (6.0, 6.0))
    with pytest.raises(GeometryError, match="does not match"):
        backproject(pset, geom)


def test_uniform_projections_sum_to_view_count_at_isocenter():
    geom = odd_geometry()
    n = 6
    angles = make_view_angles(n, mode="generated")
    pset = ProjectionSet.from_array(np.ones((n, 25, 25)), angles, (6.0, 6.0))
    gpi = backproject(pset, geom)
    assert gpi.data[7, 7, 7] == pytest.approx(float(n), abs=1e-12)


def test_single_pixel_support_matches_projection_footprint():
    geom = odd_geometry()
    theta = 0.7
    data = np.zeros((1, 25, 25))
    pix = (13, 11)  # (b, a)
    data[0, pix[0], pix[1]] = 1.0
    pset = ProjectionSet.from_array(data, [theta], (6.0, 6.0))
    gpi = backproject(pset, geom).data

    xs, ys, zs = geom.voxel_centers()
    zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")
    pts = np.stack([xx, yy, zz], axis=-1).reshape(-1, 3)
    u, v = detector_coords(geom, pts, theta)
    a, b = uv_to_pixel(geom, (u, v))
    inside = (np.abs(a - pix[1]) < 1.0) & (np.abs(b - pix[0]) < 1.0)
    assert np.array_equal(gpi.ravel() > 0.0, inside)


def test_single_pixel_gpi_covers_siddon_ray():
    # every voxel the source->pixel ray passes within the pixel's bilinear
    # footprint must receive back-projected intensity
    geom = odd_geometry()
    theta = 0.7
    pix = (13, 11)
    data = np.zeros((1, 25, 25))
    data[0, pix[0], pix[1]] = 1.0
    pset = ProjectionSet.from_array(data, [theta], (6.0, 6.0))
    gpi = backproject(pset, geom).data

    src = source_position(geom, theta)
    u, v = pixel_to_uv(geom, (float(pix[1]), float(pix[0])))
    dst = detector_point(geom, u, v, theta)
    # walk the ray densely; mark voxels whose center projects strictly inside
    # the pixel footprint
    t = np.linspace(0.0, 1.0, 4000)
    pts = src + t[:, None] * (dst - src)
    for p in pts[::40]:
        ix = int(round(p[0] / 4.0 + 7))
        iy = int(round(p[1] / 4.0 + 7))
        iz = int(round(p[2] / 4.0 + 7))
        if not (0 <= ix < 15 and 0 <= iy < 15 and 0 <= iz < 15):
            continue
        center = ((ix - 7) * 4.0, (iy - 7) * 4.0, (iz - 7) * 4.0)
        uu, vv = detector_coords(geom, center, theta)
        aa, bb = uv_to_pixel(geom, (uu, vv))
        if abs(float(aa) - pix[1]) < 0.95 and abs(float(bb) - pix[0]) < 0.95:
            assert gpi[iz, iy, ix] > 0.0


def test_linearity_and_view_superposition():
    geom = odd_geometry()
    rng = np.random.default_rng(21)
    angles = make_view_angles(6, mode="generated")
    data = rng.standard_normal((6, 25, 25))
    full = backproject(ProjectionSet.from_array(data, angles, (6.0, 6.0)), geom)
    first = backproject(ProjectionSet.from_array(
        data[:3], list(angles)[:3], (6.0, 6.0)), geom)
    second = backproject(ProjectionSet.from_array(
        data[3:], list(angles)[3:], (6.0, 6.0)), geom)
    np.testing.assert_allclose(full.data, first.data + second.data, rtol=1e-6,
                               atol=1e-9)

    scaled = backproject(ProjectionSet.from_array(2.0 * data, angles,
                                                  (6.0, 6.0)), geom)
    assert np.array_equal(scaled.data, 2.0 * full.data)


def test_projection_set_enforces_ascending_angles():
    with pytest.raises(Exception):
        ProjectionSet.from_array(np.zeros((2, 4, 4)), [1.0, 0.5], (6.0, 6.0))


def test_point_phantom_gpi_peaks_at_point():
    geom = odd_geometry()
    loc = (8.0, -4.0, 4.0)  # on-grid voxel center
    vol = ellipsoid_phantom([EllipsoidSpec(loc, (3.0, 3.0, 3.0), 0.0, 1.0)],
                            (15, 15, 15), (4.0, 4.0, 4.0))
    angles = make_view_angles(4, mode="generated")
    projs = forward_project(vol, geom, angles)
    gpi = backproject(projs, geom)
    iz, iy, ix = np.unravel_index(np.argmax(gpi.data), gpi.data.shape)
    expect = (int(loc[2] / 4 + 7), int(loc[1] / 4 + 7), int(loc[0] / 4 + 7))
    assert max(abs(iz - expect[0]), abs(iy - expect[1]),
               abs(ix - expect[2])) <= 1


def test_gpi_pair_composition():
    geom = odd_geometry()
    rng = np.random.default_rng(22)
    gen_angles = make_view_angles(12, mode="generated")
    src_angles = make_view_angles(2, mode="input")
    gen_data = rng.standard_normal((12, 25, 25))
    src_data = rng.standard_normal((2, 25, 25))
    gen = ProjectionSet.from_array(gen_data, gen_angles, (6.0, 6.0))
    src = ProjectionSet.from_array(src_data, src_angles, (6.0, 6.0))

    pair = make_gpi_pair(src, gen, geom)
    assert np.array_equal(pair.gpi_src.data, backproject(src, geom).data)
    assert np.array_equal(pair.gpi_gen.data, backproject(gen, geom).data)

    same = make_gpi_pair(gen, gen, geom)
    assert np.array_equal(same.gpi_src.data, same.gpi_gen.data)

    zero_src = ProjectionSet.from_array(np.zeros((1, 25, 25)), [0.0], (6.0, 6.0))
    pair2 = make_gpi_pair(zero_src, gen, geom)
    assert np.all(pair2.gpi_src.data == 0.0)


def test_gpi_pair_dim_mismatch_rejected():
    a = Volume3D(np.zeros((4, 4, 4)), (1.0, 1.0, 1.0))
    b = Volume3D(np.zeros((5, 5, 5)), (1.0, 1.0, 1.0))
    with pytest.raises(GeometryError):
        GpiPair(a, b, ViewAngleSet((0.0,)), ViewAngleSet((0.0,)))
