import numpy as np
import pytest

from yeebands.lattice import preset, preset_cell
from yeebands.material import (
    Cylinder,
    Geometry,
    Gyroid,
    PermittivityField,
    Sphere,
    edge_points,
    sample_B,
)


@pytest.fixture(scope="module")
def cubic16():
    p = preset("cubic", (16, 16, 16))
    lat, _ = preset_cell(p)
    return p, lat


def test_shape_validation():
    with pytest.raises(ValueError):
        Sphere((0, 0, 0), -0.1, 13.0)
    with pytest.raises(ValueError):
        Sphere((0, 0, 0), 0.1, 0.5)
    with pytest.raises(ValueError):
        Cylinder((0, 0, 0), (0, 0, 0), 0.1, 13.0)
    with pytest.raises(ValueError):
        Gyroid(float("nan"), 13.0)
    with pytest.raises(ValueError):
        Geometry(frame="bogus")
    with pytest.raises(ValueError):
        Geometry(eps_out=0.9)


def test_edge_points_offsets(cubic16):
    _, lat = cubic16
    dx = lat.spacings[0]
    p0, p1 = edge_points(lat, 0), edge_points(lat, 1)
    # x fastest: second point steps along x
    np.testing.assert_allclose(p0[0], [0.5 * dx, 0, 0])
    np.testing.assert_allclose(p0[1], [1.5 * dx, 0, 0])
    np.testing.assert_allclose(p1[0], [0, 0.5 * lat.spacings[1], 0])


def test_vacuum_is_uniform(cubic16):
    _, lat = cubic16
    f = sample_B(Geometry(), lat)
    assert f.is_uniform and f.eps_min == 1.0 and f.kappa == 1.0


def test_sphere_fill_fraction(cubic16):
    _, lat = cubic16
    f = sample_B(Geometry((Sphere((0.5, 0.5, 0.5), 0.3, 13.0),)), lat)
    frac = np.mean(f.stacked == 13.0)
    assert frac == pytest.approx(4.0 / 3.0 * np.pi * 0.3**3, rel=0.05)
    assert f.eps_max == 13.0 and f.eps_min == 1.0


def test_sphere_tiles_periodically(cubic16):
    _, lat = cubic16
    centred = sample_B(Geometry((Sphere((0.5, 0.5, 0.5), 0.3, 13.0),)), lat)
    corner = sample_B(Geometry((Sphere((0.0, 0.0, 0.0), 0.3, 13.0),)), lat)
    a = centred.b1.reshape(16, 16, 16)
    b = corner.b1.reshape(16, 16, 16)
    np.testing.assert_array_equal(np.roll(a, (8, 8, 8), axis=(0, 1, 2)), b)


def test_first_shape_wins(cubic16):
    _, lat = cubic16
    inner = Sphere((0.5, 0.5, 0.5), 0.1, 5.0)
    outer = Sphere((0.5, 0.5, 0.5), 0.3, 13.0)
    f = sample_B(Geometry((inner, outer)), lat)
    assert set(np.unique(f.stacked)) == {1.0, 5.0, 13.0}


def test_cylinder_fill_fraction(cubic16):
    _, lat = cubic16
    cyl = Cylinder((0.5, 0.5, 0.0), (0.5, 0.5, 1.0), 0.25, 9.0)
    f = sample_B(Geometry((cyl,)), lat)
    assert np.mean(f.b3 == 9.0) == pytest.approx(np.pi * 0.25**2, rel=0.1)


def test_gyroid_complement_levels(cubic16):
    _, lat = cubic16
    # sign symmetry of the gyroid function under x -> -x
    hi = sample_B(Geometry((Gyroid(0.5, 13.0),)), lat)
    lo = sample_B(Geometry((Gyroid(-0.5, 13.0),)), lat)
    assert np.mean(hi.stacked == 13.0) == pytest.approx(1.0 - np.mean(lo.stacked == 13.0), abs=0.02)


def test_conventional_frame_matches_for_cubic(cubic16):
    p, lat = cubic16
    g = (Gyroid(1.1, 13.0),)
    a = sample_B(Geometry(g), lat)
    b = sample_B(Geometry(g, frame="conventional"), lat, p.primitive)
    np.testing.assert_array_equal(a.stacked, b.stacked)
    with pytest.raises(ValueError):
        sample_B(Geometry(g, frame="conventional"), lat)


def test_with_eps_replaces_all(cubic16):
    geom = Geometry((Sphere((0, 0, 0), 0.1, 13.0), Gyroid(1.0, 4.0)))
    assert {s.eps for s in geom.with_eps(8.0).shapes} == {8.0}


def test_b_round_trip(rng):
    f = PermittivityField(*(1.0 + 12.0 * rng.random(10) for _ in range(3)))
    v = rng.normal(size=(30, 2)) + 1j * rng.normal(size=(30, 2))
    np.testing.assert_allclose(f.apply_B(f.apply_B_inverse(v)), v)
    with pytest.raises(ValueError):
        f.apply_B_inverse(np.zeros(29))


def test_bcc_gyroid_volume_fraction():
    p = preset("bcc", (12, 12, 12))
    lat, _ = preset_cell(p)
    f = sample_B(Geometry((Gyroid(1.1, 16.0),), frame="conventional"), lat, p.primitive)
    frac = np.mean(f.stacked == 16.0)
    assert 0.05 < frac < 0.25
