import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from latdual import geometry as geo
from latdual.errors import GeometryError, SectorError
from latdual.spectral import LatticeGrid

coord = st.floats(-5, 5, allow_nan=False)
point3 = st.tuples(coord, coord, coord)


def test_interval_kinds():
    o = (0.0, 0.0, 0.0)
    assert geo.interval_kind(o, (2.0, 1.0, 0.0)) is geo.IntervalKind.TIMELIKE
    assert geo.interval_kind(o, (1.0, 1.0, 0.0)) is geo.IntervalKind.LIGHTLIKE
    assert geo.interval_kind(o, (0.5, 1.0, 0.0)) is geo.IntervalKind.SPACELIKE
    with pytest.raises(GeometryError):
        geo.interval_kind((0.0, 0.0), o)


@settings(max_examples=100, deadline=None)
@given(point3)
def test_ray_inversion_involution(x):
    x = np.array(x)
    assume(abs(geo.minkowski_square(x)) > 1e-3 * max(1.0, x @ x))
    y = geo.ray_inversion(x)
    assert np.allclose(geo.ray_inversion(y), x, rtol=1e-10, atol=1e-12)
    # inversion flips the sign of the Minkowski square's reciprocal: y^2 = 1 / x^2
    assert geo.minkowski_square(y) == pytest.approx(1 / geo.minkowski_square(x), rel=1e-9)


def test_ray_inversion_rejects_null():
    with pytest.raises(GeometryError):
        geo.ray_inversion([1.0, 1.0, 0.0])


def test_conformal_map_images():
    phi = geo.conformal_map(1.0)
    assert np.allclose(phi(np.zeros(3)), [-1.0, 0.0, 0.0], atol=1e-12)
    eta = np.linspace(0.0, 3.0, 7)
    H = np.column_stack([np.cosh(eta), np.sinh(eta), np.zeros_like(eta)])
    img = phi(H)
    assert np.allclose(img[:, 0], -0.5, atol=1e-12)
    assert np.all(np.abs(img[:, 1]) < 0.5)
    assert np.allclose(phi.inverse(img), H, atol=1e-10)
    dc = phi.image_region(2)
    assert dc.lower == (-1.0, 0.0, 0.0) and dc.upper == (0.0, 0.0, 0.0)


def test_forward_cone_maps_into_double_cone():
    phi = geo.conformal_map(2.0)
    rng = np.random.default_rng(0)
    P = np.column_stack([rng.uniform(0, 5, 2000), rng.uniform(-5, 5, (2000, 2))])
    inside = geo.ForwardCone((0.0, 0.0, 0.0)).contains(P)
    assert geo.contains(phi.image_region(2), phi(P[inside])).all()


def test_predicates_agree_flat():
    rng = np.random.default_rng(1)
    R = geo.DiamondOverBase(geo.FlatTimeSlice(0.0), geo.Ball((0.0, 0.0), 1.0))
    M = geo.DiamondOverBase(geo.FlatTimeSlice(0.0), geo.Ball((0.0, 0.0), 2.0))
    P = rng.uniform(-2.2, 2.2, (10000, 3))
    a = geo.causal_complement(R, M).contains(P)
    b = geo.relative_complement_predicate(R, M, P)
    assert np.array_equal(a, b) and a.sum() > 100


def test_predicates_agree_hyperboloid_cap():
    rng = np.random.default_rng(2)
    R = geo.BoostRegionCompletion(1.0, (0.0, 1.0), 0.3)
    V = geo.ForwardCone((0.0, 0.0, 0.0))
    P = np.column_stack([rng.uniform(0, 4, 10000), rng.uniform(-4, 4, (10000, 2))])
    a = geo.causal_complement(R, V).contains(P)
    b = geo.relative_complement_predicate(R, V, P)
    assert np.array_equal(a, b) and a.sum() > 100


def test_complement_of_whole_is_empty():
    M = geo.DiamondOverBase(geo.FlatTimeSlice(0.0), geo.Ball((0.0,), 2.0))
    assert isinstance(geo.causal_complement(M, M), geo.EmptyRegion)


def test_boost_cap_membership():
    t, s = np.cosh(1.0), np.sinh(1.0)
    assert geo.boost_cap_contains(1.0, (1.0, 0.0), 0.1, [t, s, 0.0])
    assert not geo.boost_cap_contains(1.0, (1.0, 0.0), 0.1, [t, 0.0, s])
    assert not geo.boost_cap_contains(1.0, (1.0, 0.0), 0.1, [1.0, 0.0, 0.0])
    with pytest.raises(GeometryError):
        geo.boost_cap_contains(1.0, (1.0, 0.0), 0.1, [2.0, 0.0, 0.0])
    with pytest.raises(SectorError):
        geo.BoostCap((1.0, 0.0), 1.5)


def test_sector_signed_distance():
    s = geo.Sector((1.0, 0.0), np.pi / 4, 2.0)
    assert s.sdf(np.array([1.0, 0.0])) == pytest.approx(-np.sin(np.pi / 4))
    assert s.sdf(np.array([3.0, 0.0])) == pytest.approx(1.0)
    assert s.contains(np.array([[1.0, 0.5], [-1.0, 0.0]])).tolist() == [True, False]


def test_lattice_masks_frozen_sizes():
    g = LatticeGrid(2, 32, 1.0)
    assert geo.flat_basis_mask(g, 16.0).sum() == 193
    sizes = [geo.boost_flat_mask(g, 1 / 16, (1.0, 0.0), e).sum() for e in (0.1, 0.5, 0.9)]
    assert sizes == [25, 65, 89]
    with pytest.raises(GeometryError):
        geo.boost_flat_mask(g, 1 / 8, (1.0, 0.0), 0.5, T=16.0)


def test_largest_component_handles_wraparound():
    m = np.zeros((16, 16), bool)
    m[[0, 1, 15], 0] = True  # one component straddling the FFT seam
    m[8, 8] = True
    out = geo.largest_component(m)
    assert out.sum() == 3 and out[15, 0] and not out[8, 8]


def test_region_roundtrip_from_dict():
    R = geo.region_from_dict(
        {"kind": "DiamondOverBase", "surface": {"kind": "FlatTimeSlice", "t0": 0.0}, "base": {"kind": "Ball", "center": [0, 0], "radius": 1}}
    )
    assert R.contains(np.array([0.0, 0.2, 0.0]))
    assert isinstance(geo.region_from_dict({"kind": "BoostRegionCompletion", "c": 1, "v": [1, 0], "eps": 0.5}), geo.BoostRegionCompletion)
    with pytest.raises(GeometryError):
        geo.region_from_dict({"kind": "Nope"})
