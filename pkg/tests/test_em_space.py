import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latdual import em_space as em
from latdual.errors import ContainmentError, PreconditionError
from latdual.spectral import LatticeGrid


def random_datum(grid, rng):
    a = rng.normal(size=(grid.d,) + grid.shape)
    nf = em.curl(grid, a).shape[0]
    return em.EMDatum(grid, a, em.curl_adjoint(grid, rng.normal(size=(nf,) + grid.shape)))


@pytest.mark.parametrize("d", [2, 3])
def test_symbol_identities(d):
    g = LatticeGrid(d, 8, 0.5)
    rng = np.random.default_rng(0)
    phi = rng.normal(size=g.shape)
    assert np.max(np.abs(em.curl(g, em.gradient(g, phi)))) < 1e-12
    nf = 1 if d == 2 else 3
    psi = rng.normal(size=(nf,) + g.shape)
    assert np.max(np.abs(em.divergence(g, em.curl_adjoint(g, psi)))) < 1e-12
    a = rng.normal(size=(d,) + g.shape)
    pa = em.transverse_project(g, a)
    assert np.allclose(em.transverse_project(g, pa), pa)
    assert np.max(np.abs(em.divergence(g, pa))) < 1e-11


def test_curl_stays_within_one_ring():
    g = LatticeGrid(3, 8)
    a = np.zeros((3,) + g.shape)
    a[1, 0, 0, 0] = 1.0
    b = np.abs(em.curl(g, a)).max(axis=0) > 1e-12
    for idx in zip(*np.nonzero(b)):
        off = [min(i, 8 - i) for i in idx]
        assert sum(off) <= 1


def test_divergence_checked():
    g = LatticeGrid(2, 8)
    e = np.zeros((2,) + g.shape)
    e[0, 0, 0] = 1.0
    with pytest.raises(PreconditionError):
        em.EMDatum(g, np.zeros_like(e), e)
    with pytest.raises(ValueError):
        em.EMDatum(LatticeGrid(1, 8), np.zeros((1, 8)), np.zeros((1, 8)))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3]))
def test_gauge_invariance_and_norm_forms(seed, d):
    g = LatticeGrid(d, 6 if d == 3 else 10)
    rng = np.random.default_rng(seed)
    u, v = random_datum(g, rng), random_datum(g, rng)
    phi = rng.normal(size=g.shape)
    us = u.gauge_shift(phi)
    scale = em.em_norm(u) * em.em_norm(v)
    assert abs(em.em_inner(us, v) - em.em_inner(u, v)) < 1e-10 * scale
    assert abs(em.em_symplectic(us, v) - em.em_symplectic(u, v)) < 1e-10 * scale
    t, m = em.em_inner_forms(u, u)
    assert t == pytest.approx(m, rel=1e-10)
    assert np.array_equal(em.gauge_class_support(us), em.gauge_class_support(u))
    # ||b||_- = ||P_T a||_+
    assert em.norm_minus(g, u.b) == pytest.approx(em.norm_plus(g, em.transverse_project(g, u.a)), rel=1e-10)


def test_pure_gauge_has_empty_support():
    g = LatticeGrid(3, 8)
    phi = np.random.default_rng(2).normal(size=g.shape)
    u = em.EMDatum(g, em.gradient(g, phi), np.zeros((3,) + g.shape))
    assert not em.gauge_class_support(u).any()


def test_duality_d2_frozen():
    g = LatticeGrid(2, 16)
    h = 4.0
    M = (np.abs(g.coords[0]) <= h) & (np.abs(g.coords[1]) <= h)
    B = (g.radius < 0.6 * h) & M
    r = em.em_duality_check(B, M, g)
    assert r["gap_forward"] < 1e-6 and r["gap_dual"] < 1e-6
    assert r["radical_dim"] == 1
    assert r["dim_ambient"] == 161
    assert r["ring_separation"] == 0
    with pytest.raises(ContainmentError):
        em.em_duality_check(M, B, g)


def test_smooth_cutoff_properties():
    g = LatticeGrid(2, 32)
    core = g.radius < 3
    chi = em.smooth_cutoff(g, core, 2.0)
    assert chi.min() >= 0 and chi.max() <= 1
    assert np.all(chi[core] == 1.0)
    assert not ((chi > 0) & (g.radius > 3 + 4.0 + 1e-9)).any()


def test_boost_region_duality():
    r = em.boost_region_duality(1 / 16, (0.0, 1.0), 0.5, LatticeGrid(2, 32))
    assert r["mask_sizes"]["M"] == 193
    assert r["gap_forward"] < 1e-6 and r["gap_dual"] < 1e-6
    bs = r["boundary_split"]
    assert bs["remainder_fraction"] < 1e-6 and bs["inside_within_B_plus_ring"]


def test_mult_norm_of_constant():
    g = LatticeGrid(2, 16)
    assert em.mult_norm(g, 0.5 * np.ones(g.shape)).value == pytest.approx(0.5, rel=1e-8)
