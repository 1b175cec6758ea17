import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latdual import scalar_space as sc
from latdual.cauchy import CauchyDatum
from latdual.errors import ContainmentError, PreconditionError, WraparoundError
from latdual.propagator import PropagatorKernel
from latdual.spectral import LatticeGrid, bump, ring_inflate

GRID = LatticeGrid(2, 8, 1.0, 0.8)


def random_datum(grid, seed):
    rng = np.random.default_rng(seed)
    return CauchyDatum(grid, rng.normal(size=grid.shape), rng.normal(size=grid.shape))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_form_identities(seed):
    f, g = random_datum(GRID, seed), random_datum(GRID, seed + 1)
    assert sc.symplectic_form(f, g) == pytest.approx(-sc.symplectic_form(g, f), abs=1e-12)
    assert sc.energy_inner(f, g) == pytest.approx(sc.energy_inner(g, f), rel=1e-10)
    assert sc.energy_inner(f, f) > 0
    # sigma(f, J g) = (f, g) and J^2 = -1
    assert sc.symplectic_form(f, sc.complex_structure(g)) == pytest.approx(sc.energy_inner(f, g), rel=1e-9, abs=1e-10)
    jj = sc.complex_structure(sc.complex_structure(f))
    assert np.allclose(jj.f0, -f.f0) and np.allclose(jj.f1, -f.f1)
    # the pairing map reproduces the symplectic form
    assert sc.pairing(sc.psi(f), g) == pytest.approx(sc.symplectic_form(f, g), abs=1e-12)
    back = sc.psi_inverse(sc.psi(f))
    assert np.array_equal(back.f0, f.f0) and np.array_equal(back.f1, f.f1)


def test_time_reversal_antisymplectic():
    f, g = random_datum(GRID, 5), random_datum(GRID, 6)
    T = sc.time_reversal
    assert sc.symplectic_form(T(f), T(g)) == pytest.approx(-sc.symplectic_form(f, g))


def test_full_mask_dimensions():
    for m, dim in ((0.0, 126), (1.0, 128)):
        g = LatticeGrid(2, 8, 1.0, m)
        assert sc.local_subspace(np.ones(g.shape, bool), g).dim == dim


def _ball_in_square(grid):
    h = grid.L / 4
    M = (np.abs(grid.coords[0]) <= h) & (np.abs(grid.coords[1]) <= h)
    return (grid.radius < 0.6 * h) & M, M


@pytest.mark.parametrize("m, radical", [(0.0, 1), (1.0, 0)])
def test_duality_small(m, radical):
    g = LatticeGrid(2, 16, 1.0, m)
    B, M = _ball_in_square(g)
    r = sc.duality_check(B, M, g)
    assert r["gap_forward"] < 1e-8 and r["gap_dual"] < 1e-8
    assert r["radical_dim"] == radical
    assert "finite-dimensional" in r["note"]
    assert r["mask_sizes"]["B"] + r["mask_sizes"]["Bprime"] == r["mask_sizes"]["M"]


def test_duality_rejects_uncontained_mask():
    g = LatticeGrid(2, 8, 1.0, 1.0)
    B = g.radius < 2
    with pytest.raises(ContainmentError):
        sc.duality_check(B, g.radius < 1, g)


def test_symplectic_complement_is_orthogonal():
    g = LatticeGrid(2, 8, 1.0, 1.0)
    W = sc.local_subspace(g.radius < 3, g)
    V = sc.local_subspace(g.radius < 1.5, g)
    C = sc.symplectic_complement(V, W)
    for c in sc.basis_data(C):
        for v in sc.basis_data(V):
            assert abs(sc.symplectic_form(c, v)) < 1e-9


def test_outer_regularity_frozen_series():
    g = LatticeGrid(2, 16, 1.0, 1.0)
    B = g.radius < 3
    r = sc.outer_regularity_scan(B, [ring_inflate(B, k) for k in (4, 3, 2, 1)], g)
    assert r["excess_dim"] == [208, 144, 88, 40]
    assert r["closure_excess_dim"] == 40
    assert r["non_increasing"] and r["floor_reached"]
    assert all(x == pytest.approx(1.0) for x in r["gap_to_B"])
    const = sc.outer_regularity_scan(B, [ring_inflate(B, 2)] * 3, g)
    assert len(set(round(x, 12) for x in const["gap_to_closure"])) == 1


def test_outer_regularity_rejects_growing_family():
    g = LatticeGrid(2, 16, 1.0, 1.0)
    B = g.radius < 3
    with pytest.raises(PreconditionError):
        sc.outer_regularity_scan(B, [ring_inflate(B, 1), ring_inflate(B, 2)], g)


def test_mollifier_convergence():
    g = LatticeGrid(2, 128, 1 / 64, 1.0)
    h = CauchyDatum(g, bump(g.radius / 0.4), g.coords[0] * bump(g.radius / 0.3))
    r = sc.mollifier_convergence(sc.psi_inverse(h), [4, 8, 16])
    assert all(r["support_inclusion"]) and r["decreasing"]
    zero = sc.mollifier_convergence(CauchyDatum.zeros(g), [4, 8, 16])
    assert zero["errors"] == [0.0, 0.0, 0.0]
    with pytest.raises(WraparoundError):
        sc.mollifier_convergence(sc.psi_inverse(CauchyDatum(g, bump(g.radius / 0.9), 0 * g.radius)), [4])


def test_forward_cone_residuals_non_increasing():
    g = LatticeGrid(2, 32, 1.0, 1.0)
    rng = np.random.default_rng(0)
    fam = sc.forward_cone_sources(g, 16, rng)
    targets = [CauchyDatum(g, bump(g.radius / 3), 0 * g.radius)]
    r = sc.forward_cone_density_residual(targets, fam, PropagatorKernel(g), [4, 8, 16])
    assert r["non_increasing"]
    assert all(0 <= x <= 1 for x in r["residuals"][0])
    with pytest.raises(PreconditionError):
        sc.forward_cone_density_residual(targets, fam, PropagatorKernel(LatticeGrid(2, 32)), [4])
    with pytest.raises(PreconditionError):
        sc.forward_cone_density_residual(targets, [], PropagatorKernel(g))
