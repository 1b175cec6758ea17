import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latdual import fock
from latdual.errors import PreconditionError, ResourceBudgetError

cnum = st.complex_numbers(max_magnitude=0.6, allow_nan=False, allow_infinity=False)


def test_dimensions_and_ladder():
    ctx = fock.FockContext(2, 6)
    assert ctx.dim == len(ctx.states) == 28
    a0, a1 = ctx.annihilators
    low = ctx.low_block(5)
    comm = a0 @ a0.T - a0.T @ a0
    assert np.allclose(comm[np.ix_(low, low)], np.eye(low.sum()))
    cross = a0 @ a1.T - a1.T @ a0
    assert np.allclose(cross[np.ix_(low, low)], 0)


def test_two_point_function():
    ctx = fock.FockContext(2, 8)
    f, g = np.array([0.3 + 0.1j, -0.2j]), np.array([0.5, 0.1 + 0.4j])
    two = (fock.field_operator(ctx, f) @ fock.field_operator(ctx, g))[0, 0]
    assert two == pytest.approx(np.vdot(f, g), abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(cnum, cnum)
def test_vacuum_weyl_expectation(z0, z1):
    ctx = fock.FockContext(2, 12)
    f = np.array([z0, z1])
    val = fock.vacuum_expectation(ctx, fock.weyl(ctx, f))
    assert abs(val - np.exp(-np.vdot(f, f).real / 2)) < 1e-6


@settings(max_examples=20, deadline=None)
@given(cnum, cnum)
def test_sigma_antisymmetric(z0, z1):
    f, g = np.array([z0]), np.array([z1])
    assert fock.sigma(f, g) == pytest.approx(-fock.sigma(g, f), abs=1e-15)


def test_weyl_relation_residual_decreases():
    f, g = np.array([0.4 + 0.3j, -0.2 + 0.5j]), np.array([0.1 - 0.6j, 0.5 + 0.2j])
    res = [fock.weyl_relation_residual(fock.FockContext(2, K), f, g) for K in (8, 12, 16)]
    assert res[0] > res[1] > res[2]
    assert fock.unitarity_residual(fock.FockContext(2, 8), f) < 1e-10


def test_commutation_matches_symplectic_phase():
    f, g = np.array([0.4 + 0.3j, -0.2 + 0.5j]), np.array([0.1 - 0.6j, 0.5 + 0.2j])
    r = fock.commutation_vs_symplectic(fock.FockContext(2, 12), f, g)
    assert r["norm_difference"] < 1e-5
    assert r["analytic_difference"] < 1e-5
    assert r["analytic_norm"] == pytest.approx(2 * abs(np.sin(fock.sigma(f, g))))
    assert r["sigma"] == pytest.approx(fock.sigma(f, g))
    same = fock.commutation_vs_symplectic(fock.FockContext(1, 8), np.array([0.5]), np.array([1.0]))
    assert same["commutes_at_weyl_level"] and same["commutator_norm"] < 1e-10


def test_field_norm_cap():
    ctx = fock.FockContext(1, 6)
    with pytest.raises(PreconditionError):
        fock.field_operator(ctx, np.array([5.0]))
    with pytest.raises(ValueError):
        fock.field_operator(ctx, np.array([1.0, 0.0]))


def test_relative_complement():
    H = fock.RealSubspace([np.array([1.0]), np.array([1j])])
    V = fock.RealSubspace([np.array([1.0])])
    Vc = fock.relative_complement(V, H, 1)
    assert Vc.shape == (2, 1)
    assert np.allclose(np.abs(Vc[:, 0]), [1.0, 0.0])


@pytest.mark.parametrize("K", [6, 8, 10])
def test_one_mode_commutant_matches_complement(K):
    H = fock.RealSubspace([np.array([1.0]), np.array([1j])])
    V = fock.RealSubspace([np.array([1.0])])
    r = fock.relative_commutant_dims(fock.FockContext(1, K), V, H)
    assert r["commutant_dim"] == r["complement_dim"] == 3
    assert r["heuristic"]


def test_commutant_budget_and_containment():
    H = fock.RealSubspace([np.array([1.0])])
    with pytest.raises(ResourceBudgetError):
        fock.relative_commutant_dims(fock.FockContext(1, 12), H, H)
    with pytest.raises(PreconditionError):
        fock.relative_commutant_dims(fock.FockContext(1, 6), fock.RealSubspace([np.array([1j])]), H)
