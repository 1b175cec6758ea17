import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latdual import spectral as sp
from latdual.errors import UnresolvableRadiusError, WraparoundError, ZeroModeError
from latdual.spectral import LatticeGrid


def test_grid_geometry():
    g = LatticeGrid(2, 8, 0.5, 1.0)
    assert g.L == 4.0
    assert g.shape == (8, 8)
    assert g.cell_volume == 0.25
    assert g.coords[0][0, 0] == 0.0
    assert g.coords[0][7, 0] == -0.5
    assert g.radius[0, 0] == 0.0
    assert g.omega[0, 0] == 1.0
    assert g.site_position((5, 1)).tolist() == [-1.5, 0.5]


@pytest.mark.parametrize("kw", [dict(d=0, N=8), dict(d=1, N=7), dict(d=1, N=8, a=0.0), dict(d=1, N=8, m=-1.0)])
def test_grid_rejects_bad_parameters(kw):
    with pytest.raises(ValueError):
        LatticeGrid(**kw)


def test_norm_of_single_plane_wave():
    # cos(p x) has |fft|^2 = (N/2)^2 on two modes; norm^2 = a N / 2 * |p|^sign
    g = LatticeGrid(1, 32, 0.25)
    p = 2 * np.pi * 3 / g.L
    f = np.cos(p * g.coords[0])
    for sign in (1, -1):
        assert sp.norm_pm(g, f, sign) == pytest.approx(math.sqrt(g.L / 2 * p**sign), rel=1e-12)


def test_norm_minus_rejects_zero_mode():
    g = LatticeGrid(2, 8)
    with pytest.raises(ZeroModeError):
        sp.norm_pm(g, np.ones(g.shape), -1)
    with pytest.raises(ZeroModeError):
        sp.apply_omega_power(g, np.ones(g.shape), -0.5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-1.5, 1.5))
def test_omega_powers_compose(seed, s):
    g = LatticeGrid(2, 8, 1.0, 0.7)
    f = np.random.default_rng(seed).normal(size=g.shape)
    back = sp.apply_omega_power(g, sp.apply_omega_power(g, f, s), -s)
    assert np.allclose(back, f, atol=1e-10)


def test_bump_and_mollifier():
    assert sp.bump(np.array([0.0]))[0] == pytest.approx(math.exp(-1))
    assert sp.bump(np.array([1.0, 2.0])).tolist() == [0.0, 0.0]
    g = LatticeGrid(2, 64, 1 / 32)
    rho = sp.mollifier(g, 4)
    assert g.cell_volume * rho.sum() == pytest.approx(1.0)
    assert not (sp.support(rho) & (g.radius >= 0.25)).any()
    with pytest.raises(UnresolvableRadiusError):
        sp.mollifier(g, 32)


def test_convolution_with_delta_is_identity():
    g = LatticeGrid(2, 16, 0.5)
    f = np.random.default_rng(0).normal(size=g.shape)
    assert np.allclose(sp.convolve(g, f, g.delta()), f)


def test_ring_inflate_counts():
    m = np.zeros((9, 9), bool)
    m[0, 0] = True
    assert sp.ring_inflate(m, 1).sum() == 5
    assert sp.ring_inflate(m, 2).sum() == 13
    g = LatticeGrid(2, 16)
    origin = np.zeros(g.shape, bool)
    origin[0, 0] = True
    assert sp.dilate_mask(g, origin, 1.0).sum() == 5
    assert sp.dilate_mask(g, origin, 1.5).sum() == 9


def test_support_reduces_components():
    f = np.zeros((2, 4, 4))
    f[1, 2, 3] = 1.0
    s = sp.support(f, d=2)
    assert s.shape == (4, 4) and s.sum() == 1 and s[2, 3]


def test_constant_multiplier_norm_is_the_constant():
    g = LatticeGrid(2, 16, 1.0)
    for sign in (1, -1):
        est = sp.mult_operator_norm_estimate(g, 2.5 * np.ones(g.shape), sign)
        assert est.value == pytest.approx(2.5, rel=1e-8)


def test_power_and_lanczos_agree_on_diagonal():
    diag = np.array([3.0, 2.0, 1.0, 0.5])
    fwd = adj = lambda x: diag * x
    x0 = np.ones(4)
    assert sp.power_iteration(fwd, adj, x0, 500, 1e-14).value == pytest.approx(3.0, rel=1e-6)
    assert sp.lanczos_norm(fwd, adj, x0, 1e-12).value == pytest.approx(3.0, rel=1e-10)


def test_schur_bound_dominates_small_grid():
    g = LatticeGrid(2, 32, 0.5)
    chi = np.e * sp.bump(g.radius / 3.0)
    r = sp.schur_bound_check(g, chi, 1)
    assert r["dominates"]
    assert r["block_norm"] <= r["bound"]
    assert r["uv_modes"] > 0


def test_fractional_constant_oracles():
    # A_{1/2} in d = 1 equals 2 pi; in general A_s(d=1) = 2 pi / (Gamma(2s+1) sin(pi s))
    assert sp.fractional_constant(1, 0.5) == pytest.approx(2 * math.pi, abs=1e-9)
    s = 0.3
    exact = 2 * math.pi / (math.gamma(2 * s + 1) * math.sin(math.pi * s))
    assert sp.fractional_constant(1, s) == pytest.approx(exact, rel=1e-8)
    with pytest.raises(ValueError):
        sp.fractional_constant(1, 1.0)


def test_fractional_identity_frozen_ratio():
    g = LatticeGrid(2, 128, 1 / 128)
    lhs, rhs, _ = sp.fractional_identity(g, sp.bump(g.radius / 0.125), 0.5)
    assert lhs / rhs == pytest.approx(0.9558939348468856, rel=1e-8)


def test_dilation_identity_and_unitarity():
    g = LatticeGrid(2, 128, 1 / 8)
    r = g.radius
    f = (sp.bump(r / 1.5), g.coords[0] * sp.bump(r / 1.5))
    same = sp.dilation(g, f, 1.0)
    assert np.allclose(same[0], sp.project_zero_mean(f[0]))
    assert np.allclose(same[1], f[1])
    norm = lambda q: math.hypot(sp.norm_pm(g, q[0], 1), sp.norm_pm(g, q[1], -1))
    assert norm(sp.dilation(g, f, 0.9)) == pytest.approx(norm(f), rel=1e-3)
    with pytest.raises(WraparoundError):
        sp.dilation(g, (sp.bump(r / 7.0), 0 * r), 0.5)


def test_diffeo_identity_and_bound():
    g = LatticeGrid(2, 32, 0.5)
    spec = sp.DiffeoSpec.with_b(0.0, (0.0, 0.0), 2.0, 4.0, 0.5)
    f = np.random.default_rng(1).normal(size=g.shape)
    assert np.allclose(sp.diffeo_pullback(g, (f, f), spec)[0], f)
    assert sp.diffeo_bound(0.1, 2, 1) == pytest.approx(0.9**-4 * 1.1**3)
    spec = sp.DiffeoSpec.with_b(0.1, (0.0, 0.0), 2.0, 4.0, 0.5)
    assert spec.b_lambda == pytest.approx(0.1)
    est = sp.diffeo_operator_norm(g, spec, 1)
    assert est.value**2 <= sp.diffeo_bound(0.1, 2, 1) * 1.05
