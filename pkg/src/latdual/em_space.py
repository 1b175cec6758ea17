"""Electromagnetic one-particle space in Cauchy-data form, d = 2 or 3.

A datum is a gauge representative ``a`` and a divergence-free electric
field ``e``.  Derivatives are Fourier multipliers with the forward
difference symbols ``q_j = (exp(i p_j a) - 1) / a``:

* gradient ``q phi``, divergence ``sum conj(q_j) e_j`` (its adjoint, up to sign),
* curl ``b = C a`` with ``C = [-q_2, q_1]`` for d = 2 and
  ``C[i, k] = sum_j eps_ijk q_j`` for d = 3,
* transverse projector ``P_T = 1 - q q^dagger / |q|^2``.

These symbols make ``C q = 0``, ``q^dagger C^dagger = 0`` and
``C^dagger C = |q|^2 P_T`` hold exactly, and keep the curl of a
site-supported field within one lattice ring.  The dispersion is
``|q|``; its zero mode is excluded from every norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _subspace as ss
from .errors import ContainmentError, PreconditionError, ZeroModeError
from .geometry import boost_flat_mask, flat_basis_mask
from .spectral import (
    LatticeGrid,
    NormEstimate,
    bump,
    dilate_mask,
    mult_operator_norm_estimate,
    power_of,
    ring_inflate,
    support,
)

DIV_TOL = 1e-10
SUPPORT_RTOL = 1e-10


def _check_dim(grid: LatticeGrid) -> None:
    if grid.d not in (2, 3):
        raise PreconditionError("the EM model supports d = 2 and d = 3 only")


@lru_cache(maxsize=16)
def _symbols(grid: LatticeGrid):
    _check_dim(grid)
    q = np.array([(np.exp(1j * p * grid.a) - 1) / grid.a for p in grid.momenta])
    qabs = np.sqrt(np.sum(np.abs(q) ** 2, axis=0))
    d = grid.d
    if d == 2:
        C = np.array([[-q[1], q[0]]])
    else:
        C = np.zeros((3, 3) + grid.shape, dtype=complex)
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            C[i, k] += q[j]
            C[k, i] -= q[j]
    safe = np.where(qabs > 0, qabs, 1.0) ** 2
    PT = np.array([[float(i == j) - q[i] * np.conj(q[j]) / safe for j in range(d)] for i in range(d)])
    PT[(Ellipsis,) + grid.zero_mode] = 0
    return q, qabs, C, PT


def difference_symbols(grid: LatticeGrid) -> np.ndarray:
    return _symbols(grid)[0]


def dispersion(grid: LatticeGrid) -> np.ndarray:
    """``|q(p)|``, the EM dispersion on the lattice."""
    return _symbols(grid)[1]


def _ft(f, d):
    return np.fft.fftn(f, axes=tuple(range(-d, 0)))


def _ift(f, d):
    return np.real(np.fft.ifftn(f, axes=tuple(range(-d, 0))))


def _apply(matrix: np.ndarray, field: np.ndarray, d: int) -> np.ndarray:
    return _ift(np.einsum("ij...,j...->i...", matrix, _ft(field, d)), d)


def gradient(grid: LatticeGrid, phi: np.ndarray) -> np.ndarray:
    q = difference_symbols(grid)
    return _ift(q * _ft(phi, grid.d), grid.d)


def divergence(grid: LatticeGrid, e: np.ndarray) -> np.ndarray:
    q = difference_symbols(grid)
    return _ift(np.sum(np.conj(q) * _ft(e, grid.d), axis=0), grid.d)


def curl(grid: LatticeGrid, a: np.ndarray) -> np.ndarray:
    """Magnetic field, shape ``(1, *shape)`` for d = 2 and ``(3, *shape)`` for d = 3."""
    return _apply(_symbols(grid)[2], a, grid.d)


def curl_adjoint(grid: LatticeGrid, psi: np.ndarray) -> np.ndarray:
    """``C^dagger psi``: divergence-free vector field from face values."""
    C = _symbols(grid)[2]
    return _apply(np.conj(np.swapaxes(C, 0, 1)), psi, grid.d)


def transverse_project(grid: LatticeGrid, a: np.ndarray) -> np.ndarray:
    return _apply(_symbols(grid)[3], a, grid.d)


def norm_minus(grid: LatticeGrid, f: np.ndarray) -> float:
    """``sqrt(sum_k |f_hat|^2 / |q|)`` over all components; ``p = 0`` is excluded."""
    w = power_of(dispersion(grid), -1.0)
    fh = _ft(np.asarray(f).reshape((-1,) + grid.shape), grid.d)
    return float(np.sqrt(grid.fourier_weight * np.sum(np.abs(fh) ** 2 * w)))


def norm_plus(grid: LatticeGrid, f: np.ndarray) -> float:
    w = dispersion(grid)
    fh = _ft(np.asarray(f).reshape((-1,) + grid.shape), grid.d)
    return float(np.sqrt(grid.fourier_weight * np.sum(np.abs(fh) ** 2 * w)))


@dataclass(frozen=True, eq=False)
class EMDatum:
    """Gauge representative ``a`` and electric field ``e``, both of shape ``(d, *shape)``."""

    grid: LatticeGrid
    a: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        _check_dim(self.grid)
        want = (self.grid.d,) + self.grid.shape
        for name in ("a", "e"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != want:
                raise ValueError(f"{name} has shape {arr.shape}, expected {want}")
            object.__setattr__(self, name, arr)
        scale = max(float(np.max(np.abs(self.e))), 1e-300)
        div = float(np.max(np.abs(divergence(self.grid, self.e))))
        if div > DIV_TOL * max(scale, 1.0):
            raise PreconditionError(f"electric field is not divergence free (|div e| = {div:.2e})")

    @property
    def b(self) -> np.ndarray:
        return curl(self.grid, self.a)

    def gauge_shift(self, phi: np.ndarray) -> "EMDatum":
        return EMDatum(self.grid, self.a + gradient(self.grid, phi), self.e)

    def __add__(self, other: "EMDatum") -> "EMDatum":
        return EMDatum(self.grid, self.a + other.a, self.e + other.e)

    def __sub__(self, other: "EMDatum") -> "EMDatum":
        return EMDatum(self.grid, self.a - other.a, self.e - other.e)

    def __mul__(self, c: float) -> "EMDatum":
        return EMDatum(self.grid, c * self.a, c * self.e)

    __rmul__ = __mul__


def _zero_mode_free(grid: LatticeGrid, e: np.ndarray) -> None:
    mean = np.abs(e.reshape(grid.d, -1).mean(axis=1))
    if np.any(mean > 1e-10 * max(float(np.max(np.abs(e))), 1e-300)):
        raise ZeroModeError("electric field has a zero mode")


def _pair(grid: LatticeGrid, f: np.ndarray, g: np.ndarray, weight: np.ndarray) -> float:
    fh = _ft(f.reshape((-1,) + grid.shape), grid.d)
    gh = _ft(g.reshape((-1,) + grid.shape), grid.d)
    return float(grid.fourier_weight * np.real(np.sum(np.conj(fh) * gh * weight)))


def em_inner_forms(u: EMDatum, v: EMDatum) -> tuple[float, float]:
    """The EM energy product computed from ``P_T a`` and from ``b``."""
    grid = u.grid
    if v.grid != grid:
        raise ValueError("data live on different grids")
    _zero_mode_free(grid, u.e)
    _zero_mode_free(grid, v.e)
    w = dispersion(grid)
    winv = power_of(w, -1.0)
    electric = _pair(grid, u.e, v.e, winv)
    pt = _pair(grid, transverse_project(grid, u.a), transverse_project(grid, v.a), w)
    mag = _pair(grid, u.b, v.b, winv)
    return pt + electric, mag + electric


def em_inner(u: EMDatum, v: EMDatum, form: str = "transverse") -> float:
    t, m = em_inner_forms(u, v)
    if form == "transverse":
        return t
    if form == "magnetic":
        return m
    raise ValueError(f"unknown form {form!r}")


def em_norm(u: EMDatum) -> float:
    return float(np.sqrt(max(em_inner(u, u), 0.0)))


def em_symplectic(u: EMDatum, v: EMDatum) -> float:
    grid = u.grid
    return grid.inner(u.a, v.e) - grid.inner(u.e, v.a)


def gauge_class_support(u: EMDatum, rtol: float = SUPPORT_RTOL) -> np.ndarray:
    """Sites where the magnetic field exceeds ``rtol`` times its maximum.

    A magnetic field at rounding level relative to ``a`` (a pure gauge)
    gives the empty set.
    """
    b = np.abs(u.b)
    bmax = float(b.max())
    if bmax == 0 or bmax <= 1e-12 * float(np.max(np.abs(u.a))):
        return np.zeros(u.grid.shape, dtype=bool)
    return (b > rtol * bmax).any(axis=0)


# ---------------------------------------------------------------------------
# local subspaces


@lru_cache(maxsize=16)
def em_family(grid: LatticeGrid) -> ss.KernelFamily:
    """Offset tables: channels ``0..d-1`` are gauge edges, the rest electric faces."""
    _, qabs, C, PT = _symbols(grid)
    d = grid.d
    nf = C.shape[0]
    nc = d + nf
    winv = power_of(qabs, -1.0)
    energy = np.zeros((nc, nc) + grid.shape)
    energy[:d, :d] = ss.kernel_table(grid, PT * qabs)
    energy[d:, d:] = ss.kernel_table(grid, np.einsum("ik...,jk...->ij...", C, np.conj(C)) * winv)
    Ks = ss.kernel_table(grid, np.conj(np.swapaxes(C, 0, 1)))  # [j, i]
    sympl = np.zeros_like(energy)
    sympl[:d, d:] = Ks
    sympl[d:, :d] = -np.swapaxes(ss.reflect(Ks, d), 0, 1)
    names = tuple(f"a{j}" for j in range(d)) + tuple(f"psi{i}" for i in range(nf))
    return ss.KernelFamily(grid, "em", energy, sympl, names)


def _edge_generators(mask: np.ndarray, d: int) -> np.ndarray:
    """Edges ``(x, j)`` whose curl stays inside ``mask``."""
    rows = []
    for j in range(d):
        ok = mask.copy()
        for k in range(d):
            if k != j:
                ok &= np.roll(mask, 1, axis=k)
        sites = np.argwhere(ok)
        rows.append(np.column_stack([np.full(len(sites), j), sites]))
    return np.concatenate(rows)


def em_generators(mask: np.ndarray, grid: LatticeGrid) -> np.ndarray:
    fam = em_family(grid)
    d = grid.d
    face = ss.generators(range(d, fam.n_channels), np.argwhere(mask))
    return np.concatenate([_edge_generators(mask, d), face]).astype(np.int64)


def em_local_subspace(mask: np.ndarray, grid: LatticeGrid, tol: float = ss.ORTH_TOL) -> ss.Subspace:
    """Classes of edge fields with curl inside ``mask`` plus curls of face fields in ``mask``.

    Electric generators ``C^dagger psi`` are supported in ``mask`` plus one
    ring; ``dropped`` counts degenerate generator directions.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.shape:
        raise ValueError("mask not on the grid")
    if not mask.any():
        raise PreconditionError("empty mask")
    return ss.orthonormalize(em_family(grid), em_generators(mask, grid), None, tol, label="H_em(mask)")


def basis_data(V: ss.Subspace) -> list[EMDatum]:
    grid = V.grid
    d = grid.d
    fields = V.family.materialize(V.gens, V.coeffs)
    return [EMDatum(grid, f[:d], curl_adjoint(grid, f[d:])) for f in fields]


def _leakage(B: np.ndarray, Bp: np.ndarray, d: int) -> int:
    reach = B.copy()
    for k in range(d):
        reach |= np.roll(B, 1, axis=k)
    return int((reach & ~B & Bp).sum())


def em_duality_check(B: np.ndarray, M: np.ndarray, grid: LatticeGrid) -> dict:
    B = np.asarray(B, dtype=bool)
    M = np.asarray(M, dtype=bool)
    if (B & ~M).any():
        raise ContainmentError("B is not inside the ambient mask")
    Bp = M & ~B
    HM = em_local_subspace(M, grid)
    HB = em_local_subspace(B, grid)
    HBp = em_local_subspace(Bp, grid) if Bp.any() else ss.zero_subspace(HM.family)
    report = ss.relative_duality(HB, HBp, HM)
    report.update(
        operation="em_duality_check",
        grid=grid.to_dict(),
        mask_sizes={"B": int(B.sum()), "Bprime": int(Bp.sum()), "M": int(M.sum())},
        dropped_generators={"B": HB.dropped, "Bprime": HBp.dropped, "M": HM.dropped},
        ring_separation=0,
        leakage_sites=_leakage(B, Bp, grid.d),
        note=(
            "masks partition M site by site; electric generators reach one ring "
            "outside their mask, gauge edges are kept only when their curl stays inside"
        ),
    )
    return report


# ---------------------------------------------------------------------------
# chi split and boost regions


@dataclass(frozen=True, eq=False)
class FieldPair:
    """``(b, e)`` in the enveloping field space, without transversality."""

    grid: LatticeGrid
    b: np.ndarray
    e: np.ndarray

    def norm(self) -> float:
        return float(np.hypot(norm_minus(self.grid, self.b), norm_minus(self.grid, self.e)))

    def support(self) -> np.ndarray:
        d = self.grid.d
        return support(np.concatenate([self.b, self.e]), rtol=1e-14, d=d)


def chi_split(u: EMDatum, chi: np.ndarray) -> tuple[FieldPair, FieldPair]:
    """``(chi b, chi e)`` and ``((1 - chi) b, (1 - chi) e)``."""
    grid = u.grid
    b, e = u.b, u.e
    inside = FieldPair(grid, chi * b, chi * e)
    outside = FieldPair(grid, b - inside.b, e - inside.e)
    return inside, outside


def smooth_cutoff(grid: LatticeGrid, core: np.ndarray, width: float) -> np.ndarray:
    """Smooth ``0 <= chi <= 1`` equal to 1 on ``core``, supported within ``2 width`` of it."""
    kernel = bump(grid.radius / width)
    kernel /= kernel.sum()
    grown = dilate_mask(grid, core, width).astype(float)
    chi = np.real(np.fft.ifftn(np.fft.fftn(grown) * np.fft.fftn(kernel)))
    chi = np.clip(chi, 0.0, 1.0)
    chi[core] = 1.0
    chi[chi < 1e-14] = 0.0
    return chi


def mult_norm(grid: LatticeGrid, chi: np.ndarray, **kw) -> NormEstimate:
    """Norm of ``M_chi`` in the minus norm, for the EM dispersion."""
    return mult_operator_norm_estimate(grid, chi, -1, dispersion=dispersion(grid), **kw)


def boundary_split_diagnostic(
    B: np.ndarray, M: np.ndarray, grid: LatticeGrid, rng: np.random.Generator
) -> dict:
    """Split a datum living next to the rim of ``M`` inside ``B`` with a smooth cutoff."""
    rim = M & ring_inflate(~M, 1)
    near = B & rim
    if not near.any():
        raise PreconditionError("B does not reach the boundary ring of M")
    V = em_local_subspace(near, grid)
    u_coeff = V.coeffs @ rng.normal(size=V.dim)
    fields = V.family.materialize(V.gens, u_coeff[:, None])[0]
    u = EMDatum(grid, fields[: grid.d], curl_adjoint(grid, fields[grid.d :]))
    core = support(np.concatenate([u.b, u.e]), rtol=1e-14, d=grid.d)
    chi = smooth_cutoff(grid, core, 2 * grid.a)
    inside, outside = chi_split(u, chi)
    total = FieldPair(grid, u.b, u.e).norm()
    allowed = ring_inflate(B, 1)
    return {
        "datum_sites": int(near.sum()),
        "rim_sites": int(rim.sum()),
        "norm": total,
        "inside_norm": inside.norm(),
        "remainder_norm": outside.norm(),
        "remainder_fraction": outside.norm() / total if total > 0 else 0.0,
        "inside_within_B_plus_ring": bool(not (inside.support() & ~allowed).any()),
    }


def boost_region_duality(
    c: float,
    v,
    eps: float,
    grid: LatticeGrid,
    T: float | None = None,
    seed: int = 0,
) -> dict:
    """EM duality for the conformal image of a boost cap inside the flat basis ball."""
    T = 1.0 / c if T is None else T
    B = boost_flat_mask(grid, c, v, eps, T)
    M = flat_basis_mask(grid, T)
    report = em_duality_check(B, M, grid)
    report.update(
        operation="boost_region_duality",
        c=c,
        v=list(map(float, v)),
        eps=eps,
        T=T,
        boundary_split=boundary_split_diagnostic(B, M, grid, np.random.default_rng(seed)),
    )
    return report
