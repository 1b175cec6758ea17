"""Scalar one-particle space in Cauchy-data form.

A datum ``f = (f0, f1)`` carries the symplectic form

    sigma(f, g) = <f0, g1> - <f1, g0>

and the energy product ``(f, g) = <f0, omega g0> + <f1, omega^-1 g1>``,
with complex structure ``J(f0, f1) = (-omega^-1 f1, omega f0)`` so that
``sigma(f, J g) = (f, g)``.  In the massless case the zero mode of ``f1``
is excluded (``omega^-1`` is singular there) and the zero mode of ``f0``
is a null direction of the energy form, quotiented out of every subspace.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import linalg

from . import _subspace as ss
from .cauchy import CauchyDatum
from .errors import AmbientMismatchError, ContainmentError, PreconditionError, WraparoundError
from .propagator import PropagatorKernel, SpacetimeSource, propagate_to_cauchy_data
from .spectral import (
    LatticeGrid,
    apply_omega_power,
    bump,
    convolve,
    dilate_mask,
    mollifier,
    power_of,
    ring_inflate,
    support,
)

Subspace = ss.Subspace
FINITE_DIM_NOTE = (
    "finite-dimensional lattice truncation: V^cc = V holds exactly for any subspace, "
    "so small gaps validate the pipeline rather than the continuum theorem"
)


def _same_grid(f: CauchyDatum, g: CauchyDatum) -> LatticeGrid:
    if f.grid != g.grid:
        raise AmbientMismatchError("data live on different grids")
    return f.grid


def symplectic_form(f: CauchyDatum, g: CauchyDatum) -> float:
    grid = _same_grid(f, g)
    return grid.inner(f.f0, g.f1) - grid.inner(f.f1, g.f0)


def energy_inner(f: CauchyDatum, g: CauchyDatum) -> float:
    grid = _same_grid(f, g)
    return grid.inner(f.f0, apply_omega_power(grid, g.f0, 1.0)) + grid.inner(
        f.f1, apply_omega_power(grid, g.f1, -1.0)
    )


def energy_norm(f: CauchyDatum) -> float:
    return float(np.sqrt(max(energy_inner(f, f), 0.0)))


def complex_structure(f: CauchyDatum) -> CauchyDatum:
    g = f.grid
    return CauchyDatum(g, -apply_omega_power(g, f.f1, -1.0), apply_omega_power(g, f.f0, 1.0))


def time_reversal(f: CauchyDatum) -> CauchyDatum:
    return CauchyDatum(f.grid, f.f0, -f.f1)


def psi(f: CauchyDatum) -> CauchyDatum:
    """Pairing map: ``<psi(f), g> = sigma(f, g)`` componentwise."""
    return CauchyDatum(f.grid, -f.f1, f.f0)


def psi_inverse(g: CauchyDatum) -> CauchyDatum:
    return CauchyDatum(g.grid, g.f1, -g.f0)


def pairing(f: CauchyDatum, g: CauchyDatum) -> float:
    """Quadrature pairing of two data, component by component."""
    grid = _same_grid(f, g)
    return grid.inner(f.f0, g.f0) + grid.inner(f.f1, g.f1)


# ---------------------------------------------------------------------------
# local subspaces


@lru_cache(maxsize=16)
def scalar_family(grid: LatticeGrid) -> ss.KernelFamily:
    """Offset tables for unit site generators in the ``f0`` and ``f1`` channels."""
    shape = grid.shape
    energy = np.zeros((2, 2) + shape)
    energy[0, 0] = ss.kernel_table(grid, power_of(grid.omega, 1.0))
    energy[1, 1] = ss.kernel_table(grid, power_of(grid.omega, -1.0))
    sympl = np.zeros((2, 2) + shape)
    sympl[(0, 1) + grid.zero_mode] = grid.cell_volume
    sympl[(1, 0) + grid.zero_mode] = -grid.cell_volume
    return ss.KernelFamily(grid, "scalar", energy, sympl, ("f0", "f1"))


def _combos(grid: LatticeGrid, n_sites: int) -> np.ndarray | None:
    """Massless: restrict ``f1`` coefficients to zero total mass."""
    if not grid.massless:
        return None
    C = np.zeros((2 * n_sites, 2 * n_sites - 1))
    C[:n_sites, :n_sites] = np.eye(n_sites)
    # f1 columns: e_x - e_{x0} for x != x0
    for k in range(1, n_sites):
        C[n_sites + k, n_sites - 1 + k] = 1.0
        C[n_sites, n_sites - 1 + k] = -1.0
    return C


def local_subspace(mask: np.ndarray, grid: LatticeGrid, tol: float = ss.ORTH_TOL) -> Subspace:
    """Span of site generators ``(e_x, 0)``, ``(0, e_x)`` for ``x`` in ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.shape:
        raise ValueError("mask not on the grid")
    if not mask.any():
        raise PreconditionError("empty mask")
    sites = ss.sites_of(mask)
    gens = ss.generators((0, 1), sites)
    return ss.orthonormalize(scalar_family(grid), gens, _combos(grid, len(sites)), tol, label="H(mask)")


def basis_data(V: Subspace) -> list[CauchyDatum]:
    fields = V.family.materialize(V.gens, V.coeffs)
    return [CauchyDatum(V.grid, f[0], f[1]) for f in fields]


def symplectic_complement(V: Subspace, W: Subspace, tol: float = ss.SVD_TOL) -> Subspace:
    """``{f in W : sigma(f, v) = 0 for all v in V}``, orthonormalized."""
    return ss.complement(V, W, tol)


def subspace_gap(V: Subspace, W: Subspace) -> float:
    """``max(||P_V - P_W P_V||, ||P_W - P_V P_W||)``."""
    return ss.gap(V, W)


def duality_check(B: np.ndarray, M: np.ndarray, grid: LatticeGrid) -> dict:
    """Relative duality gaps for ``B`` inside ambient mask ``M``.

    The complementary mask is ``M`` minus ``B`` so each site belongs to
    exactly one side.
    """
    B = np.asarray(B, dtype=bool)
    M = np.asarray(M, dtype=bool)
    if (B & ~M).any():
        raise ContainmentError("B is not inside the ambient mask")
    Bp = M & ~B
    HM = local_subspace(M, grid)
    HB = local_subspace(B, grid)
    HBp = local_subspace(Bp, grid) if Bp.any() else ss.zero_subspace(HM.family)
    report = ss.relative_duality(HB, HBp, HM)
    report.update(
        operation="duality_check",
        grid=grid.to_dict(),
        mask_sizes={"B": int(B.sum()), "Bprime": int(Bp.sum()), "M": int(M.sum())},
        note=FINITE_DIM_NOTE,
    )
    return report


def outer_regularity_scan(
    B: np.ndarray, neighborhoods: Sequence[np.ndarray], grid: LatticeGrid
) -> dict:
    """Gaps between ``H(A_k)`` and ``H(B)`` for a shrinking family ``A_k``.

    ``gap_to_B`` is the literal quantity; on a lattice it cannot fall below
    1 while ``A_k`` has more sites than ``B``.  ``gap_to_closure`` compares
    with the closure ``B + one ring`` and reaches zero once ``A_k`` equals
    it, which is the lattice floor of the shrinking process.
    """
    B = np.asarray(B, dtype=bool)
    closure = ring_inflate(B, 1)
    masks = [np.asarray(A, dtype=bool) for A in neighborhoods]
    for k, A in enumerate(masks):
        if (closure & ~A).any():
            raise ContainmentError(f"neighborhood {k} does not contain the closure of B")
        if k and (A & ~masks[k - 1]).any():
            raise PreconditionError("neighborhoods must be nested and shrinking")
    HB = local_subspace(B, grid)
    HBbar = local_subspace(closure, grid)
    to_b, to_closure, excess = [], [], []
    for A in masks:
        HA = local_subspace(A, grid)
        to_b.append(subspace_gap(HA, HB))
        to_closure.append(subspace_gap(HA, HBbar))
        excess.append(HA.dim - HB.dim)
    nonincr = lambda s: all(y <= x + 1e-12 for x, y in zip(s, s[1:]))
    return {
        "operation": "outer_regularity_scan",
        "gap_to_B": to_b,
        "gap_to_closure": to_closure,
        "excess_dim": excess,
        "closure_excess_dim": HBbar.dim - HB.dim,
        "non_increasing": nonincr(to_b) and nonincr(to_closure) and nonincr(excess),
        "floor_reached": bool(to_closure[-1] < 1e-8),
    }


def mollifier_convergence(f: CauchyDatum, schedule: Sequence[int]) -> dict:
    """Energy error of ``f_n = psi^-1(rho_n * psi(f))`` along ``schedule``."""
    grid = f.grid
    pf = psi(f)
    supp = support(pf.f0, d=grid.d) | support(pf.f1, d=grid.d)
    if supp.any():
        reach = grid.radius[supp].max() + 1.0 / min(schedule)
        if reach >= grid.L / 2:
            raise WraparoundError("support plus mollifier radius exceeds half the box")
    errors, inclusion = [], []
    for n in schedule:
        rho = mollifier(grid, n)
        smooth = CauchyDatum(grid, convolve(grid, pf.f0, rho), convolve(grid, pf.f1, rho))
        fn = psi_inverse(smooth)
        errors.append(energy_norm(fn - f))
        allowed = dilate_mask(grid, supp, 1.0 / n + 1e-9 * grid.a) if supp.any() else supp
        got = support(smooth.f0, d=grid.d) | support(smooth.f1, d=grid.d) if supp.any() else supp
        inclusion.append(bool(not (got & ~allowed).any()))
    return {
        "operation": "mollifier_convergence",
        "schedule": list(schedule),
        "errors": errors,
        "support_inclusion": inclusion,
        "decreasing": all(b < a for a, b in zip(errors, errors[1:])),
    }


# ---------------------------------------------------------------------------
# forward-cone density


def energy_coordinates(f: CauchyDatum) -> np.ndarray:
    """Real vector whose Euclidean products reproduce :func:`energy_inner`."""
    g = f.grid
    s = np.sqrt(g.cell_volume)
    return s * np.concatenate(
        [apply_omega_power(g, f.f0, 0.5).ravel(), apply_omega_power(g, f.f1, -0.5).ravel()]
    )


def forward_cone_sources(
    grid: LatticeGrid, count: int, rng: np.random.Generator, t_max: float | None = None
) -> list[SpacetimeSource]:
    """Single-slice bump sources with supports strictly inside the forward cone."""
    t_max = grid.L / 4 if t_max is None else t_max
    out = []
    for _ in range(count):
        t = rng.uniform(0.3 * t_max, t_max)
        width = rng.uniform(1.5, 3.0) * grid.a
        room = t - width - grid.a
        if room <= 0:
            width, room = 0.5 * t, 0.5 * t - grid.a
        direction = rng.normal(size=grid.d)
        direction /= np.linalg.norm(direction)
        center = direction * rng.uniform(0, max(room, 0))
        dist = np.sqrt(sum((x - c) ** 2 for x, c in zip(grid.coords, center)))
        out.append(SpacetimeSource(grid, (t,), (bump(dist / width),)))
    return out


def forward_cone_density_residual(
    targets: Sequence[CauchyDatum],
    family: Sequence[SpacetimeSource],
    kernel: PropagatorKernel,
    sizes: Sequence[int] | None = None,
) -> dict:
    """Relative energy residual of each target against spans of propagated sources.

    ``sizes`` is the enrichment schedule: the span of the first ``k``
    sources for each ``k``.  Projections onto nested spans give
    non-increasing residuals.
    """
    if kernel.grid.m <= 0:
        raise PreconditionError("forward-cone density needs m > 0")
    if not family:
        raise PreconditionError("empty source family")
    sizes = [len(family)] if sizes is None else list(sizes)
    if sorted(sizes) != sizes or sizes[-1] > len(family):
        raise PreconditionError("sizes must be increasing and within the family")
    D = np.column_stack([energy_coordinates(propagate_to_cauchy_data(s, kernel)) for s in family])
    Q, _ = linalg.qr(D, mode="economic")
    series = []
    for h in targets:
        v = energy_coordinates(h)
        nv = np.linalg.norm(v)
        row = []
        for k in sizes:
            r = v - Q[:, :k] @ (Q[:, :k].T @ v)
            row.append(float(np.linalg.norm(r) / nv) if nv > 0 else 0.0)
        series.append(row)
    return {
        "operation": "forward_cone_density_residual",
        "sizes": sizes,
        "residuals": series,
        "non_increasing": all(all(b <= a + 1e-12 for a, b in zip(s, s[1:])) for s in series),
        "m": kernel.grid.m,
        "a": kernel.grid.a,
    }
