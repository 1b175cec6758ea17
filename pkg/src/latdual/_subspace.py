"""Shared finite-dimensional machinery for local one-particle subspaces.

A *generator* is a row ``(channel, i_1, ..., i_d)``: a unit field in one
component channel at one lattice site.  For translation-invariant
one-particle structures both the energy product and the symplectic form
between two generators depend only on the channels and on the site offset
``z = x2 - x1 (mod N)``, so they are read off precomputed tables

    E[c1, c2, z],  S[c1, c2, z]

and Gram matrices never touch full lattice fields.  A subspace is a set of
generators plus a coefficient matrix whose columns are energy-orthonormal.

All comparisons run in an orthonormal frame of the union of the generator
sets involved.  Working with residual norms in that frame (rather than
``sqrt(1 - cos^2)`` of principal angles) keeps gaps near machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import AmbientMismatchError, ContainmentError
from .spectral import LatticeGrid

ORTH_TOL = 1e-10
SVD_TOL = 1e-10
CONTAINMENT_TOL = 1e-8
_ROW_CHUNK = 1024


def reflect(table: np.ndarray, d: int) -> np.ndarray:
    """``table[..., -z]`` along the last ``d`` axes (periodic)."""
    out = table
    for ax in range(table.ndim - d, table.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def kernel_table(grid: LatticeGrid, symbol: np.ndarray) -> np.ndarray:
    """Real offset table ``<e_x, K e_y>`` of a Fourier multiplier, indexed by ``y - x``.

    ``symbol`` may carry leading channel axes; the transform runs over the
    trailing ``d`` spatial axes.
    """
    axes = tuple(range(symbol.ndim - grid.d, symbol.ndim))
    return np.real(grid.fourier_weight * np.fft.fftn(symbol, axes=axes))


@dataclass(frozen=True, eq=False)
class KernelFamily:
    """Energy and symplectic offset tables for one ambient one-particle space."""

    grid: LatticeGrid
    name: str
    energy: np.ndarray
    sympl: np.ndarray
    channel_names: tuple[str, ...]
    _flat: dict = field(default_factory=dict, repr=False)

    @property
    def n_channels(self) -> int:
        return self.energy.shape[0]

    def _tables(self):
        if not self._flat:
            n = self.grid.n_sites
            c = self.n_channels
            self._flat["E"] = self.energy.reshape(c, c, n)
            self._flat["S"] = self.sympl.reshape(c, c, n)
        return self._flat["E"], self._flat["S"]

    def blocks(self, g1: np.ndarray, g2: np.ndarray, want: str = "ES") -> tuple:
        """Energy and symplectic Gram matrices between two generator lists."""
        E_tab, S_tab = self._tables()
        N, d = self.grid.N, self.grid.d
        strides = N ** np.arange(d - 1, -1, -1)
        E = np.empty((len(g1), len(g2))) if "E" in want else None
        S = np.empty((len(g1), len(g2))) if "S" in want else None
        c2 = g2[:, 0]
        for lo in range(0, len(g1), _ROW_CHUNK):
            blk = g1[lo : lo + _ROW_CHUNK]
            z = ((g2[None, :, 1:] - blk[:, None, 1:]) % N) @ strides
            c1 = blk[:, 0][:, None]
            if E is not None:
                E[lo : lo + len(blk)] = E_tab[c1, c2[None, :], z]
            if S is not None:
                S[lo : lo + len(blk)] = S_tab[c1, c2[None, :], z]
        return E, S

    def materialize(self, gens: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        """Channel fields ``(k, channels, *shape)`` of the columns of ``coeffs``."""
        k = coeffs.shape[1]
        out = np.zeros((k, self.n_channels) + self.grid.shape)
        idx = (slice(None), gens[:, 0]) + tuple(gens[:, 1 + i] for i in range(self.grid.d))
        np.add.at(out, idx, coeffs.T)
        return out


@dataclass(frozen=True, eq=False)
class Subspace:
    """Energy-orthonormal span: basis vector ``j`` is ``sum_i coeffs[i, j] * gens[i]``."""

    family: KernelFamily
    gens: np.ndarray
    coeffs: np.ndarray
    dropped: int = 0
    label: str = ""

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def grid(self) -> LatticeGrid:
        return self.family.grid

    def gram(self) -> np.ndarray:
        E, _ = self.family.blocks(self.gens, self.gens, "E")
        return self.coeffs.T @ E @ self.coeffs


def sites_of(mask: np.ndarray) -> np.ndarray:
    return np.argwhere(mask)


def generators(channels, sites: np.ndarray) -> np.ndarray:
    """All ``(channel, site)`` rows for the given channels and sites."""
    rows = [np.column_stack([np.full(len(sites), c), sites]) for c in channels]
    return np.concatenate(rows).astype(np.int64) if rows else np.zeros((0, 1), np.int64)


def orthonormalize(
    family: KernelFamily,
    gens: np.ndarray,
    combos: np.ndarray | None = None,
    tol: float = ORTH_TOL,
    label: str = "",
) -> Subspace:
    """Orthonormal basis of the span of ``gens @ combos``.

    Uses the eigendecomposition of the energy Gram matrix; directions with
    eigenvalue below ``tol`` times the largest are dropped (null vectors of
    the energy seminorm, linear dependencies).
    """
    gens = np.asarray(gens, dtype=np.int64)
    if combos is None:
        combos = np.eye(len(gens))
    if combos.shape[1] == 0:
        return Subspace(family, gens, np.zeros((len(gens), 0)), 0, label)
    E, _ = family.blocks(gens, gens, "E")
    G = combos.T @ E @ combos
    lam, U = linalg.eigh((G + G.T) / 2)
    keep = lam > tol * max(lam.max(), 0.0) if lam.size and lam.max() > 0 else np.zeros(len(lam), bool)
    coeffs = combos @ (U[:, keep] / np.sqrt(lam[keep]))
    return Subspace(family, gens, coeffs, int((~keep).sum()), label)


def zero_subspace(family: KernelFamily) -> Subspace:
    return Subspace(family, np.zeros((0, 1 + family.grid.d), np.int64), np.zeros((0, 0)))


# ---------------------------------------------------------------------------
# frames


@dataclass(frozen=True, eq=False)
class Frame:
    """Orthonormal coordinates for the union of several generator sets."""

    family: KernelFamily
    gens: np.ndarray
    basis: np.ndarray  # union-generator coefficients of the frame vectors
    energy: np.ndarray  # Gram of union generators
    sympl: np.ndarray | None

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def lift(self, V: Subspace) -> np.ndarray:
        """Coefficients of ``V``'s basis over the union generators."""
        pos = {tuple(r): i for i, r in enumerate(self.gens)}
        A = np.zeros((len(self.gens), V.dim))
        for i, row in enumerate(V.gens):
            A[pos[tuple(row)]] += V.coeffs[i]
        return A

    def coords(self, V: Subspace) -> np.ndarray:
        return self.basis.T @ self.energy @ self.lift(V)

    def symplectic_matrix(self) -> np.ndarray:
        return self.basis.T @ self.sympl @ self.basis

    def subspace(self, Q: np.ndarray, label: str = "") -> Subspace:
        return Subspace(self.family, self.gens, self.basis @ Q, 0, label)


def frame(*spaces: Subspace, sympl: bool = False, tol: float = ORTH_TOL) -> Frame:
    family = spaces[0].family
    for V in spaces[1:]:
        if V.family is not family:
            raise AmbientMismatchError("subspaces belong to different ambient families")
    stacks = [V.gens for V in spaces if len(V.gens)]
    if stacks:
        gens = np.unique(np.concatenate(stacks), axis=0)
    else:
        gens = np.zeros((0, 1 + family.grid.d), np.int64)
    E, S = family.blocks(gens, gens, "ES" if sympl else "E")
    if len(gens):
        lam, U = linalg.eigh((E + E.T) / 2)
        keep = lam > tol * lam.max() if lam.max() > 0 else np.zeros(len(lam), bool)
        basis = U[:, keep] / np.sqrt(lam[keep])
    else:
        basis = np.zeros((0, 0))
    return Frame(family, gens, basis, E, S)


def orth(Q: np.ndarray, tol: float = SVD_TOL) -> np.ndarray:
    """Orthonormal columns spanning ``range(Q)`` (relative rank threshold)."""
    if Q.size == 0:
        return Q.reshape(Q.shape[0], 0)
    U, s, _ = linalg.svd(Q, full_matrices=False)
    return U[:, s > tol * s.max()] if s.max() > 0 else U[:, :0]


def null_space(A: np.ndarray, n: int, tol: float = SVD_TOL) -> np.ndarray:
    """Right null space of ``A`` (``n`` columns), threshold relative to ``sigma_max``."""
    if A.size == 0 or A.shape[0] == 0:
        return np.eye(n)
    _, s, vt = linalg.svd(A, full_matrices=True)
    smax = s.max() if s.size else 0.0
    rank = int((s > tol * smax).sum()) if smax > 0 else 0
    return vt[rank:].T


def residual(Q: np.ndarray, P: np.ndarray) -> float:
    """``||Q - P P^T Q||_2`` for orthonormal ``P``; 0 when ``Q`` is empty."""
    if Q.shape[1] == 0:
        return 0.0
    R = Q - P @ (P.T @ Q) if P.shape[1] else Q
    return float(linalg.norm(R, 2))


def coord_gap(Qv: np.ndarray, Qw: np.ndarray) -> float:
    """Symmetric projection gap between two orthonormal coordinate blocks."""
    return max(residual(Qv, Qw), residual(Qw, Qv))


def gap(V: Subspace, W: Subspace) -> float:
    F = frame(V, W)
    return coord_gap(orth(F.coords(V)), orth(F.coords(W)))


def containment_residual(V: Subspace, W: Subspace) -> float:
    """``||(1 - P_W) P_V||``: zero iff ``V`` lies in ``W``."""
    F = frame(V, W)
    return residual(orth(F.coords(V)), orth(F.coords(W)))


def complement(V: Subspace, W: Subspace, tol: float = SVD_TOL, check: float = CONTAINMENT_TOL) -> Subspace:
    """Symplectic complement of ``V`` inside ``W``."""
    F = frame(V, W, sympl=True)
    Qw = orth(F.coords(W))
    Qv = orth(F.coords(V))
    res = residual(Qv, Qw)
    if res > check:
        raise ContainmentError(f"V is not contained in the ambient (residual {res:.3e})")
    Sw = Qw.T @ F.symplectic_matrix() @ Qw
    Yv = Qw.T @ Qv
    Nc = null_space(Yv.T @ Sw, Sw.shape[0], tol)
    return F.subspace(Qw @ Nc, label=f"complement({V.label})")


def relative_duality(B: Subspace, Bp: Subspace, M: Subspace, tol: float = SVD_TOL) -> dict:
    """Forward and dual gaps for ``B``, ``Bp`` inside ``M``.

    ``gap_forward = gap(Bp^c, B)`` and ``gap_dual = gap(B^c, Bp)`` with
    complements taken in ``M``.  Vectors in the radical of ``sigma``
    restricted to ``M`` lie in every complement, so both sides are compared
    after projecting that radical out; its dimension is reported.
    """
    F = frame(B, Bp, M, sympl=True)
    Qm = orth(F.coords(M))
    Yb = Qm.T @ orth(F.coords(B))
    Ybp = Qm.T @ orth(F.coords(Bp))
    res = max(residual(orth(F.coords(B)), Qm), residual(orth(F.coords(Bp)), Qm))
    if res > CONTAINMENT_TOL:
        raise ContainmentError(f"local subspace not contained in the ambient (residual {res:.3e})")
    Sm = Qm.T @ F.symplectic_matrix() @ Qm
    n = Sm.shape[0]
    R = null_space(Sm, n, tol)
    P = np.eye(n) - R @ R.T
    comp_bp = null_space(Ybp.T @ Sm, n, tol)
    comp_b = null_space(Yb.T @ Sm, n, tol)
    q = lambda X: orth(P @ X)
    fwd = coord_gap(q(comp_bp), q(Yb))
    dual = coord_gap(q(comp_b), q(Ybp))
    return {
        "gap_forward": fwd,
        "gap_dual": dual,
        "dim_ambient": n,
        "dim_B": int(Yb.shape[1]),
        "dim_Bprime": int(Ybp.shape[1]),
        "dim_complement_Bprime": int(comp_bp.shape[1]),
        "dim_complement_B": int(comp_b.shape[1]),
        "radical_dim": int(R.shape[1]),
        "containment_residual": res,
    }
