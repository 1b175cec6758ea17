"""Truncated bosonic Fock space over a few complex modes.

Conventions: ``a(f) = sum conj(f_i) a_i`` is antilinear in ``f``,
``Phi(f) = a(f) + a(f)^dagger`` and ``W(f) = exp(i Phi(f))``.  Then

    <Omega, Phi(f) Phi(g) Omega> = <f, g> = (f, g)_R + i sigma(f, g),
    [Phi(f), Phi(g)] = 2 i sigma(f, g),
    W(f) W(g) = exp(-i sigma(f, g)) W(f + g),

with ``sigma(f, g) = Im <f, g>``.  The basis holds all occupation vectors
with total occupation at most ``cutoff``; comparisons are made on the low
block of states with total occupation at most ``cutoff // 2``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import PreconditionError, ResourceBudgetError

FIELD_NORM_CAP = 4.0
MAX_COMMUTANT_MODES = 2
MAX_COMMUTANT_CUTOFF = 10


def _vec(f, n: int) -> np.ndarray:
    f = np.asarray(f, dtype=complex).reshape(-1)
    if f.shape != (n,):
        raise ValueError(f"one-particle vector must have {n} components")
    return f


def inner(f, g) -> complex:
    return complex(np.vdot(f, g))


def sigma(f, g) -> float:
    return float(np.imag(np.vdot(f, g)))


@dataclass(frozen=True, eq=False)
class FockContext:
    n_modes: int
    cutoff: int
    norm_cap: float = FIELD_NORM_CAP
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.n_modes < 1 or self.cutoff < 1:
            raise ValueError("need at least one mode and cutoff >= 1")

    @property
    def states(self) -> list[tuple[int, ...]]:
        if "states" not in self._cache:
            n, K = self.n_modes, self.cutoff
            self._cache["states"] = [
                s for tot in range(K + 1) for s in itertools.product(range(tot + 1), repeat=n) if sum(s) == tot
            ]
        return self._cache["states"]

    @property
    def dim(self) -> int:
        return math.comb(self.n_modes + self.cutoff, self.n_modes)

    @property
    def occupation(self) -> np.ndarray:
        return np.array([sum(s) for s in self.states])

    def low_block(self, level: int | None = None) -> np.ndarray:
        level = self.cutoff // 2 if level is None else level
        return self.occupation <= level

    @property
    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    @property
    def annihilators(self) -> list[np.ndarray]:
        if "a" not in self._cache:
            index = {s: k for k, s in enumerate(self.states)}
            ops = []
            for i in range(self.n_modes):
                a = np.zeros((self.dim, self.dim))
                for s, k in index.items():
                    if s[i]:
                        t = list(s)
                        t[i] -= 1
                        a[index[tuple(t)], k] = math.sqrt(s[i])
                ops.append(a)
            self._cache["a"] = ops
        return self._cache["a"]

    def annihilation(self, f) -> np.ndarray:
        f = _vec(f, self.n_modes)
        return sum(np.conj(fi) * a for fi, a in zip(f, self.annihilators))


def field_operator(ctx: FockContext, f) -> np.ndarray:
    f = _vec(f, ctx.n_modes)
    if np.linalg.norm(f) > ctx.norm_cap:
        raise PreconditionError(f"|f| exceeds the truncation cap {ctx.norm_cap}")
    am = ctx.annihilation(f)
    return am + am.conj().T


def weyl(ctx: FockContext, f) -> np.ndarray:
    return linalg.expm(1j * field_operator(ctx, f))


def _block_norm(ctx: FockContext, X: np.ndarray) -> float:
    return float(np.linalg.norm(X[:, ctx.low_block()], 2))


def vacuum_expectation(ctx: FockContext, X: np.ndarray) -> complex:
    return complex(X[0, 0])


def weyl_relation_residual(ctx: FockContext, f, g) -> float:
    """``||(W(f) W(g) - exp(-i sigma) W(f + g)) P_low||``."""
    f, g = _vec(f, ctx.n_modes), _vec(g, ctx.n_modes)
    lhs = weyl(ctx, f) @ weyl(ctx, g)
    rhs = np.exp(-1j * sigma(f, g)) * weyl(ctx, f + g)
    return _block_norm(ctx, lhs - rhs)


def unitarity_residual(ctx: FockContext, f) -> float:
    W = weyl(ctx, f)
    return float(np.linalg.norm(W.conj().T @ W - np.eye(ctx.dim), 2))


def commutation_vs_symplectic(ctx: FockContext, f, g) -> dict:
    """Measured ``[W(f), W(g)]`` against ``(exp(-2 i sigma) - 1) W(g) W(f)`` on the low block.

    ``analytic_norm = 2 |sin sigma|`` is the norm the Weyl relations predict
    for the commutator of two unitaries; ``mismatch`` is the operator-level
    difference, which carries the truncation error.
    """
    f, g = _vec(f, ctx.n_modes), _vec(g, ctx.n_modes)
    Wf, Wg = weyl(ctx, f), weyl(ctx, g)
    s = sigma(f, g)
    comm = Wf @ Wg - Wg @ Wf
    pred = (np.exp(-2j * s) - 1) * (Wg @ Wf)
    return {
        "sigma": s,
        "commutator_norm": _block_norm(ctx, comm),
        "predicted_norm": _block_norm(ctx, pred),
        "analytic_norm": 2 * abs(math.sin(s)),
        "analytic_difference": abs(_block_norm(ctx, comm) - 2 * abs(math.sin(s))),
        "norm_difference": abs(_block_norm(ctx, comm) - _block_norm(ctx, pred)),
        "mismatch": _block_norm(ctx, comm - pred),
        "block_size": int(ctx.low_block().sum()),
        "commutes_at_weyl_level": bool(abs(np.sin(s)) < 1e-12),
    }


@dataclass(frozen=True, eq=False)
class RealSubspace:
    """Real span of vectors in ``C^n``."""

    vectors: tuple

    def __post_init__(self):
        vecs = tuple(np.asarray(v, dtype=complex).reshape(-1) for v in self.vectors)
        object.__setattr__(self, "vectors", vecs)

    @property
    def n(self) -> int:
        return len(self.vectors[0]) if self.vectors else 0

    def real_matrix(self, n: int | None = None) -> np.ndarray:
        n = self.n if n is None else n
        if not self.vectors:
            return np.zeros((2 * n, 0))
        return np.column_stack([np.concatenate([v.real, v.imag]) for v in self.vectors])

    def basis(self, n: int | None = None, tol: float = 1e-12) -> np.ndarray:
        M = self.real_matrix(n)
        if M.shape[1] == 0:
            return M
        U, s, _ = linalg.svd(M, full_matrices=False)
        return U[:, s > tol * s.max()]


def _symplectic_real(n: int) -> np.ndarray:
    """``sigma(f, g) = x^T Om y`` for real coordinates ``(Re, Im)``."""
    z, one = np.zeros((n, n)), np.eye(n)
    return np.block([[z, one], [-one, z]])


def _complex(x: np.ndarray, n: int) -> np.ndarray:
    return x[:n] + 1j * x[n:]


def relative_complement(V: RealSubspace, H: RealSubspace, n: int) -> np.ndarray:
    """Real basis of ``{h in H : sigma(h, v) = 0 for v in V}``."""
    Hb = H.basis(n)
    Vb = V.basis(n)
    if Vb.shape[1] == 0:
        return Hb
    return Hb @ linalg.null_space(Vb.T @ _symplectic_real(n) @ Hb)


def relative_commutant_dims(
    ctx: FockContext,
    V: RealSubspace,
    H: RealSubspace,
    scale: float = 0.5,
    rank_tol: float = 1e-8,
    generator_scale: float = 1.0,
) -> dict:
    """Compare commutant-side and complement-side dimensions on a Weyl sample set.

    Samples are ``h = B s`` with ``s`` on the grid ``{-scale, 0, scale}^r``
    in a basis ``B`` of ``H`` whose leading columns span the relative
    symplectic complement ``V^c``.  The commutant side counts operators in
    the span of the sampled ``W(h)`` that commute (on the low block) with
    ``W(v)`` for every basis vector ``v`` of ``V``; the complement side is
    the rank of the sampled ``W(h)`` with ``h`` in ``V^c``.  Both are
    heuristics for the truncated algebra, not theorems about it: with two
    modes the total-occupation cutoff breaks exact commutation between
    different modes, and the reported ``tail`` singular values show how
    far the near-null directions are from zero.
    """
    n = ctx.n_modes
    if n > MAX_COMMUTANT_MODES or ctx.cutoff > MAX_COMMUTANT_CUTOFF:
        raise ResourceBudgetError("commutant checks are capped at 2 modes and cutoff 10")
    Hb = H.basis(n)
    Vb = V.basis(n)
    if Vb.shape[1]:
        resid = np.linalg.norm(Vb - Hb @ (Hb.T @ Vb))
        if resid > 1e-10:
            raise PreconditionError("V is not contained in H")
    Vc = relative_complement(V, H, n)
    k = Vc.shape[1]
    if k:
        rest = Hb @ linalg.null_space(Vc.T @ Hb)
    else:
        rest = Hb
    B = np.column_stack([Vc, rest])
    r = B.shape[1]
    points = list(itertools.product((-scale, 0.0, scale), repeat=r))
    low = ctx.low_block()
    ops = [weyl(ctx, _complex(B @ np.array(p), n)) for p in points]
    gens = [weyl(ctx, _complex(generator_scale * Vb[:, j], n)) for j in range(Vb.shape[1])]
    vec = lambda X: X[:, low].ravel()
    Wmat = np.column_stack([vec(X) for X in ops])

    def rank(M):
        if M.size == 0:
            return 0, np.array([])
        s = linalg.svd(M, compute_uv=False)
        return int((s > rank_tol * s[0]).sum()) if s[0] > 0 else 0, s

    if gens:
        A = np.column_stack([np.concatenate([vec(X @ Y - Y @ X) for Y in gens]) for X in ops])
        sA = linalg.svd(A, compute_uv=False)
        null = linalg.null_space(A, rcond=rank_tol)
        commutant_dim, _ = rank(Wmat @ null)
        kept = sA[sA > rank_tol * sA[0]]
        cond = float(sA[0] / kept[-1])
        tail = [float(x) for x in (kept[-4:] / sA[0])]
    else:
        commutant_dim, _ = rank(Wmat)
        cond, tail = 1.0, []
    in_vc = [all(abs(x) == 0 for x in p[k:]) for p in points]
    complement_dim, _ = rank(Wmat[:, in_vc])
    return {
        "n_modes": n,
        "cutoff": ctx.cutoff,
        "block_size": int(low.sum()),
        "dim_H": r,
        "dim_V": int(Vb.shape[1]),
        "dim_Vc": k,
        "samples": len(points),
        "commutant_dim": commutant_dim,
        "complement_dim": complement_dim,
        "difference": commutant_dim - complement_dim,
        "constraint_condition": cond,
        "tail": tail,
        "heuristic": True,
    }
