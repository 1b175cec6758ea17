"""FFT-backed operators on periodic lattices.

Conventions
-----------
Sites are stored in FFT order: index ``j`` along an axis sits at
``a*j`` for ``j < N/2`` and at ``a*(j-N)`` otherwise, so the origin is
index 0.  Position-space pairings use the quadrature weight ``a**d``::

    <f, g> = a**d * sum(f * g) = (a**d / N**d) * sum(conj(fft f) * fft g)

and every Fourier multiplier is applied with numpy's unnormalized
``fftn``/``ifftn`` pair.  Fields are plain real ``ndarray`` objects of
shape ``grid.shape``; complex arrays only appear as Fourier
intermediates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special
from scipy.sparse import linalg as sparse_linalg

from .errors import (
    ResourceBudgetError,
    UnresolvableRadiusError,
    WraparoundError,
    ZeroModeError,
)

# Default cap for explicitly assembled matrices (bytes).
DEFAULT_MEMORY_BUDGET = 2 * 1024**3
ZERO_MODE_RTOL = 1e-10


@dataclass(frozen=True)
class LatticeGrid:
    """Periodic ``d``-dimensional lattice with ``N`` sites per axis."""

    d: int
    N: int
    a: float = 1.0
    m: float = 0.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.N < 4 or self.N % 2:
            raise ValueError("N must be even and >= 4")
        if not self.a > 0:
            raise ValueError("lattice spacing must be positive")
        if self.m < 0:
            raise ValueError("mass must be non-negative")

    @property
    def L(self) -> float:
        return self.N * self.a

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def n_sites(self) -> int:
        return self.N**self.d

    @property
    def massless(self) -> bool:
        return self.m == 0

    @property
    def cell_volume(self) -> float:
        return self.a**self.d

    @property
    def fourier_weight(self) -> float:
        """Factor turning ``sum conj(F) G`` into the quadrature pairing."""
        return self.a**self.d / self.n_sites

    @cached_property
    def offsets1d(self) -> np.ndarray:
        j = np.arange(self.N)
        return np.where(j < self.N // 2, j, j - self.N)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        x1 = self.a * self.offsets1d
        return tuple(np.meshgrid(*([x1] * self.d), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        """Distance of each site to the origin (torus minimum image)."""
        return np.sqrt(sum(x**2 for x in self.coords))

    @cached_property
    def momenta(self) -> tuple[np.ndarray, ...]:
        p1 = 2 * np.pi * np.fft.fftfreq(self.N, d=self.a)
        return tuple(np.meshgrid(*([p1] * self.d), indexing="ij"))

    @cached_property
    def pabs(self) -> np.ndarray:
        return np.sqrt(sum(p**2 for p in self.momenta))

    @cached_property
    def omega(self) -> np.ndarray:
        return np.sqrt(self.pabs**2 + self.m**2)

    @property
    def zero_mode(self) -> tuple[int, ...]:
        return (0,) * self.d

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(self.cell_volume * np.sum(f * g))

    def delta(self, site: Sequence[int] | None = None) -> np.ndarray:
        """Lattice delta ``1/a^d`` at ``site`` (default the origin)."""
        out = np.zeros(self.shape)
        out[tuple(site) if site is not None else self.zero_mode] = 1.0 / self.cell_volume
        return out

    def site_position(self, site: Sequence[int]) -> np.ndarray:
        j = np.asarray(site) % self.N
        return self.a * np.where(j < self.N // 2, j, j - self.N)

    def to_dict(self) -> dict:
        return {"d": self.d, "N": self.N, "a": self.a, "m": self.m}


@dataclass(frozen=True)
class NormEstimate:
    value: float
    converged: bool
    iterations: int

    def __float__(self):
        return self.value


# ---------------------------------------------------------------------------
# multipliers

def _has_zero_mode(grid: LatticeGrid, fhat: np.ndarray) -> bool:
    z = fhat[(Ellipsis,) + grid.zero_mode]
    scale = max(np.max(np.abs(fhat)), 1e-300)
    return bool(np.any(np.abs(z) > ZERO_MODE_RTOL * scale))


def power_of(values: np.ndarray, s: float) -> np.ndarray:
    """``values**s`` with zero entries mapped to zero (projected modes)."""
    out = np.zeros_like(values, dtype=float)
    nz = values > 0
    out[nz] = values[nz] ** s
    return out


def apply_multiplier(f: np.ndarray, mult: np.ndarray, d: int) -> np.ndarray:
    axes = tuple(range(f.ndim - d, f.ndim))
    return np.real(np.fft.ifftn(np.fft.fftn(f, axes=axes) * mult, axes=axes))


def apply_omega_power(grid: LatticeGrid, f: np.ndarray, s: float) -> np.ndarray:
    """Fourier multiplier ``omega(p)**s``.

    For ``m = 0`` and ``s < 0`` the input must have no zero mode; the
    zero mode is mapped to zero for every ``s != 0`` in the massless case.
    """
    if s == 0:
        return np.array(f, dtype=float, copy=True)
    axes = tuple(range(f.ndim - grid.d, f.ndim))
    fhat = np.fft.fftn(f, axes=axes)
    if grid.massless and s < 0 and _has_zero_mode(grid, fhat):
        raise ZeroModeError("massless negative power needs a zero-mean field")
    return np.real(np.fft.ifftn(fhat * power_of(grid.omega, s), axes=axes))


def norm_pm(grid: LatticeGrid, f: np.ndarray, sign: int) -> float:
    """Free-field norm with weight ``|p|**sign`` (sign = +1 or -1).

    ``norm**2 = (a^d/N^d) * sum_k |fft(f)_k|**2 * |p_k|**sign``; the
    ``p = 0`` term is absent for both signs, and ``sign = -1`` requires a
    zero-mean input.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    fhat = np.fft.fftn(f)
    if sign < 0 and _has_zero_mode(grid, fhat):
        raise ZeroModeError("norm_minus needs a zero-mean field")
    w = power_of(grid.pabs, sign)
    return float(np.sqrt(grid.fourier_weight * np.sum(np.abs(fhat) ** 2 * w)))


def project_zero_mean(f: np.ndarray, d: int | None = None) -> np.ndarray:
    d = f.ndim if d is None else d
    axes = tuple(range(f.ndim - d, f.ndim))
    return f - f.mean(axis=axes, keepdims=True)


# ---------------------------------------------------------------------------
# mollifiers and convolution

def bump(r: np.ndarray) -> np.ndarray:
    """``exp(-1/(1-r^2))`` on ``r < 1``, exactly zero elsewhere."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def mollifier(grid: LatticeGrid, n: int) -> np.ndarray:
    """Lattice sampling of ``rho_n(x) = n^d rho(n x)`` with unit lattice mass."""
    if n <= 0:
        raise ValueError("n must be positive")
    if 1.0 / n < 2 * grid.a:
        raise UnresolvableRadiusError(f"radius 1/{n} is below two lattice spacings")
    rho = bump(n * grid.radius)
    return rho / (grid.cell_volume * rho.sum())


def convolve(grid: LatticeGrid, f: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Periodic convolution ``a^d * sum_y f(x-y) k(y)`` via FFT."""
    if f.shape[-grid.d:] != grid.shape or k.shape != grid.shape:
        raise ValueError("fields do not live on this grid")
    axes = tuple(range(f.ndim - grid.d, f.ndim))
    out = np.fft.ifftn(np.fft.fftn(f, axes=axes) * np.fft.fftn(k), axes=axes)
    return np.real(out) * grid.cell_volume


def support(f: np.ndarray, rtol: float = 1e-12, d: int | None = None) -> np.ndarray:
    """Boolean site mask where ``|f|`` exceeds ``rtol`` times its maximum.

    Leading component axes (vector fields) are reduced with ``any``.
    """
    f = np.abs(np.asarray(f))
    scale = f.max() if f.size else 0.0
    if scale == 0:
        return np.zeros(f.shape[f.ndim - (d or f.ndim):], dtype=bool)
    mask = f > rtol * scale
    if d is not None and f.ndim > d:
        mask = mask.reshape((-1,) + f.shape[-d:]).any(axis=0)
    return mask


def ball_mask(grid: LatticeGrid, radius: float, center=None, closed: bool = True) -> np.ndarray:
    r = grid.radius if center is None else site_distance(grid, center)
    return r <= radius if closed else r < radius


def site_distance(grid: LatticeGrid, center) -> np.ndarray:
    center = np.asarray(center, dtype=float)
    dx = [grid.coords[i] - center[i] for i in range(grid.d)]
    dx = [x - grid.L * np.round(x / grid.L) for x in dx]
    return np.sqrt(sum(x**2 for x in dx))


def dilate_mask(grid: LatticeGrid, mask: np.ndarray, radius: float) -> np.ndarray:
    """Sites within torus distance ``radius`` of ``mask``."""
    stencil = ball_mask(grid, radius)
    hits = np.real(np.fft.ifftn(np.fft.fftn(mask.astype(float)) * np.fft.fftn(stencil)))
    return hits > 0.5


def ring_inflate(mask: np.ndarray, rings: int = 1) -> np.ndarray:
    """Add ``rings`` layers of nearest neighbours (periodic)."""
    out = mask.copy()
    for _ in range(rings):
        grown = out.copy()
        for ax in range(mask.ndim):
            grown |= np.roll(out, 1, axis=ax) | np.roll(out, -1, axis=ax)
        out = grown
    return out


# ---------------------------------------------------------------------------
# operator norms

def power_iteration(
    apply: Callable[[np.ndarray], np.ndarray],
    apply_adjoint: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    iters: int = 200,
    rtol: float = 1e-10,
) -> NormEstimate:
    """Largest singular value of ``apply`` by power iteration on A^T A."""
    x = x0 / np.linalg.norm(x0)
    est = 0.0
    for it in range(1, iters + 1):
        y = apply_adjoint(apply(x))
        ny = np.linalg.norm(y)
        if ny == 0:
            return NormEstimate(0.0, True, it)
        new = math.sqrt(ny)
        x = y / ny
        if it > 1 and abs(new - est) <= rtol * new:
            return NormEstimate(new, True, it)
        est = new
    return NormEstimate(est, False, iters)


def lanczos_norm(
    apply: Callable[[np.ndarray], np.ndarray],
    apply_adjoint: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    rtol: float = 1e-10,
) -> NormEstimate:
    """Largest singular value via ARPACK on the normal operator."""
    shape = x0.shape
    n = x0.size
    calls = [0]

    def mv(v):
        calls[0] += 1
        return apply_adjoint(apply(v.reshape(shape))).ravel()

    op = sparse_linalg.LinearOperator((n, n), matvec=mv, dtype=float)
    try:
        val = sparse_linalg.eigsh(op, k=1, which="LA", v0=x0.ravel(), tol=rtol,
                                  return_eigenvectors=False)[0]
        return NormEstimate(math.sqrt(max(val, 0.0)), True, calls[0])
    except sparse_linalg.ArpackNoConvergence as exc:
        vals = exc.eigenvalues
        best = math.sqrt(max(vals.max(), 0.0)) if len(vals) else 0.0
        return NormEstimate(best, False, calls[0])


def _random_smooth(grid: LatticeGrid, rng: np.random.Generator, zero_mean: bool) -> np.ndarray:
    x = rng.standard_normal(grid.shape)
    x = apply_multiplier(x, np.exp(-((grid.pabs * grid.a) ** 2)), grid.d)
    return project_zero_mean(x) if zero_mean else x


def mult_operator_norm_estimate(
    grid: LatticeGrid,
    chi: np.ndarray,
    sign: int = 1,
    *,
    dispersion: np.ndarray | None = None,
    iters: int = 200,
    rtol: float = 1e-10,
    seed: int = 0,
) -> NormEstimate:
    """L2 operator norm of ``omega^{s/2} M_chi omega^{-s/2}``, ``s = sign``.

    ``dispersion`` overrides ``grid.omega``; entries equal to zero are
    treated as projected modes (zero-mean sector).
    """
    w = grid.omega if dispersion is None else dispersion
    up, down = power_of(w, 0.5 * sign), power_of(w, -0.5 * sign)
    projected = bool(np.any(w == 0))

    def fwd(x):
        return apply_multiplier(chi * apply_multiplier(x, down, grid.d), up, grid.d)

    def adj(y):
        return apply_multiplier(chi * apply_multiplier(y, up, grid.d), down, grid.d)

    rng = np.random.default_rng(seed)
    return power_iteration(fwd, adj, _random_smooth(grid, rng, projected), iters, rtol)


def _shifted_index(grid: LatticeGrid, rows: np.ndarray, cols: np.ndarray) -> tuple:
    """Index tuple into an FFT array for ``k_row - k_col`` (mod N)."""
    r = np.array(np.unravel_index(rows, grid.shape))
    c = np.array(np.unravel_index(cols, grid.shape))
    diff = (r[:, :, None] - c[:, None, :]) % grid.N
    return tuple(diff[i] for i in range(grid.d))


def _kernel_block(grid, chi_hat, w, sign, rows, cols):
    factor = power_of(w.ravel()[rows], 0.5 * sign)[:, None] * power_of(
        w.ravel()[cols], -0.5 * sign
    )[None, :] - 1.0
    return factor * chi_hat[_shifted_index(grid, rows, cols)] / grid.n_sites


def _sector_modes(w: np.ndarray) -> np.ndarray:
    """Flat mode indices in the admissible sector (zero modes of w excluded)."""
    return np.flatnonzero(w.ravel() > 0)


def infrared_hs_norm(
    grid: LatticeGrid,
    chi: np.ndarray,
    sign: int = 1,
    *,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> float:
    """Frobenius norm of ``(omega^{s/2} T omega^{-s/2} - T) P_[0,1]``.

    Rows run over all admissible modes and columns over modes with
    ``omega <= 1``; matrix entries use unitary DFT coordinates, in which
    multiplication by ``chi`` has kernel ``fft(chi)(p - q) / N^d``.
    """
    w = grid.omega
    modes = _sector_modes(w)
    cols = modes[w.ravel()[modes] <= 1.0]
    need = modes.size * cols.size * 16
    if need > memory_budget:
        raise ResourceBudgetError(f"HS matrix needs {need} bytes (> {memory_budget})")
    chi_hat = np.fft.fftn(chi)
    total = 0.0
    for start in range(0, modes.size, 2048):
        rows = modes[start:start + 2048]
        total += float(np.sum(np.abs(_kernel_block(grid, chi_hat, w, sign, rows, cols)) ** 2))
    return math.sqrt(total)


def schur_bound_check(
    grid: LatticeGrid,
    chi: np.ndarray,
    sign: int = 1,
    *,
    iters: int = 200,
    rtol: float = 1e-10,
    seed: int = 0,
    chunk: int = 512,
) -> dict:
    """Schur test for the ultraviolet block ``P_(1,inf) (. - T) P_(1,inf)``."""
    w = grid.omega
    uv = np.flatnonzero(w.ravel() > 1.0)
    chi_hat = np.fft.fftn(chi)
    row_sums = np.zeros(uv.size)
    col_sums = np.zeros(uv.size)
    for start in range(0, uv.size, chunk):
        rows = uv[start:start + chunk]
        blk = np.abs(_kernel_block(grid, chi_hat, w, sign, rows, uv))
        row_sums[start:start + chunk] = blk.sum(axis=1)
        col_sums += blk.sum(axis=0)
    row_sup = float(row_sums.max()) if uv.size else 0.0
    col_sup = float(col_sums.max()) if uv.size else 0.0
    bound = math.sqrt(row_sup * col_sup)

    proj = (w > 1.0).astype(float)
    up, down = power_of(w, 0.5 * sign), power_of(w, -0.5 * sign)

    def fwd(x):
        xh = apply_multiplier(x, proj, grid.d)
        y = apply_multiplier(chi * apply_multiplier(xh, down, grid.d), up, grid.d) - chi * xh
        return apply_multiplier(y, proj, grid.d)

    def adj(y):
        yh = apply_multiplier(y, proj, grid.d)
        x = apply_multiplier(chi * apply_multiplier(yh, up, grid.d), down, grid.d) - chi * yh
        return apply_multiplier(x, proj, grid.d)

    rng = np.random.default_rng(seed)
    est = power_iteration(fwd, adj, rng.standard_normal(grid.shape), iters, rtol)
    return {
        "row_sup": row_sup,
        "col_sup": col_sup,
        "bound": bound,
        "block_norm": est.value,
        "block_norm_converged": est.converged,
        "uv_modes": int(uv.size),
        "dominates": bool(est.value <= bound * (1 + 1e-9) + 1e-14),
    }


# ---------------------------------------------------------------------------
# resampling: dilations and diffeomorphisms

def _axis_eval(grid: LatticeGrid, x: np.ndarray) -> np.ndarray:
    """Rows ``exp(i p_k x_n)`` for points ``x`` along one axis."""
    p1 = 2 * np.pi * np.fft.fftfreq(grid.N, d=grid.a)
    return np.exp(1j * np.outer(x, p1))


def interpolate_scaled(grid: LatticeGrid, f: np.ndarray, scale: float) -> np.ndarray:
    """Band-limited interpolant of ``f`` evaluated at ``scale * x`` on every site."""
    E = _axis_eval(grid, scale * grid.a * grid.offsets1d)
    F = np.fft.fftn(f) / grid.n_sites
    for ax in range(grid.d):
        F = np.moveaxis(np.tensordot(E, F, axes=([1], [ax])), 0, ax)
    return np.real(F)


def _support_radius(grid: LatticeGrid, f: np.ndarray) -> float:
    s = support(f, 1e-12)
    return float(grid.radius[s].max()) if s.any() else 0.0


def dilation(
    grid: LatticeGrid,
    pair: tuple[np.ndarray, np.ndarray],
    lam: float,
    massless: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Dilation of Cauchy data, ``x -> lam * x``.

    The field component gets ``lam**((d-1)/2)`` and the time-derivative
    component ``lam**((d+1)/2)``; these are the weights induced by the
    space-time dilation ``phi(t, x) -> lam**((d-1)/2) phi(lam t, lam x)``
    and make the map unitary for ``m = 0``.  ``massless`` only selects the
    zero-mean projection of the inputs.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    f0, f1 = pair
    reach = max(_support_radius(grid, f0), _support_radius(grid, f1)) / lam
    if reach >= grid.L / 2 - grid.a:
        raise WraparoundError(f"dilated support radius {reach:.3g} reaches the torus boundary")
    d = grid.d
    g0 = lam ** ((d - 1) / 2) * interpolate_scaled(grid, f0, lam)
    g1 = lam ** ((d + 1) / 2) * interpolate_scaled(grid, f1, lam)
    if massless:
        g0, g1 = project_zero_mean(g0), project_zero_mean(g1)
    return g0, g1


def _smoothstep(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """C-infinity step 0 -> 1 on [0, 1] and its derivative."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        u = np.where(t > 0, np.exp(-1.0 / t), 0.0)
        v = np.where(t < 1, np.exp(-1.0 / (1.0 - t)), 0.0)
        du = np.where(t > 0, u / t**2, 0.0)
        dv = np.where(t < 1, -v / (1.0 - t) ** 2, 0.0)
    s = u / (u + v)
    ds = (du * v - u * dv) / (u + v) ** 2
    return s, ds


@dataclass(frozen=True)
class DiffeoSpec:
    """Radial contraction towards the mid-circle of an annulus.

    ``phi(x) = c + rhat * h(r)`` with ``h(r) = r + kappa*(r_mid - r)*beta(r)``,
    ``beta`` a smooth plateau equal to 1 on ``[r_in - w, r_out + w]`` and 0
    outside ``[r_in - 2w, r_out + 2w]``.  The parameter ``lam = 1 - kappa``
    equals 1 for the identity.  For ``kappa > 0`` points near both boundary
    spheres of the annulus ``r_in < r < r_out`` are pushed inwards, so a
    small neighbourhood of the annulus is mapped into it.
    """

    center: tuple[float, ...]
    r_in: float
    r_out: float
    width: float
    kappa: float

    @property
    def lam(self) -> float:
        return 1.0 - self.kappa

    @property
    def r_mid(self) -> float:
        return 0.5 * (self.r_in + self.r_out)

    @property
    def support_radius(self) -> float:
        return self.r_out + 2 * self.width

    def _beta(self, r):
        w = self.width
        s_lo, ds_lo = _smoothstep((r - (self.r_in - 2 * w)) / w)
        s_hi, ds_hi = _smoothstep(((self.r_out + 2 * w) - r) / w)
        return s_lo * s_hi, (ds_lo * s_hi - s_lo * ds_hi) / w

    def profile(self, r):
        """``h(r)`` and ``h'(r)``."""
        beta, dbeta = self._beta(r)
        k = self.kappa
        h = r + k * (self.r_mid - r) * beta
        dh = 1 + k * (-beta + (self.r_mid - r) * dbeta)
        return h, dh

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        c = np.asarray(self.center)
        y = x - c
        r = np.linalg.norm(y, axis=-1, keepdims=True)
        h, _ = self.profile(r)
        scale = np.divide(h, r, out=np.ones_like(r), where=r > 0)
        return c + y * scale

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = x - np.asarray(self.center)
        r = np.linalg.norm(y, axis=-1, keepdims=True)
        h, dh = self.profile(r)
        ratio = np.divide(h, r, out=np.ones_like(r), where=r > 0)
        rhat = np.divide(y, r, out=np.zeros_like(y), where=r > 0)
        eye = np.eye(x.shape[-1])
        outer = rhat[..., :, None] * rhat[..., None, :]
        return ratio[..., None] * eye + (dh - ratio)[..., None] * outer

    def _radial_sup(self, samples: int = 20001):
        r = np.linspace(max(self.r_in - 2 * self.width, 1e-12), self.support_radius, samples)
        h, dh = self.profile(r)
        disp = np.abs(h - r)
        b = np.maximum(np.abs(h / r - 1), np.abs(dh - 1))
        return float(disp.max()), float(b.max())

    @property
    def a_lambda(self) -> float:
        return self._radial_sup()[0]

    @property
    def b_lambda(self) -> float:
        return self._radial_sup()[1]

    @classmethod
    def with_b(cls, b: float, center, r_in: float, r_out: float, width: float) -> "DiffeoSpec":
        """Member of the family whose ``b_lambda`` equals ``b``."""
        if not 0 <= b < 1:
            raise ValueError("b must lie in [0, 1)")
        unit = cls(tuple(center), r_in, r_out, width, 1.0)
        return cls(tuple(center), r_in, r_out, width, b / unit.b_lambda)


def _diffeo_rows(grid: LatticeGrid, spec: DiffeoSpec):
    """Sites moved by ``spec`` and dense interpolation rows for them."""
    pts = np.stack([x.ravel() for x in grid.coords], axis=-1)
    c = np.asarray(spec.center)
    moved = np.flatnonzero(np.linalg.norm(pts - c, axis=-1) < spec.support_radius)
    target = spec(pts[moved])
    rows = None
    x1 = grid.a * grid.offsets1d
    for ax in range(grid.d):
        E = _axis_eval(grid, target[:, ax])
        # Dirichlet kernel along this axis: (1/N) sum_k exp(i p_k (y - x_j))
        D = E @ np.exp(-1j * np.outer(2 * np.pi * np.fft.fftfreq(grid.N, d=grid.a), x1)) / grid.N
        rows = D if rows is None else (rows[:, :, None] * D[:, None, :]).reshape(len(moved), -1)
    return moved, np.real(rows)


def diffeo_pullback(
    grid: LatticeGrid,
    pair: tuple[np.ndarray, np.ndarray],
    spec: DiffeoSpec,
) -> tuple[np.ndarray, np.ndarray]:
    """``f -> f o phi`` on both components by band-limited interpolation."""
    if spec.b_lambda >= 1:
        raise ValueError("b_lambda must be < 1")
    if spec.support_radius + np.max(np.abs(spec.center)) >= grid.L / 2:
        raise WraparoundError("diffeomorphism support leaves the fundamental domain")
    moved, R = _diffeo_rows(grid, spec)
    out = []
    for f in pair:
        g = np.array(f, dtype=float, copy=True).ravel()
        g[moved] = R @ f.ravel()
        out.append(g.reshape(grid.shape))
    return out[0], out[1]


def diffeo_operator_norm(
    grid: LatticeGrid,
    spec: DiffeoSpec,
    sign: int,
    *,
    iters: int = 200,
    rtol: float = 1e-10,
    seed: int = 0,
    method: str = "lanczos",
) -> NormEstimate:
    """Norm of the pullback on the ``|p|**sign``-weighted (massless) space.

    The top singular value sits in a cluster for small ``b``, where plain
    power iteration stalls; ``method="lanczos"`` (default) runs ARPACK on
    ``A^T A`` instead, ``method="power"`` keeps the plain iteration.
    """
    moved, R = _diffeo_rows(grid, spec)
    up, down = power_of(grid.pabs, 0.5 * sign), power_of(grid.pabs, -0.5 * sign)

    def D(f):
        g = f.ravel().copy()
        g[moved] = R @ f.ravel()
        return g.reshape(grid.shape)

    def Dt(g):
        flat = g.ravel()
        f = flat.copy()
        f[moved] = 0.0
        f += flat[moved] @ R
        return f.reshape(grid.shape)

    def fwd(x):
        return apply_multiplier(D(apply_multiplier(x, down, grid.d)), up, grid.d)

    def adj(y):
        return apply_multiplier(Dt(apply_multiplier(y, up, grid.d)), down, grid.d)

    rng = np.random.default_rng(seed)
    x0 = _random_smooth(grid, rng, True)
    if method == "power":
        return power_iteration(fwd, adj, x0, iters, rtol)
    return lanczos_norm(fwd, adj, x0, rtol)


def diffeo_bound(b: float, d: int, sign: int) -> float:
    """``(1-b)^(-2d) (1+b)^(d+sign)``, the bound on the squared norm."""
    return (1 - b) ** (-2 * d) * (1 + b) ** (d + sign)


# ---------------------------------------------------------------------------
# fractional Sobolev identity

def fractional_constant(d: int, s: float) -> float:
    """``A_s = int |exp(i z_1) - 1|^2 / |z|^(d+2s) dz`` by quadrature.

    Polar coordinates split this into a radial integral of
    ``2 (1 - cos t) t^(-1-2s)`` and an angular average of ``|u_1|^(2s)``.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    f = lambda t: 2 * (1 - np.cos(t)) * t ** (-1 - 2 * s)
    near = integrate.quad(f, 0, 1, limit=200, epsabs=1e-13, epsrel=1e-12)[0]
    far_plain = integrate.quad(lambda t: 2 * t ** (-1 - 2 * s), 1, np.inf, epsabs=1e-13)[0]
    far_cos = integrate.quad(
        lambda t: 2 * t ** (-1 - 2 * s), 1, np.inf, weight="cos", wvar=1.0
    )[0]
    radial = near + far_plain - far_cos
    if d == 1:
        return 2.0 * radial
    sphere = 2 * np.pi ** ((d - 1) / 2) / special.gamma((d - 1) / 2)
    angular = integrate.quad(
        lambda th: abs(np.cos(th)) ** (2 * s) * np.sin(th) ** (d - 2), 0, np.pi, limit=200
    )[0]
    return radial * sphere * angular


def periodized_kernel(grid: LatticeGrid, power: float, images: int) -> np.ndarray:
    """``sum_n |x + nL|^(-power)`` over ``|n_i| <= images``, zero at x = 0."""
    K = np.zeros(grid.shape)
    for shift in np.ndindex(*([2 * images + 1] * grid.d)):
        r2 = sum((x + (s - images) * grid.L) ** 2 for x, s in zip(grid.coords, shift))
        with np.errstate(divide="ignore"):
            K += np.where(r2 > 0, r2 ** (-power / 2), 0.0)
    return K


def fractional_identity(
    grid: LatticeGrid, f: np.ndarray, s: float, *, images: int = 3
) -> tuple[float, float, float]:
    """Double-sum seminorm, its Fourier form and ``A_s``.

    ``lhs = a^(2d) sum_{x != y} |f(x) - f(y)|^2 K(x - y)`` where ``K`` is
    the kernel ``|z|^(-d-2s)`` summed over periodic images up to
    ``images`` periods away (``images = 0`` is the minimum-image metric).
    ``rhs = A_s (a^d/N^d) sum_k |fft(f)_k|^2 |p_k|^(2s)``.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    A = fractional_constant(grid.d, s)
    F = np.fft.fftn(f)
    corr = np.real(np.fft.ifftn(np.abs(F) ** 2))  # sum_y f(y+z) f(y)
    K = periodized_kernel(grid, grid.d + 2 * s, images)
    lhs = grid.a ** (2 * grid.d) * float(np.sum(K * 2 * (corr[grid.zero_mode] - corr)))
    rhs = A * grid.fourier_weight * float(np.sum(np.abs(F) ** 2 * grid.pabs ** (2 * s)))
    return lhs, rhs, A
