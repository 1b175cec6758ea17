"""Causal geometry of Minkowski space with signature (+, -, ..., -).

Points are arrays whose last axis holds ``(t, x_1, ..., x_d)``.  Regions
are open sets given by exact predicates.  Spatial bases are described by
signed distance functions (negative inside); a point lies in the diamond
over a flat base ``B`` at time ``t0`` exactly when the spatial ball of
radius ``|t - t0|`` around it fits inside ``B``, i.e. ``sd_B(x) < -|t - t0|``.

Hyperboloid surfaces are handled through the conformal map that sends
the forward cone onto a double cone and the hyperboloid ``x^2 = c^2`` onto
the flat base of that double cone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import ndimage

from .errors import GeometryError, SectorError

TAU_GEOM = 1e-12


def _pts(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def minkowski_square(x) -> np.ndarray:
    x = _pts(x)
    return x[..., 0] ** 2 - np.sum(x[..., 1:] ** 2, axis=-1)


def _scale(*xs) -> np.ndarray:
    s = 1.0
    for x in xs:
        s = np.maximum(s, np.max(np.abs(_pts(x)), axis=-1))
    return s


class IntervalKind(enum.Enum):
    TIMELIKE = "timelike"
    LIGHTLIKE = "lightlike"
    SPACELIKE = "spacelike"


def interval_kind(x, y, tol: float = TAU_GEOM) -> IntervalKind:
    x, y = _pts(x), _pts(y)
    if x.shape != y.shape:
        raise GeometryError(f"dimension mismatch: {x.shape} vs {y.shape}")
    s = float(minkowski_square(x - y))
    if abs(s) <= tol * float(_scale(x, y)) ** 2:
        return IntervalKind.LIGHTLIKE
    return IntervalKind.TIMELIKE if s > 0 else IntervalKind.SPACELIKE


def ray_inversion(x, tol: float = TAU_GEOM) -> np.ndarray:
    """``x -> -x / x^2``; an involution away from the light cone."""
    x = _pts(x)
    sq = minkowski_square(x)
    if np.any(np.abs(sq) <= tol * np.sum(x**2, axis=-1)):
        raise GeometryError("ray inversion of a null vector")
    return -x / sq[..., None]


# ---------------------------------------------------------------------------
# spatial bases


class Base:
    def sdf(self, xs: np.ndarray) -> np.ndarray:
        raise GeometryError(f"{type(self).__name__} has no signed distance")

    def contains(self, xs, tol: float = TAU_GEOM) -> np.ndarray:
        xs = _pts(xs)
        return self.sdf(xs) < -tol * _scale(xs)


@dataclass(frozen=True)
class Ball(Base):
    center: tuple[float, ...]
    radius: float

    def sdf(self, xs):
        return np.linalg.norm(_pts(xs) - np.asarray(self.center), axis=-1) - self.radius


@dataclass(frozen=True)
class FullSurface(Base):
    def sdf(self, xs):
        return np.full(_pts(xs).shape[:-1], -np.inf)


@dataclass(frozen=True)
class EmptyBase(Base):
    def sdf(self, xs):
        return np.full(_pts(xs).shape[:-1], np.inf)


@dataclass(frozen=True)
class Complement(Base):
    """Interior of the set complement of ``other`` (``Sigma`` minus the closure)."""

    other: "BaseT"

    def sdf(self, xs):
        return -self.other.sdf(xs)


@dataclass(frozen=True)
class Intersection(Base):
    first: "BaseT"
    second: "BaseT"

    def sdf(self, xs):
        return np.maximum(self.first.sdf(xs), self.second.sdf(xs))


@dataclass(frozen=True)
class Sector(Base):
    """Open solid sector ``{|y| < radius, angle(y, axis) < half_angle}``.

    Exact signed distance, computed in the meridian plane of the axis.
    """

    axis: tuple[float, ...]
    half_angle: float
    radius: float

    def sdf(self, xs):
        xs = _pts(xs)
        w = np.asarray(self.axis, dtype=float)
        w = w / np.linalg.norm(w)
        along = xs @ w
        perp = np.linalg.norm(xs - along[..., None] * w, axis=-1)
        sc = np.array([np.sin(self.half_angle), np.cos(self.half_angle)])
        px, py = perp, along
        outer = np.hypot(px, py) - self.radius
        proj = np.clip(px * sc[0] + py * sc[1], 0.0, self.radius)
        edge = np.hypot(px - sc[0] * proj, py - sc[1] * proj)
        side = np.sign(sc[1] * px - sc[0] * py)
        return np.maximum(outer, edge * side)


@dataclass(frozen=True)
class BoostCap(Base):
    """Cap ``{(c cosh eta, c sinh eta u) : eta > 0, (u, v) > 1 - eps}`` of a hyperboloid."""

    v: tuple[float, ...]
    eps: float

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise SectorError("eps must lie in (0, 1)")
        if abs(np.linalg.norm(self.v) - 1) > 1e-12:
            raise SectorError("v must be a unit vector")


@dataclass(frozen=True, eq=False)
class Mask(Base):
    """Explicit lattice site set (FFT-ordered boolean array)."""

    mask: np.ndarray

    def site_mask(self) -> np.ndarray:
        return np.asarray(self.mask, dtype=bool)


BaseT = Union[Ball, FullSurface, EmptyBase, Complement, Intersection, Sector, BoostCap, Mask]


# ---------------------------------------------------------------------------
# surfaces


@dataclass(frozen=True)
class FlatTimeSlice:
    t0: float = 0.0


@dataclass(frozen=True)
class HyperboloidBranch:
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise GeometryError("hyperboloid parameter must be positive")


# ---------------------------------------------------------------------------
# conformal map


@dataclass(frozen=True)
class ConformalMap:
    """``phi(x) = phi0(x + (1/T, 0))`` with ``phi0`` the ray inversion.

    Sends the forward cone onto the double cone with vertices ``(-T, 0)``
    (image of the apex) and ``0``, and the hyperboloid ``x^2 = c^2``,
    ``c = 1/T``, onto the flat ball of radius ``T/2`` at time ``-T/2``.
    """

    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise GeometryError("T must be positive")

    @property
    def c(self) -> float:
        return 1.0 / self.T

    def _shift(self, d1: int) -> np.ndarray:
        s = np.zeros(d1)
        s[0] = self.c
        return s

    def __call__(self, x) -> np.ndarray:
        x = _pts(x)
        y = x + self._shift(x.shape[-1])
        return -y / minkowski_square(y)[..., None]

    def inverse(self, y) -> np.ndarray:
        y = _pts(y)
        return -y / minkowski_square(y)[..., None] - self._shift(y.shape[-1])

    def image_region(self, d: int) -> "DoubleCone":
        lo = np.zeros(d + 1)
        lo[0] = -self.T
        return DoubleCone(tuple(lo), (0.0,) * (d + 1))

    @property
    def slice_time(self) -> float:
        return -self.T / 2

    @property
    def basis_radius(self) -> float:
        return self.T / 2

    def flat_base(self, base: BaseT, d: int) -> BaseT:
        """Image of a hyperboloid base on the flat slice ``t = -T/2``."""
        disk = Ball((0.0,) * d, self.basis_radius)
        if isinstance(base, FullSurface):
            return disk
        if isinstance(base, EmptyBase):
            return base
        if isinstance(base, BoostCap):
            if d < 2:
                raise SectorError("boost caps need d >= 2")
            axis = tuple(-np.asarray(base.v, dtype=float))
            return Sector(axis, float(np.arccos(1 - base.eps)), self.basis_radius)
        if isinstance(base, Complement):
            return Intersection(disk, Complement(self.flat_base(base.other, d)))
        if isinstance(base, Intersection):
            return Intersection(self.flat_base(base.first, d), self.flat_base(base.second, d))
        raise GeometryError(f"unsupported hyperboloid base {type(base).__name__}")


def conformal_map(T: float) -> ConformalMap:
    return ConformalMap(T)


def boost_cap_contains(c: float, v, eps: float, x, tol: float = TAU_GEOM) -> np.ndarray | bool:
    """Membership in the open boost cap of the hyperboloid ``x^2 = c^2``, ``x0 > 0``."""
    if not c > 0 or not 0 < eps < 1:
        raise SectorError("need c > 0 and 0 < eps < 1")
    x = _pts(x)
    v = np.asarray(v, dtype=float)
    scale = _scale(x) ** 2
    if np.any(np.abs(minkowski_square(x) - c**2) > tol * np.maximum(scale, c**2)) or np.any(x[..., 0] <= 0):
        raise GeometryError("point not on the hyperboloid branch")
    xs = x[..., 1:]
    r = np.linalg.norm(xs, axis=-1)
    moving = r > tol * _scale(x)
    safe = np.where(moving, r, 1.0)
    cosang = (xs @ v) / safe
    out = moving & (cosang > 1 - eps)
    return bool(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class ForwardCone:
    apex: tuple[float, ...]

    def contains(self, x, tol: float = TAU_GEOM):
        x = _pts(x)
        dx = x - np.asarray(self.apex)
        return dx[..., 0] - np.linalg.norm(dx[..., 1:], axis=-1) > tol * _scale(x)


@dataclass(frozen=True)
class DoubleCone:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        dv = np.asarray(self.upper, float) - np.asarray(self.lower, float)
        if not (dv[0] > 0 and minkowski_square(dv) > 0):
            raise GeometryError("vertices must be timelike separated, upper later")

    def contains(self, x, tol: float = TAU_GEOM):
        x = _pts(x)
        up = np.asarray(self.upper) - x
        lo = x - np.asarray(self.lower)
        m = tol * _scale(x)
        return (lo[..., 0] - np.linalg.norm(lo[..., 1:], axis=-1) > m) & (
            up[..., 0] - np.linalg.norm(up[..., 1:], axis=-1) > m
        )

    def as_diamond(self) -> "DiamondOverBase":
        lo, up = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if np.linalg.norm(up[1:] - lo[1:]) > TAU_GEOM * _scale(lo, up):
            raise GeometryError("only vertically aligned double cones are diamonds over balls")
        t0 = 0.5 * (lo[0] + up[0])
        return DiamondOverBase(FlatTimeSlice(t0), Ball(tuple(lo[1:]), 0.5 * (up[0] - lo[0])))


@dataclass(frozen=True)
class DiamondOverBase:
    surface: Union[FlatTimeSlice, HyperboloidBranch]
    base: BaseT

    def contains(self, x, tol: float = TAU_GEOM):
        x = _pts(x)
        if isinstance(self.surface, FlatTimeSlice):
            dt = np.abs(x[..., 0] - self.surface.t0)
            return self.base.sdf(x[..., 1:]) < -dt - tol * _scale(x)
        phi = ConformalMap(1.0 / self.surface.c)
        d = x.shape[-1] - 1
        inside = ForwardCone((0.0,) * (d + 1)).contains(x, tol)
        y = phi(np.where(inside[..., None], x, _unit_time(d)))
        flat = DiamondOverBase(FlatTimeSlice(phi.slice_time), phi.flat_base(self.base, d))
        return inside & flat.contains(y, tol)


def _unit_time(d: int) -> np.ndarray:
    e = np.zeros(d + 1)
    e[0] = 1.0
    return e


@dataclass(frozen=True)
class BoostRegionCompletion:
    c: float
    v: tuple[float, ...]
    eps: float

    def as_diamond(self) -> DiamondOverBase:
        return DiamondOverBase(HyperboloidBranch(self.c), BoostCap(self.v, self.eps))

    def contains(self, x, tol: float = TAU_GEOM):
        return self.as_diamond().contains(x, tol)


@dataclass(frozen=True)
class EmptyRegion:
    def contains(self, x, tol: float = TAU_GEOM):
        return np.zeros(_pts(x).shape[:-1], dtype=bool)


Region = Union[ForwardCone, DoubleCone, DiamondOverBase, BoostRegionCompletion, EmptyRegion]


def contains(R: Region, x, tol: float = TAU_GEOM):
    out = R.contains(x, tol)
    return bool(out) if np.ndim(out) == 0 else out


def _as_diamond(R: Region, surface_hint=None) -> DiamondOverBase:
    if isinstance(R, DiamondOverBase):
        return R
    if isinstance(R, (DoubleCone, BoostRegionCompletion)):
        return R.as_diamond()
    if isinstance(R, ForwardCone) and isinstance(surface_hint, HyperboloidBranch):
        if any(R.apex):
            raise GeometryError("only the forward cone at the origin is supported")
        return DiamondOverBase(surface_hint, FullSurface())
    raise GeometryError(f"unsupported region {type(R).__name__}")


def causal_complement(R: Region, M: Region) -> Region:
    """Relative causal complement of a diamond inside an ambient diamond on the same surface.

    Returned in base-complement form: the diamond over ``base(M)`` minus
    the closure of ``base(R)``.
    """
    Rd = _as_diamond(R)
    Md = _as_diamond(M, Rd.surface)
    if Rd.surface != Md.surface:
        raise GeometryError("R and M must share a Cauchy surface")
    if Rd.base == Md.base:
        return EmptyRegion()
    return DiamondOverBase(Rd.surface, Intersection(Md.base, Complement(Rd.base)))


def relative_complement_predicate(R: Region, M: Region, x, tol: float = TAU_GEOM) -> np.ndarray:
    """Direct form of the relative complement: points of ``M`` spacelike to all of ``R``.

    For ``R`` a diamond over a ball, spacelike to all of ``R`` means lying
    strictly outside the causal future of its lower vertex and the causal
    past of its upper vertex.  For other flat bases the same condition reads
    ``dist(x, base) > |t - t0|``.  Hyperboloid data are transported to the
    flat picture, where the conformal factor preserves spacelike separation.
    """
    x = _pts(x)
    Rd = _as_diamond(R)
    Md = _as_diamond(M, Rd.surface)
    in_m = Md.contains(x, tol)
    m = tol * _scale(x)
    if isinstance(Rd.surface, FlatTimeSlice):
        return in_m & _spacelike_to_flat(Rd.surface.t0, Rd.base, x, m)
    phi = ConformalMap(1.0 / Rd.surface.c)
    d = x.shape[-1] - 1
    y = phi(np.where(in_m[..., None], x, _unit_time(d)))
    base = phi.flat_base(Rd.base, d)
    return in_m & _spacelike_to_flat(phi.slice_time, base, y, tol * _scale(y))


def _spacelike_to_flat(t0: float, base: BaseT, x: np.ndarray, margin) -> np.ndarray:
    if isinstance(base, Ball):
        c = np.asarray(base.center, float)
        lo = np.concatenate([[t0 - base.radius], c])
        up = np.concatenate([[t0 + base.radius], c])
        dlo, dup = x - lo, up - x
        out_future = dlo[..., 0] - np.linalg.norm(dlo[..., 1:], axis=-1) < -margin
        out_past = dup[..., 0] - np.linalg.norm(dup[..., 1:], axis=-1) < -margin
        return out_future & out_past
    return base.sdf(x[..., 1:]) > np.abs(x[..., 0] - t0) + margin


# ---------------------------------------------------------------------------
# lattice masks


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Largest edge-connected component of an FFT-ordered mask near the origin."""
    centered = np.fft.fftshift(mask)
    labels, n = ndimage.label(centered)
    if n <= 1:
        return mask.copy()
    sizes = ndimage.sum(centered, labels, index=np.arange(1, n + 1))
    return np.fft.ifftshift(labels == (1 + int(np.argmax(sizes))))


def flat_basis_mask(grid, T: float) -> np.ndarray:
    """Lattice sites of the open flat ball of radius ``T/2``."""
    return grid.radius < T / 2 - TAU_GEOM * max(1.0, T)


def boost_flat_mask(grid, c: float, v, eps: float, T: float | None = None) -> np.ndarray:
    """Lattice image of the boost cap on the flat basis of the conformal double cone.

    Each site of the flat basis is pulled back through the inverse conformal
    map and tested against the cap; the largest connected component is kept.
    """
    T = 1.0 / c if T is None else T
    if abs(c * T - 1) > 1e-9:
        raise GeometryError("the conformal map flattens the hyperboloid only for c = 1/T")
    if len(v) != grid.d:
        raise GeometryError("direction has the wrong dimension")
    phi = ConformalMap(T)
    basis = flat_basis_mask(grid, T)
    sites = np.stack([np.full(grid.shape, phi.slice_time), *grid.coords], axis=-1)
    pre = phi.inverse(sites[basis])
    hits = boost_cap_contains(c, v, eps, pre)
    mask = np.zeros(grid.shape, dtype=bool)
    mask[basis] = hits
    if not mask.any():
        raise SectorError("degenerate cap: no lattice site in the image")
    return largest_component(mask)


# ---------------------------------------------------------------------------
# serialization


def base_from_dict(spec: dict) -> BaseT:
    kind = spec["kind"]
    if kind == "Ball":
        return Ball(tuple(spec["center"]), float(spec["radius"]))
    if kind == "FullSurface":
        return FullSurface()
    if kind == "Complement":
        return Complement(base_from_dict(spec["other"]))
    if kind == "Intersection":
        return Intersection(base_from_dict(spec["first"]), base_from_dict(spec["second"]))
    if kind == "BoostCap":
        return BoostCap(tuple(spec["v"]), float(spec["eps"]))
    raise GeometryError(f"unknown base kind {kind!r}")


def region_from_dict(spec: dict) -> Region:
    kind = spec["kind"]
    if kind == "ForwardCone":
        return ForwardCone(tuple(spec["apex"]))
    if kind == "DoubleCone":
        return DoubleCone(tuple(spec["lower"]), tuple(spec["upper"]))
    if kind == "DiamondOverBase":
        s = spec["surface"]
        surface = FlatTimeSlice(float(s.get("t0", 0.0))) if s["kind"] == "FlatTimeSlice" else HyperboloidBranch(float(s["c"]))
        return DiamondOverBase(surface, base_from_dict(spec["base"]))
    if kind == "BoostRegionCompletion":
        return BoostRegionCompletion(float(spec["c"]), tuple(spec["v"]), float(spec["eps"]))
    raise GeometryError(f"unknown region kind {kind!r}")
