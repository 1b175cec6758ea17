"""Scalar Cauchy data ``(f0, f1)`` on a periodic lattice."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import LatticeGrid


@dataclass(frozen=True, eq=False)
class CauchyDatum:
    """Field value ``f0`` and time derivative ``f1`` at ``t = 0``."""

    grid: LatticeGrid
    f0: np.ndarray
    f1: np.ndarray

    def __post_init__(self):
        for name in ("f0", "f1"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.grid.shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {self.grid.shape}")
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, grid: LatticeGrid) -> "CauchyDatum":
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    def __add__(self, other: "CauchyDatum") -> "CauchyDatum":
        return CauchyDatum(self.grid, self.f0 + other.f0, self.f1 + other.f1)

    def __sub__(self, other: "CauchyDatum") -> "CauchyDatum":
        return CauchyDatum(self.grid, self.f0 - other.f0, self.f1 - other.f1)

    def __neg__(self) -> "CauchyDatum":
        return CauchyDatum(self.grid, -self.f0, -self.f1)

    def __mul__(self, c: float) -> "CauchyDatum":
        return CauchyDatum(self.grid, c * self.f0, c * self.f1)

    __rmul__ = __mul__

    def stacked(self) -> np.ndarray:
        return np.stack([self.f0, self.f1])
