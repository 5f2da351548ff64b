"""Discrete Lebesgue and Liouville-Sobolev norms on a periodic grid.

``||u||_{Y^{s,p}} = ||(I - Laplacian)^{s/2} u||_{L^p}``: the multiplier
``(1 + |xi|^2)^{s/2}`` is applied in frequency space and the cell-volume
weighted ``L^p`` sum is taken in physical space.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import Domain, SpectralField, SpectralGrid


def _physical(f) -> tuple[np.ndarray, SpectralGrid | None]:
    if isinstance(f, SpectralField):
        if f.domain is Domain.FREQUENCY:
            return f.grid.inverse(f.values), f.grid
        return f.values, f.grid
    return np.asarray(f), None


def lp_norm(f, p: float, grid: SpectralGrid | None = None) -> float:
    """``(sum |f|^p dV)^{1/p}``; ``p = inf`` gives the max norm."""
    values, g = _physical(f)
    grid = grid or g
    if grid is None:
        raise ValueError("raw arrays need an explicit grid")
    a = np.abs(values)
    if np.isinf(p):
        return float(a.max())
    if p < 1:
        raise ValueError("p must be >= 1")
    return float((np.sum(a**p) * grid.cell_volume) ** (1.0 / p))


def linf_norm(f) -> float:
    values, _ = _physical(f)
    return float(np.max(np.abs(values)))


def sobolev_multiplier(grid: SpectralGrid, s: float) -> np.ndarray:
    return (1.0 + grid.xi_norm2) ** (s / 2.0)


def ysp_norm(f, s: float, p: float, grid: SpectralGrid | None = None) -> float:
    if isinstance(f, SpectralField):
        grid = f.grid
        coeffs = f.values if f.domain is Domain.FREQUENCY else grid.forward(f.values)
    else:
        coeffs = grid.forward(np.asarray(f, dtype=complex))
    if s == 0:
        return lp_norm(grid.inverse(coeffs), p, grid)
    return lp_norm(grid.inverse(sobolev_multiplier(grid, s) * coeffs), p, grid)


@dataclass(frozen=True, eq=False)
class NormSuite:
    """Norms for a fixed ``(grid, s, p)`` with the multiplier table cached."""

    grid: SpectralGrid
    s: float = 2.0
    p: float = 2.0

    @cached_property
    def multiplier(self) -> np.ndarray:
        return sobolev_multiplier(self.grid, self.s)

    def lp(self, values) -> float:
        return lp_norm(values, self.p, self.grid)

    def l1(self, values) -> float:
        return lp_norm(values, 1.0, self.grid)

    def linf(self, values) -> float:
        return float(np.max(np.abs(values)))

    def ysp(self, values) -> float:
        """Y^{s,p} norm of physical samples (any leading axes are reduced jointly)."""
        return self.ysp_hat(self.grid.forward(np.asarray(values, dtype=complex)))

    def ysp_hat(self, coeffs) -> float:
        return self.lp(self.grid.inverse(self.multiplier * coeffs))

    def ysp_linf(self, values) -> float:
        """``||u||_{Y^{s,p}} + ||u||_inf``, the combined norm used by the nonlinear solver."""
        return self.ysp(values) + self.linf(values)
