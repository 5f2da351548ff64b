"""Periodic lattice on [-L, L)^n and its discrete Fourier transform.

Functions on R^n are approximated by their restriction to a torus. A field
in frequency space holds mode amplitudes ``c_k`` such that

    f(x_j) = sum_k c_k exp(i xi_k . x_j),   xi_k = pi * k / L,

so the forward transform carries the 1/N factor and a pure ``cos(k x)``
maps to two coefficients of 1/2. Arrays are stored in numpy FFT ordering
(``np.fft.fftfreq``); :attr:`SpectralGrid.wavenumbers` follows that order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainTagError, GridError


class Domain(enum.Enum):
    PHYSICAL = "physical"
    FREQUENCY = "frequency"


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic grid with ``points[d]`` sites on ``[-L_d, L_d)``."""

    n: int
    points: tuple[int, ...]
    half_width: tuple[float, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(2.0 * L / N for L, N in zip(self.half_width, self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod([2.0 * L for L in self.half_width]))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        # fftfreq(N, d=1/N) gives the integers j in FFT order
        return tuple(
            np.pi * np.fft.fftfreq(N, d=1.0 / N) / L
            for N, L in zip(self.points, self.half_width)
        )

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, ...]:
        return tuple(
            -L + (2.0 * L / N) * np.arange(N)
            for N, L in zip(self.points, self.half_width)
        )

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        """Physical coordinates broadcast to the full grid shape."""
        return tuple(np.meshgrid(*self.coordinates, indexing="ij"))

    @cached_property
    def xi(self) -> tuple[np.ndarray, ...]:
        """Frequency components broadcast to the full grid shape."""
        return tuple(np.meshgrid(*self.wavenumbers, indexing="ij"))

    @cached_property
    def xi_norm2(self) -> np.ndarray:
        return sum(k**2 for k in self.xi)

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(i xi L) per axis: the grid starts at -L, not at 0
        ph = np.ones(self.points, dtype=complex)
        for d, (k, L) in enumerate(zip(self.wavenumbers, self.half_width)):
            shape = [1] * self.n
            shape[d] = -1
            ph = ph * np.exp(1j * k * L).reshape(shape)
        return ph

    def frequency_vector(self, index) -> np.ndarray:
        """Return ``xi`` at a multi-index into the grid arrays."""
        return np.array([k[index] for k in self.xi])

    def zeros(self, domain: Domain = Domain.PHYSICAL) -> "SpectralField":
        return SpectralField(self, np.zeros(self.points, dtype=complex), domain)

    def field(self, values, domain: Domain = Domain.PHYSICAL) -> "SpectralField":
        return SpectralField(self, values, domain)

    def sample(self, fn) -> "SpectralField":
        """Evaluate ``fn(*mesh)`` on the lattice as a physical field."""
        return SpectralField(self, np.asarray(fn(*self.mesh), dtype=complex))

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Physical samples -> mode amplitudes, over the trailing ``n`` axes."""
        axes = tuple(range(-self.n, 0))
        return np.fft.fftn(values, axes=axes) * (self._phase / self.size)

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.n, 0))
        return np.fft.ifftn(coeffs / self._phase, axes=axes) * self.size


def make_grid(n: int, points, half_width) -> SpectralGrid:
    """Build a grid; ``points`` and ``half_width`` may be scalars or per-axis lists."""
    if n not in (1, 2, 3):
        raise GridError(f"dimension must be 1, 2 or 3, got {n}")
    points = tuple(int(p) for p in np.broadcast_to(np.atleast_1d(points), (n,)))
    half_width = tuple(float(h) for h in np.broadcast_to(np.atleast_1d(half_width), (n,)))
    for N in points:
        if N < 4 or N % 2:
            raise GridError(f"points per axis must be even and >= 4, got {N}")
    for L in half_width:
        if not L > 0:
            raise GridError(f"half_width must be positive, got {L}")
    return SpectralGrid(n, points, half_width)


@dataclass(frozen=True)
class SpectralField:
    grid: SpectralGrid
    values: np.ndarray
    domain: Domain = Domain.PHYSICAL

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            if values.size != self.grid.size:
                raise GridError(
                    f"field has {values.size} values, grid has {self.grid.size} sites"
                )
            values = values.reshape(self.grid.shape)
        object.__setattr__(self, "values", values)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return SpectralField(self.grid, self.values + other.values, self.domain)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return SpectralField(self.grid, self.values - other.values, self.domain)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.values * scalar, self.domain)

    __rmul__ = __mul__

    def _check_compatible(self, other):
        if other.grid != self.grid:
            raise GridError("fields live on different grids")
        if other.domain is not self.domain:
            raise DomainTagError("cannot combine physical and frequency fields")


def to_frequency(f: SpectralField) -> SpectralField:
    if f.domain is not Domain.PHYSICAL:
        raise DomainTagError("to_frequency expects a physical-space field")
    return SpectralField(f.grid, f.grid.forward(f.values), Domain.FREQUENCY)


def to_physical(f: SpectralField) -> SpectralField:
    if f.domain is not Domain.FREQUENCY:
        raise DomainTagError("to_physical expects a frequency-space field")
    return SpectralField(f.grid, f.grid.inverse(f.values), Domain.PHYSICAL)
