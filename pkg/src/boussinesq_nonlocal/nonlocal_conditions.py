"""Integral initial conditions and the per-mode system for the true initial pair.

With ``u(0) = phi + int alpha u`` and ``u_t(0) = psi + int beta u_t`` the
unknown initial values ``(u0, u1)`` of every Fourier mode solve

    [1 - A_C   -A_S ] [u0]   [f1]
    [B_QS    1 - B_C] [u1] = [f2]

with moments ``A_C = int alpha C``, ``A_S = int alpha S``, ``B_C = int beta C``,
``B_QS = int beta Q S`` and right-hand sides

    f1 = phi_hat + int alpha(s) int_0^s S(s - r) F(r) dr ds
    f2 = psi_hat + int beta(s)  int_0^s C(s - r) F(r) dr ds

where ``F = L ghat`` is the per-mode forcing. Kernels are either sampled
densities (composite Simpson) or finite atom lists (multipoint conditions).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import SingularDeterminantError
from .propagator import PropagatorTable
from .quadrature import cumulative_simpson_even, simpson_weights

DEFAULT_NQ = 129
DET_THRESHOLD = 1e-10


@dataclass(frozen=True, eq=False)
class NonlocalKernel:
    """A finite measure on ``[0, T]``: sampled density or weighted atoms."""

    horizon: float
    kind: str
    nodes: np.ndarray
    values: np.ndarray
    fn: Callable | None = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("kernel horizon must be positive")
        if self.kind not in ("density", "atoms"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        nodes = np.atleast_1d(np.asarray(self.nodes, dtype=float))
        values = np.atleast_1d(np.asarray(self.values, dtype=complex))
        if nodes.shape != values.shape:
            raise ValueError("kernel nodes and values differ in length")
        tol = 1e-12 * self.horizon
        if nodes.size and (nodes.min() < -tol or nodes.max() > self.horizon + tol):
            raise ValueError("kernel nodes must lie in [0, T]")
        if self.kind == "density" and nodes.size < 2:
            raise ValueError("a density kernel needs at least two nodes")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    # constructors

    @classmethod
    def zero(cls, horizon: float) -> "NonlocalKernel":
        return cls(horizon, "atoms", np.empty(0), np.empty(0))

    @classmethod
    def atoms(cls, horizon: float, locations, weights) -> "NonlocalKernel":
        return cls(horizon, "atoms", locations, weights)

    @classmethod
    def density(cls, horizon: float, samples) -> "NonlocalKernel":
        samples = np.asarray(samples)
        return cls(horizon, "density", np.linspace(0.0, horizon, samples.size), samples)

    @classmethod
    def from_function(cls, horizon: float, fn, nq: int = DEFAULT_NQ) -> "NonlocalKernel":
        nodes = np.linspace(0.0, horizon, nq)
        return cls(horizon, "density", nodes, np.asarray(fn(nodes), dtype=complex) * np.ones(nq), fn)

    # queries

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    @property
    def nq(self) -> int:
        return self.nodes.size

    def measure(self):
        """Quadrature points and weights representing ``alpha(s) ds``."""
        if self.kind == "atoms":
            return self.nodes, self.values
        return self.nodes, simpson_weights(self.nq, 0.0, self.horizon) * self.values

    def total_variation(self) -> float:
        if self.kind == "atoms":
            return float(np.sum(np.abs(self.values)))
        return float(np.sum(simpson_weights(self.nq, 0.0, self.horizon) * np.abs(self.values)))

    def evaluate(self, sigma) -> np.ndarray:
        """Density value at arbitrary points (closed form if known, else cubic spline)."""
        if self.kind != "density":
            raise TypeError("atom kernels have no pointwise density")
        sigma = np.asarray(sigma, dtype=float)
        if self.fn is not None:
            return np.asarray(self.fn(sigma), dtype=complex) * np.ones_like(sigma)
        return CubicSpline(self.nodes, self.values)(sigma)

    def resampled(self, nq: int) -> "NonlocalKernel":
        """Same density on ``nq`` uniform nodes; atoms are returned unchanged."""
        if self.kind == "atoms":
            return self
        nodes = np.linspace(0.0, self.horizon, nq)
        return NonlocalKernel(self.horizon, "density", nodes, self.evaluate(nodes), self.fn)

    def scaled(self, c: complex) -> "NonlocalKernel":
        return NonlocalKernel(self.horizon, self.kind, self.nodes, c * self.values,
                              None if self.fn is None else (lambda s, f=self.fn: c * f(s)))


def kernel_integral(k: NonlocalKernel, g) -> complex | np.ndarray:
    """``int_0^T k(s) g(s) ds``.

    ``g`` is a callable on an array of times (returning values with the time
    axis first) or an array already sampled at the kernel nodes.
    """
    points, weights = k.measure()
    if points.size == 0:
        return 0.0
    vals = g(points) if callable(g) else np.asarray(g)
    return np.tensordot(weights, vals, axes=([0], [0]))


def _product_integral(alpha: NonlocalKernel, beta: NonlocalKernel) -> complex:
    if alpha.is_zero or beta.is_zero:
        return 0.0
    if alpha.kind == "atoms" and beta.kind == "atoms":
        tol = 1e-12 * alpha.horizon
        total = 0.0
        for lam, wa in zip(alpha.nodes, alpha.values):
            hit = np.abs(beta.nodes - lam) <= tol
            total += wa * np.sum(beta.values[hit])
        return complex(total)
    if alpha.kind == "atoms":
        alpha, beta = beta, alpha
    if beta.kind == "atoms":
        # density times atoms: density sampled at the atom locations
        return complex(np.sum(beta.values * alpha.evaluate(beta.nodes)))
    if alpha.nq == beta.nq:
        va, vb = alpha.values, beta.values
        nq = alpha.nq
    else:
        nq = max(alpha.nq, beta.nq)
        va, vb = alpha.resampled(nq).values, beta.resampled(nq).values
    return complex(np.sum(simpson_weights(nq, 0.0, alpha.horizon) * va * vb))


def admissibility_margin(alpha: NonlocalKernel, beta: NonlocalKernel) -> float:
    """``|1 + int alpha beta| - int (|alpha| + |beta|)``."""
    if not np.isclose(alpha.horizon, beta.horizon, rtol=1e-12, atol=0.0):
        raise ValueError(f"kernel horizons differ: {alpha.horizon} vs {beta.horizon}")
    return abs(1.0 + _product_integral(alpha, beta)) - alpha.total_variation() - beta.total_variation()


def check_admissibility(alpha: NonlocalKernel, beta: NonlocalKernel):
    margin = admissibility_margin(alpha, beta)
    return margin > 0, margin


@dataclass(frozen=True, eq=False)
class DeterminantTable:
    D: np.ndarray
    A_C: np.ndarray
    A_S: np.ndarray
    B_C: np.ndarray
    B_QS: np.ndarray
    min_abs: float
    argmin: tuple
    threshold: float = DET_THRESHOLD

    def require_regular(self, grid=None):
        if not self.min_abs >= self.threshold:
            xi = grid.frequency_vector(self.argmin) if grid is not None else self.argmin
            raise SingularDeterminantError(
                f"nonlocal determinant nearly singular: min|D| = {self.min_abs:.3e} at xi={np.asarray(xi).tolist()}",
                xi=xi,
                value=self.min_abs,
            )


def moments(alpha: NonlocalKernel, beta: NonlocalKernel, prop: PropagatorTable):
    """``(A_C, A_S, B_C, B_QS)`` per mode."""
    zero = np.zeros(prop.shape, dtype=complex)

    def integrate(k, fn):
        pts, w = k.measure()
        if pts.size == 0 or k.is_zero:
            return zero.copy()
        return np.tensordot(w, fn(pts), axes=([0], [0]))

    return (
        integrate(alpha, prop.cos),
        integrate(alpha, prop.sin),
        integrate(beta, prop.cos),
        integrate(beta, prop.qsin),
    )


def build_determinant(alpha, beta, prop: PropagatorTable, grid=None,
                      threshold: float = DET_THRESHOLD, check: bool = True) -> DeterminantTable:
    """Per-mode determinant ``(1 - A_C)(1 - B_C) + A_S B_QS``.

    Raises :class:`SingularDeterminantError` when ``min |D|`` falls below
    ``threshold`` unless ``check`` is false.
    """
    A_C, A_S, B_C, B_QS = moments(alpha, beta, prop)
    D = (1.0 - A_C) * (1.0 - B_C) + A_S * B_QS
    absD = np.abs(D)
    argmin = np.unravel_index(np.argmin(absD), absD.shape)
    table = DeterminantTable(D, A_C, A_S, B_C, B_QS, float(absD[argmin]), argmin, threshold)
    if check:
        table.require_regular(grid if grid is not None else prop.grid)
    return table


def solve_initial_pair(dt: DeterminantTable, f1, f2):
    """Cramer's rule for the per-mode 2x2 system."""
    dt.require_regular()
    u0 = ((1.0 - dt.B_C) * f1 + dt.A_S * f2) / dt.D
    u1 = ((1.0 - dt.A_C) * f2 - dt.B_QS * f1) / dt.D
    return u0, u1


def system_residual(dt: DeterminantTable, u0, u1, f1, f2) -> float:
    """Relative residual of the 2x2 system at the recovered pair."""
    r1 = (1.0 - dt.A_C) * u0 - dt.A_S * u1 - f1
    r2 = dt.B_QS * u0 + (1.0 - dt.B_C) * u1 - f2
    scale = max(np.max(np.abs(f1)), np.max(np.abs(f2)), 1e-300)
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))) / scale)


def inner_duhamel(prop: PropagatorTable, forcing_hat, sigma: float, nq: int = DEFAULT_NQ):
    """``(int_0^s S(s-r) F(r) dr, int_0^s C(s-r) F(r) dr)`` on ``nq`` Simpson nodes."""
    zero = np.zeros(prop.shape, dtype=complex)
    if sigma <= 0.0:
        return zero, zero.copy()
    tau = np.linspace(0.0, sigma, nq)
    w = simpson_weights(nq, 0.0, sigma)
    F = forcing_hat(tau)
    lag = sigma - tau
    ws = np.tensordot(w, prop.sin(lag) * F, axes=([0], [0]))
    wc = np.tensordot(w, prop.cos(lag) * F, axes=([0], [0]))
    return ws, wc


def inner_duhamel_uniform(prop: PropagatorTable, forcing_hat, horizon: float, nq: int):
    """Inner Duhamel pair at all ``nq`` uniform nodes of ``[0, horizon]`` in one pass.

    Uses ``S(s-r) = S(s)C(r) - C(s)S(r)`` and ``C(s-r) = C(s)C(r) + Q S(s)S(r)``
    with cumulative Simpson on twice as many intervals as the node grid.
    """
    fine = np.linspace(0.0, horizon, 2 * (nq - 1) + 1)
    h = fine[1] - fine[0]
    C, S = prop.cos(fine), prop.sin(fine)
    F = forcing_hat(fine)
    IC = cumulative_simpson_even(C * F, h)
    IS = cumulative_simpson_even(S * F, h)
    C, S, QS = C[::2], S[::2], prop.qsin(fine[::2])
    return S * IC - C * IS, C * IC + QS * IS


def _uniform_density(k: NonlocalKernel) -> bool:
    return k.kind == "density" and np.allclose(k.nodes, np.linspace(0.0, k.horizon, k.nq), rtol=0, atol=1e-14 * k.horizon)


def build_rhs(alpha, beta, prop: PropagatorTable, forcing_hat, phi_hat, psi_hat,
              nq: int = DEFAULT_NQ):
    """Right-hand sides ``(f1, f2)`` of the per-mode system.

    ``forcing_hat(times)`` returns the per-mode forcing ``L ghat`` with the time
    axis first, or is ``None`` for the homogeneous problem.
    """
    phi_hat = np.asarray(phi_hat, dtype=complex)
    psi_hat = np.asarray(psi_hat, dtype=complex)
    if forcing_hat is None:
        return phi_hat.copy(), psi_hat.copy()
    cache = {}

    def inner(sigma):
        key = float(sigma)
        if key not in cache:
            cache[key] = inner_duhamel(prop, forcing_hat, key, nq)
        return cache[key]

    f1 = phi_hat.copy()
    f2 = psi_hat.copy()
    dense = [k for k in (alpha, beta) if _uniform_density(k) and not k.is_zero]
    if dense:
        nq = max(k.nq for k in dense)
        grid_pair = inner_duhamel_uniform(prop, forcing_hat, alpha.horizon, nq)
        for k, which in ((alpha, 0), (beta, 1)):
            if k in dense:
                k = k if k.nq == nq else k.resampled(nq)
                _, w = k.measure()
                term = np.tensordot(w, grid_pair[which], axes=([0], [0]))
                if which == 0:
                    f1 = f1 + term
                else:
                    f2 = f2 + term
        alpha = NonlocalKernel.zero(alpha.horizon) if alpha in dense else alpha
        beta = NonlocalKernel.zero(beta.horizon) if beta in dense else beta
    pa, wa = alpha.measure()
    for s, w in zip(pa, wa):
        if w != 0:
            f1 = f1 + w * inner(s)[0]
    pb, wb = beta.measure()
    for s, w in zip(pb, wb):
        if w != 0:
            f2 = f2 + w * inner(s)[1]
    return f1, f2
