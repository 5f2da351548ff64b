"""Per-mode fundamental solutions of ``u_tt + Q u = F``.

    C(t) = cos(sqrt(Q) t),   S(t) = sin(sqrt(Q) t) / sqrt(Q)

Both are even functions of ``sqrt(Q)``, so the principal branch is used
without loss. For ``|sqrt(Q) t| < z_eps`` the Taylor series is used, which
keeps ``S`` finite at ``Q = 0``. Negative or complex ``Q`` makes the modes
grow like ``exp(|Im z|)``; beyond ``z_max`` a
:class:`PropagatorOverflowError` is raised instead of returning inf.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PropagatorOverflowError
from .grid import SpectralGrid
from .symbols import grid_QL

Z_EPS = 1e-4
Z_MAX = 700.0


@dataclass(frozen=True, eq=False)
class PropagatorTable:
    Q: np.ndarray
    L: np.ndarray
    sqrtQ: np.ndarray
    grid: SpectralGrid | None = None
    z_eps: float = Z_EPS
    z_max: float = Z_MAX

    @classmethod
    def from_values(cls, Q, L=None, grid=None, **kw) -> "PropagatorTable":
        Q = np.asarray(Q, dtype=complex)
        L = np.ones_like(Q) if L is None else np.broadcast_to(np.asarray(L, dtype=complex), Q.shape).copy()
        return cls(Q=Q, L=L, sqrtQ=np.sqrt(Q), grid=grid, **kw)

    @classmethod
    def from_symbols(cls, L0, L1, L2, grid: SpectralGrid, **kw) -> "PropagatorTable":
        Q, L = grid_QL(L0, L1, L2, grid)
        return cls.from_values(Q, L, grid=grid, **kw)

    @property
    def shape(self):
        return self.Q.shape

    @property
    def oscillatory(self) -> bool:
        """True when every Q is real and non-negative (bounded propagators)."""
        tol = 1e-14 * (1.0 + np.max(np.abs(self.Q), initial=0.0))
        return bool(np.all(np.abs(self.Q.imag) <= tol) and np.all(self.Q.real >= -tol))

    def _z(self, t, pointwise=False):
        t = np.asarray(t, dtype=float)
        z = t * self.sqrtQ if pointwise else np.multiply.outer(t, self.sqrtQ)
        over = np.abs(z.imag) > self.z_max
        if over.any():
            idx = np.unravel_index(np.argmax(over), over.shape)
            lead = 0 if pointwise else t.ndim
            t_bad = float(np.broadcast_to(t, z.shape)[idx])
            mode = idx[lead:]
            raise PropagatorOverflowError(
                f"hyperbolic growth: |Im(sqrt(Q) t)| > {self.z_max} at mode {mode}, t={t_bad}",
                mode=mode,
                t=t_bad,
            )
        return t, z

    def cos(self, t, pointwise: bool = False) -> np.ndarray:
        """C(t) for every mode; a time array of shape ``s`` gives ``s + grid shape``.

        With ``pointwise`` the times are paired with the modes by broadcasting
        instead of forming the outer product.
        """
        _, z = self._z(t, pointwise)
        small = np.abs(z) < self.z_eps
        z2 = z * z
        out = np.cos(z)
        return np.where(small, 1.0 - z2 / 2.0 + z2 * z2 / 24.0, out)

    def sin(self, t, pointwise: bool = False) -> np.ndarray:
        """S(t) for every mode, finite at Q = 0."""
        t, z = self._z(t, pointwise)
        small = np.abs(z) < self.z_eps
        z2 = z * z
        tb = np.broadcast_to(t if pointwise else t.reshape(t.shape + (1,) * self.sqrtQ.ndim), z.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            direct = np.sin(z) / self.sqrtQ
        series = tb * (1.0 - z2 / 6.0 + z2 * z2 / 120.0)
        return np.where(small, series, direct)

    def qsin(self, t, pointwise: bool = False) -> np.ndarray:
        """Q S(t) = sqrt(Q) sin(sqrt(Q) t)."""
        _, z = self._z(t, pointwise)
        return self.sqrtQ * np.sin(z)


def _mode_value(arr, mode):
    return complex(arr[mode]) if mode is not None else arr


def cos_prop(table: PropagatorTable, mode, t: float) -> complex:
    return _mode_value(table.cos(t), mode)


def sin_prop(table: PropagatorTable, mode, t: float) -> complex:
    return _mode_value(table.sin(t), mode)


def phi_kernel(table: PropagatorTable, mode, t: float, ghat) -> complex:
    """Source kernel ``L Q^{-1/2} sin(Q^{1/2} t) ghat`` as written for the transformed problem.

    The solvers do not feed this into the Duhamel integral: the forcing that
    makes ``u_tt + Q u = L ghat`` hold is ``L * ghat`` (see
    :func:`forcing`). This helper evaluates the displayed kernel for
    comparison and diagnostics.
    """
    val = table.L * table.sin(t) * ghat
    return _mode_value(val, mode)


def forcing(table: PropagatorTable, ghat) -> np.ndarray:
    """Right-hand side ``L(xi) ghat(xi, t)`` of the per-mode oscillator."""
    return table.L * ghat


def ut_prop(table: PropagatorTable, mode, t: float, u0, u1, duhamel=0.0) -> complex:
    """``u_t(t) = -Q S(t) u0 + C(t) u1 + duhamel`` (duhamel = int_0^t C(t-s) F(s) ds)."""
    val = -table.qsin(t) * u0 + table.cos(t) * u1 + duhamel
    return _mode_value(val, mode)


def u_prop(table: PropagatorTable, mode, t: float, u0, u1, duhamel=0.0) -> complex:
    """``u(t) = C(t) u0 + S(t) u1 + duhamel`` (duhamel = int_0^t S(t-s) F(s) ds)."""
    val = table.cos(t) * u0 + table.sin(t) * u1 + duhamel
    return _mode_value(val, mode)
