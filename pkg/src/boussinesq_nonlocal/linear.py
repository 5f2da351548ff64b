"""Linear problem ``u_tt + L0 u_tt + L1 u = L2 g`` with integral initial conditions.

Every Fourier mode is an oscillator ``u_tt + Q u = L ghat``. Its true
initial pair ``(u0, u1)`` comes from the 2x2 nonlocal system, after which

    u_hat(t)   = C(t) u0 + S(t) u1 + int_0^t S(t-s) F(s) ds
    u_t_hat(t) = -Q S(t) u0 + C(t) u1 + int_0^t C(t-s) F(s) ds

with ``F = L ghat``. The Duhamel integrals use composite Simpson with node
doubling until the result settles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import InadmissibleProblemError
from .grid import Domain, SpectralField, SpectralGrid, to_frequency
from .nonlocal_conditions import (
    DEFAULT_NQ,
    DeterminantTable,
    NonlocalKernel,
    admissibility_margin,
    build_determinant,
    build_rhs,
    solve_initial_pair,
    system_residual,
)
from .propagator import PropagatorTable
from .quadrature import simpson_weights
from .symbols import OperatorSymbol, check_symbol_bounds

log = logging.getLogger(__name__)

DUHAMEL_NODES = 65
DUHAMEL_MAX_NODES = 1025
DUHAMEL_RTOL = 1e-9


class SeparableSource:
    """``g(x, t) = sum_j a_j(x) b_j(t)``; transforms once, evaluates any times cheaply."""

    def __init__(self, grid: SpectralGrid, spatial, temporal):
        if isinstance(spatial, SpectralField):
            spatial, temporal = [spatial], [temporal]
        self.grid = grid
        self._hats = [to_frequency(a).values for a in spatial]
        self._temporal = list(temporal)

    def hat(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.zeros((times.size,) + self.grid.shape, dtype=complex)
        for a_hat, b in zip(self._hats, self._temporal):
            out += np.multiply.outer(np.asarray(b(times), dtype=complex) * np.ones(times.size), a_hat)
        return out

    def __call__(self, t: float) -> np.ndarray:
        return self.grid.inverse(self.hat([t])[0])


class SourceEvaluator:
    """Lazily transformed source ``ghat(t)`` with a per-time cache.

    Wraps either a :class:`SeparableSource` (evaluated directly in frequency
    space) or a callable ``g(t)`` returning physical samples.
    """

    def __init__(self, grid: SpectralGrid, source):
        self.grid = grid
        self.source = source
        self._cache: dict[float, np.ndarray] = {}

    def __call__(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if self.source is None:
            return np.zeros((times.size,) + self.grid.shape, dtype=complex)
        if hasattr(self.source, "hat"):
            return self.source.hat(times)
        out = np.empty((times.size,) + self.grid.shape, dtype=complex)
        for i, t in enumerate(times):
            key = float(t)
            if key not in self._cache:
                g = self.source(key)
                if isinstance(g, SpectralField):
                    g = g.values if g.domain is Domain.PHYSICAL else self.grid.inverse(g.values)
                self._cache[key] = self.grid.forward(np.asarray(g, dtype=complex).reshape(self.grid.shape))
            out[i] = self._cache[key]
        return out


@dataclass
class LinearProblem:
    L0: OperatorSymbol
    L1: OperatorSymbol
    L2: OperatorSymbol
    alpha: NonlocalKernel
    beta: NonlocalKernel
    phi: SpectralField
    psi: SpectralField
    source: object = None
    times: tuple = (0.0,)
    s: float = 2.0
    p: float = 2.0
    force: bool = False
    nq_inner: int = DEFAULT_NQ
    duhamel_nodes: int = DUHAMEL_NODES
    duhamel_max_nodes: int = DUHAMEL_MAX_NODES
    duhamel_rtol: float = DUHAMEL_RTOL
    duhamel_adaptive: bool = True

    @property
    def grid(self) -> SpectralGrid:
        return self.phi.grid

    @property
    def horizon(self) -> float:
        return self.alpha.horizon

    def validate(self):
        if self.psi.grid != self.phi.grid:
            raise ValueError("phi and psi live on different grids")
        if getattr(self.source, "grid", self.grid) != self.grid:
            raise ValueError("source lives on a different grid")
        if not np.isclose(self.alpha.horizon, self.beta.horizon, rtol=1e-12, atol=0.0):
            raise ValueError("alpha and beta have different horizons")
        t = np.asarray(self.times, dtype=float)
        if t.size and (t.min() < 0 or t.max() > self.horizon * (1 + 1e-12)):
            raise ValueError(f"output times must lie in [0, {self.horizon}]")


@dataclass
class ModalData:
    phi_hat: np.ndarray
    psi_hat: np.ndarray
    source_hat: SourceEvaluator


def transform_problem(p: LinearProblem) -> ModalData:
    p.validate()
    return ModalData(to_frequency(p.phi).values, to_frequency(p.psi).values,
                     SourceEvaluator(p.grid, p.source))


def duhamel_pair(table: PropagatorTable, t: float, forcing_hat, nodes: int = DUHAMEL_NODES,
                 max_nodes: int = DUHAMEL_MAX_NODES, rtol: float = DUHAMEL_RTOL,
                 adaptive: bool = True):
    """``(int_0^t S(t-s) F(s) ds, int_0^t C(t-s) F(s) ds)`` for every mode.

    Composite Simpson on ``nodes`` points; with ``adaptive`` the node count is
    doubled (2n-1) until both integrals change by less than ``rtol`` relative
    to their size, or ``max_nodes`` is reached.
    """
    zero = np.zeros(table.shape, dtype=complex)
    if forcing_hat is None or t <= 0.0:
        return zero, zero.copy()

    def estimate(m):
        tau = np.linspace(0.0, t, m)
        w = simpson_weights(m, 0.0, t)
        F = forcing_hat(tau)
        lag = t - tau
        return (np.tensordot(w, table.sin(lag) * F, axes=([0], [0])),
                np.tensordot(w, table.cos(lag) * F, axes=([0], [0])))

    m = nodes if nodes % 2 else nodes + 1
    ws, wc = estimate(m)
    if not adaptive:
        return ws, wc
    while 2 * m - 1 <= max_nodes:
        m = 2 * m - 1
        ws2, wc2 = estimate(m)
        change = max(np.max(np.abs(ws2 - ws)), np.max(np.abs(wc2 - wc)))
        scale = max(np.max(np.abs(ws2)), np.max(np.abs(wc2)))
        ws, wc = ws2, wc2
        if change <= rtol * scale:
            return ws, wc
    log.debug("Duhamel quadrature at t=%g stopped at the %d-node cap", t, m)
    return ws, wc


def duhamel(table: PropagatorTable, mode, t: float, forcing_hat, nodes: int = DUHAMEL_NODES, **kw):
    """``int_0^t S(t-s) F(s) ds``; ``mode=None`` returns every mode."""
    ws, _ = duhamel_pair(table, t, forcing_hat, nodes=nodes, **kw)
    return ws if mode is None else complex(ws[mode])


@dataclass(eq=False)
class ModalEvolution:
    """Assembled per-mode solution; evaluates ``(u_hat, u_t_hat)`` at any time."""

    prop: PropagatorTable
    u0: np.ndarray
    u1: np.ndarray
    forcing_hat: Callable | None = None
    duhamel_nodes: int = DUHAMEL_NODES
    duhamel_max_nodes: int = DUHAMEL_MAX_NODES
    duhamel_rtol: float = DUHAMEL_RTOL
    adaptive: bool = True

    def state(self, t: float):
        ws, wc = duhamel_pair(self.prop, t, self.forcing_hat, self.duhamel_nodes,
                              self.duhamel_max_nodes, self.duhamel_rtol, self.adaptive)
        u = self.prop.cos(t) * self.u0 + self.prop.sin(t) * self.u1 + ws
        ut = -self.prop.qsin(t) * self.u0 + self.prop.cos(t) * self.u1 + wc
        return u, ut

    def states_uniform(self, horizon: float, count: int):
        """States on ``count`` uniform nodes of ``[0, horizon]``.

        Uses ``S(t-s) = S(t) C(s) - C(t) S(s)`` and cumulative Simpson, so the
        forcing is sampled once per node. Independent of :meth:`state`.
        """
        t = np.linspace(0.0, horizon, count)
        C, S, QS = self.prop.cos(t), self.prop.sin(t), self.prop.qsin(t)
        u = C * self.u0 + S * self.u1
        ut = -QS * self.u0 + C * self.u1
        if self.forcing_hat is not None:
            F = self.forcing_hat(t)
            IC = _cumulative(C * F, t)
            IS = _cumulative(S * F, t)
            u = u + S * IC - C * IS
            # C(t-s) = C(t) C(s) + Q S(t) S(s)
            ut = ut + C * IC + QS * IS
        return t, u, ut


def _cumulative(values, t):
    # scipy's cumulative Simpson is real-only
    re = cumulative_simpson(values.real, x=t, axis=0, initial=0.0)
    im = cumulative_simpson(values.imag, x=t, axis=0, initial=0.0)
    return re + 1j * im


@dataclass
class LinearSolution:
    grid: SpectralGrid
    times: np.ndarray
    u: list
    ut: list
    u0: np.ndarray
    u1: np.ndarray
    evolution: ModalEvolution
    determinant: DeterminantTable
    diagnostics: dict = field(default_factory=dict)


def check_problem(p: LinearProblem):
    """Reject inputs that violate the symbol or kernel hypotheses.

    Raises :class:`InadmissibleProblemError` naming the failed hypothesis and
    its witness. The kernel inequality can be overridden with ``p.force``;
    symbol zeros cannot.
    """
    report = check_symbol_bounds(p.L0, p.L1, p.L2, p.s, p.p, p.grid)
    if report.zero_hits:
        kind, xi = report.zero_hits[0]
        raise InadmissibleProblemError(
            f"symbol {kind} vanishes at xi={xi.tolist()} ({len(report.zero_hits)} zero(s) on the grid)",
            hypothesis="symbol_nonvanishing",
            witness=xi,
        )
    margin = admissibility_margin(p.alpha, p.beta)
    if margin <= 0 and not p.force:
        raise InadmissibleProblemError(
            f"kernel inequality |1 + int(alpha beta)| > int(|alpha| + |beta|) fails: margin {margin:.6g}",
            hypothesis="kernel_margin",
            witness=margin,
        )
    return report, margin


def _evolution(p: LinearProblem, prop: PropagatorTable, data: ModalData, forcing_hat):
    det = build_determinant(p.alpha, p.beta, prop, p.grid)
    f1, f2 = build_rhs(p.alpha, p.beta, prop, forcing_hat, data.phi_hat, data.psi_hat, p.nq_inner)
    u0, u1 = solve_initial_pair(det, f1, f2)
    evo = ModalEvolution(prop, u0, u1, forcing_hat, p.duhamel_nodes, p.duhamel_max_nodes,
                         p.duhamel_rtol, p.duhamel_adaptive)
    return evo, det, system_residual(det, u0, u1, f1, f2)


def _forcing(prop: PropagatorTable, source_hat: SourceEvaluator, has_source: bool):
    if not has_source:
        return None
    return lambda tau: prop.L * source_hat(tau)


def nonlocal_residuals(evo: ModalEvolution, alpha: NonlocalKernel, beta: NonlocalKernel,
                       phi_hat, psi_hat, grid: SpectralGrid, refine: int = 4):
    """A posteriori sup-norm residuals of both integral conditions.

    Density kernels are re-integrated on ``refine`` times as many intervals
    (states from :meth:`ModalEvolution.states_uniform`), atoms exactly.
    """
    out = []
    u_init, ut_init = evo.state(0.0)
    for k, which, init, data in ((alpha, 0, u_init, phi_hat), (beta, 1, ut_init, psi_hat)):
        if k.is_zero:
            integral = 0.0
        elif k.kind == "atoms":
            vals = np.stack([evo.state(float(s))[which] for s in k.nodes])
            integral = np.tensordot(k.values, vals, axes=([0], [0]))
        else:
            fine = k.resampled(refine * (k.nq - 1) + 1)
            _, u, ut = evo.states_uniform(k.horizon, fine.nq)
            pts, w = fine.measure()
            integral = np.tensordot(w, u if which == 0 else ut, axes=([0], [0]))
        r = init - integral - data
        out.append(float(np.max(np.abs(grid.inverse(r)))))
    return tuple(out)


def solve_linear(p: LinearProblem, check: bool = True, residuals: bool = True) -> LinearSolution:
    if check:
        check_problem(p)
    data = transform_problem(p)
    prop = PropagatorTable.from_symbols(p.L0, p.L1, p.L2, p.grid)
    forcing_hat = _forcing(prop, data.source_hat, p.source is not None)
    evo, det, sys_res = _evolution(p, prop, data, forcing_hat)
    times = np.asarray(p.times, dtype=float)
    us, uts = [], []
    for t in times:
        uh, uth = evo.state(float(t))
        us.append(SpectralField(p.grid, p.grid.inverse(uh)))
        uts.append(SpectralField(p.grid, p.grid.inverse(uth)))
    diagnostics = {
        "min_det": det.min_abs,
        "system_residual": sys_res,
        "oscillatory": prop.oscillatory,
    }
    if residuals:
        ru, rut = nonlocal_residuals(evo, p.alpha, p.beta, data.phi_hat, data.psi_hat, p.grid)
        diagnostics["residual_u"] = ru
        diagnostics["residual_ut"] = rut
    return LinearSolution(p.grid, times, us, uts, evo.u0, evo.u1, evo, det, diagnostics)


def _homogeneous_multipliers(p: LinearProblem, t: float):
    prop = PropagatorTable.from_symbols(p.L0, p.L1, p.L2, p.grid)
    det = build_determinant(p.alpha, p.beta, prop, p.grid)
    C, S = prop.cos(t), prop.sin(t)
    m1 = (C * (1.0 - det.B_C) - S * det.B_QS) / det.D
    m2 = (C * det.A_S + S * (1.0 - det.A_C)) / det.D
    return m1, m2


def apply_S1(p: LinearProblem, phi: SpectralField, t: float) -> SpectralField:
    """Solution operator for the ``phi`` datum (``psi = 0``, ``g = 0``)."""
    m1, _ = _homogeneous_multipliers(p, t)
    return SpectralField(p.grid, p.grid.inverse(m1 * to_frequency(phi).values))


def apply_S2(p: LinearProblem, psi: SpectralField, t: float) -> SpectralField:
    """Solution operator for the ``psi`` datum (``phi = 0``, ``g = 0``)."""
    _, m2 = _homogeneous_multipliers(p, t)
    return SpectralField(p.grid, p.grid.inverse(m2 * to_frequency(psi).values))
