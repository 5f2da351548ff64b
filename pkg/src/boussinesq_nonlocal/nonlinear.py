"""Nonlinear problem ``u_tt + L0 u_tt + L1 u = L2 f(u)`` by windowed Picard iteration.

On a window ``[0, T_w]`` the map ``G(u)`` solves the linear problem with
source ``f(u)``: the nonlinearity is applied at the ``N_t`` uniform time
nodes, transformed, interpolated in time by a cubic spline, and pushed
through the exact per-mode propagators with composite Simpson Duhamel
quadrature. The integral initial conditions bind only on the first window;
later windows start from the end state of the previous one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import BoussinesqError, PropagatorOverflowError
from .grid import SpectralField, SpectralGrid, to_frequency
from .linear import LinearProblem, check_problem
from .nonlocal_conditions import (
    DEFAULT_NQ,
    DeterminantTable,
    NonlocalKernel,
    build_determinant,
    build_rhs,
    solve_initial_pair,
)
from .norms import NormSuite
from .propagator import PropagatorTable
from .quadrature import cumulative_simpson_even
from .symbols import OperatorSymbol

log = logging.getLogger(__name__)


class NonFiniteStateError(BoussinesqError):
    """A trajectory or end state contains NaN or Inf."""


# nonlinearities


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Pointwise ``f(u)`` with derivatives and the majorant ``fbar``.

    ``fbar(r)`` bounds ``max(|f'(x)|, |f''(x)|)`` over ``|x| <= r``. With
    ``spatial`` set, ``fn`` is called as ``fn(mesh, t, u)`` instead of ``fn(u)``.
    """

    name: str
    fn: Callable
    d1: Callable
    d2: Callable
    d3: Callable
    fbar: Callable[[float], float]
    spatial: bool = False

    def __call__(self, u, t=None, mesh=None):
        if self.spatial:
            return self.fn(mesh, t, u)
        return self.fn(u)

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"


def _const(c):
    return lambda u: np.full_like(np.asarray(u, dtype=complex), c)


def register_nonlinearity(name: str, *params) -> Nonlinearity:
    """Registry of ``zero``, ``linear(c)``, ``quadratic``, ``cubic`` and ``sine``."""
    if name == "zero":
        z = _const(0.0)
        return Nonlinearity("zero", z, z, z, z, lambda r: 0.0)
    if name == "linear":
        c = params[0] if params else 1.0
        return Nonlinearity(f"linear({c:g})", lambda u: c * u, _const(c), _const(0.0), _const(0.0),
                            lambda r: abs(c))
    if name == "quadratic":
        return Nonlinearity("quadratic", lambda u: u * u, lambda u: 2 * u, _const(2.0), _const(0.0),
                            lambda r: max(2.0 * r, 2.0))
    if name == "cubic":
        return Nonlinearity("cubic", lambda u: u**3, lambda u: 3 * u**2, lambda u: 6 * u, _const(6.0),
                            lambda r: max(3.0 * r * r, 6.0 * r))
    if name == "sine":
        return Nonlinearity("sine", np.sin, np.cos, lambda u: -np.sin(u), lambda u: -np.cos(u),
                            lambda r: 1.0)
    raise ValueError(f"unknown nonlinearity {name!r}")


def parse_nonlinearity(spec: str) -> Nonlinearity:
    """``"quadratic"`` or ``"linear(0.5)"`` -> :class:`Nonlinearity`."""
    spec = spec.strip()
    if "(" in spec:
        name, rest = spec.split("(", 1)
        args = [float(a) for a in rest.rstrip(")").split(",") if a.strip()]
        return register_nonlinearity(name.strip(), *args)
    return register_nonlinearity(spec)


# step size and monitor


def max_window(M: float, C0: float, C1: float, fbar: Callable[[float], float]) -> float:
    """Largest window on which the Picard map is guaranteed to be a contraction.

    ``min( 1/((M+1)(1 + 2 C0 (M+1) fbar(M+1))), 1/(2(1 + C1 (M+1)^2 fbar(M+1))) )``
    """
    if M < 0:
        raise ValueError("M must be nonnegative")
    r = M + 1.0
    fb = float(fbar(r))
    return min(1.0 / (r * (1.0 + 2.0 * C0 * r * fb)), 0.5 / (1.0 + C1 * r * r * fb))


def blowup_monitor(u, ut, grid: SpectralGrid, s: float = 2.0, p: float = 2.0) -> float:
    """``||u||_{Y^{s,p}} + ||u||_inf + ||u_t||_{Y^{s,p}} + ||u_t||_inf``; inf when non-finite."""
    u = u.values if isinstance(u, SpectralField) else np.asarray(u)
    ut = ut.values if isinstance(ut, SpectralField) else np.asarray(ut)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(ut))):
        return math.inf
    norms = NormSuite(grid, s, p)
    return norms.ysp_linf(u) + norms.ysp_linf(ut)


def data_size(phi, psi, norms: NormSuite) -> float:
    """``M = ||phi||_{Y^{s,p}} + ||phi||_inf + ||psi||_{Y^{s,p}} + ||psi||_inf``."""
    return norms.ysp_linf(phi) + norms.ysp_linf(psi)


# problem, controls, records


@dataclass
class NonlinearProblem:
    L0: OperatorSymbol
    L1: OperatorSymbol
    L2: OperatorSymbol
    alpha: NonlocalKernel
    beta: NonlocalKernel
    phi: SpectralField
    psi: SpectralField
    nonlinearity: Nonlinearity
    s: float = 2.0
    p: float = 2.0
    force: bool = False

    @property
    def grid(self) -> SpectralGrid:
        return self.phi.grid

    @property
    def has_kernels(self) -> bool:
        return not (self.alpha.is_zero and self.beta.is_zero)

    def as_linear(self) -> LinearProblem:
        return LinearProblem(self.L0, self.L1, self.L2, self.alpha, self.beta, self.phi, self.psi,
                             s=self.s, p=self.p, force=self.force)


@dataclass
class NonlinearControls:
    tol_fp: float = 1e-10
    n_t: int = 33
    C0: float = 1.0
    C1: float = 1.0
    max_iter: int = 50
    blowup_ceiling: float = 1e8
    max_windows: int = 10_000
    window: float | None = None
    shrink_floor: float = 1e-8
    nonconvergence_patience: int = 3
    refine: int = 4
    nq_inner: int = DEFAULT_NQ

    def __post_init__(self):
        if self.n_t < 3 or self.n_t % 2 == 0:
            raise ValueError("n_t must be odd and >= 3")
        if self.refine < 2 or self.refine % 2:
            raise ValueError("refine must be even and >= 2")


@dataclass
class WindowRecord:
    index: int
    t_start: float
    length: float
    iterations: int
    differences: list
    ratios: list
    radius: float
    ball_ok: bool
    monitor: float
    shrinks: int = 0

    @property
    def final_ratio(self) -> float:
        return self.ratios[-1] if self.ratios else math.nan


@dataclass
class NonlinearRun:
    times: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    windows: list
    termination: str
    blowup_time: float | None = None
    message: str = ""
    grid: SpectralGrid | None = None

    @property
    def window_length(self) -> float:
        return self.windows[0].length if self.windows else math.nan

    @property
    def radius(self) -> float:
        return self.windows[0].radius if self.windows else math.nan

    @property
    def windows_completed(self) -> int:
        return len(self.windows)

    @property
    def ratios(self) -> list:
        return [r for w in self.windows for r in w.ratios]

    def at(self, t: float, atol: float = 1e-12):
        """Physical ``(u, u_t)`` at a stored node time."""
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > atol * max(1.0, abs(t)):
            raise KeyError(f"t={t} is not a stored node")
        return self.u[i], self.ut[i]


# one window


@dataclass(eq=False)
class WindowProblem:
    """Data and cached tables for Picard iteration on one window."""

    grid: SpectralGrid
    prop: PropagatorTable
    nonlinearity: Nonlinearity
    phi_hat: np.ndarray
    psi_hat: np.ndarray
    length: float
    t_start: float = 0.0
    n_t: int = 33
    refine: int = 4
    alpha: NonlocalKernel | None = None
    beta: NonlocalKernel | None = None
    determinant: DeterminantTable | None = None
    nq_inner: int = DEFAULT_NQ
    _tables: dict = field(default_factory=dict, repr=False)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_t)

    @property
    def has_kernels(self) -> bool:
        return self.alpha is not None and not (self.alpha.is_zero and self.beta.is_zero)

    def tables(self):
        if not self._tables:
            fine = np.linspace(0.0, self.length, self.refine * (self.n_t - 1) + 1)
            self._tables.update(
                fine=fine,
                Cf=self.prop.cos(fine), Sf=self.prop.sin(fine),
                C=self.prop.cos(self.nodes), S=self.prop.sin(self.nodes), QS=self.prop.qsin(self.nodes),
            )
        return self._tables

    def free_evolution(self):
        """Frequency-space trajectory of the source-free problem with classical data."""
        tb = self.tables()
        return (tb["C"] * self.phi_hat + tb["S"] * self.psi_hat,
                -tb["QS"] * self.phi_hat + tb["C"] * self.psi_hat)


def picard_map(u: np.ndarray, w: WindowProblem):
    """One application of ``G``: physical trajectory ``u`` -> ``(G(u), d/dt G(u))``.

    ``u`` has the window's time nodes on its first axis. Returns physical
    arrays of the same shape.
    """
    grid, prop, tb = w.grid, w.prop, w.tables()
    nodes = w.nodes
    fu = w.nonlinearity(u, w.t_start + nodes.reshape((-1,) + (1,) * grid.n), grid.mesh)
    F = prop.L * grid.forward(np.asarray(fu, dtype=complex))
    spline = CubicSpline(nodes, F, axis=0)

    if w.has_kernels:
        f1, f2 = build_rhs(w.alpha, w.beta, prop, spline, w.phi_hat, w.psi_hat, w.nq_inner)
        u0, u1 = solve_initial_pair(w.determinant, f1, f2)
    else:
        u0, u1 = w.phi_hat, w.psi_hat

    # S(t-s) = S(t)C(s) - C(t)S(s),  C(t-s) = C(t)C(s) + Q S(t)S(s)
    Ff = spline(tb["fine"])
    h = tb["fine"][1] - tb["fine"][0]
    IC = cumulative_simpson_even(tb["Cf"] * Ff, h)[:: w.refine // 2]
    IS = cumulative_simpson_even(tb["Sf"] * Ff, h)[:: w.refine // 2]
    C, S, QS = tb["C"], tb["S"], tb["QS"]
    uh = C * u0 + S * u1 + S * IC - C * IS
    uth = -QS * u0 + C * u1 + C * IC + QS * IS
    return grid.inverse(uh), grid.inverse(uth)


def trajectory_norm(v: np.ndarray, norms: NormSuite) -> float:
    """``max_t ||v||_{Y^{s,p}} + max_t ||v||_inf`` over the nodes."""
    if not np.all(np.isfinite(v)):
        return math.inf
    return max(norms.ysp(x) for x in v) + float(np.max(np.abs(v)))


@dataclass
class FixedPoint:
    u: np.ndarray
    ut: np.ndarray
    iterations: int
    differences: list
    ratios: list
    ball_ok: bool
    converged: bool
    reason: str = ""


def iterate_window(w: WindowProblem, controls: NonlinearControls, norms: NormSuite,
                   radius: float, initial: np.ndarray | None = None) -> FixedPoint:
    """Picard iteration to ``tol_fp``; stops early on sustained non-contraction."""
    if initial is None:
        uh, _ = w.free_evolution()
        u = w.grid.inverse(uh)
    else:
        u = np.asarray(initial, dtype=complex)
    diffs, ratios = [], []
    ball_ok = True
    bad_streak = 0
    ut = np.zeros_like(u)
    noise = 1e3 * np.finfo(float).eps
    for k in range(1, controls.max_iter + 1):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                u_new, ut = picard_map(u, w)
        except PropagatorOverflowError:
            return FixedPoint(u, ut, k, diffs, ratios, ball_ok, False, "overflow")
        d = trajectory_norm(u_new - u, norms)
        size = trajectory_norm(u_new, norms)
        if not math.isfinite(d):
            return FixedPoint(u, ut, k, diffs, ratios, ball_ok, False, "non-finite iterate")
        ball_ok = ball_ok and size <= radius * (1 + 1e-12)
        diffs.append(d)
        if len(diffs) >= 2 and diffs[-2] > noise * (1.0 + size):
            ratios.append(d / diffs[-2])
            bad_streak = bad_streak + 1 if ratios[-1] >= 1.0 else 0
        u = u_new
        if d < controls.tol_fp:
            return FixedPoint(u, ut, k, diffs, ratios, ball_ok, True)
        if bad_streak >= controls.nonconvergence_patience:
            return FixedPoint(u, ut, k, diffs, ratios, ball_ok, False, "non-contraction")
    return FixedPoint(u, ut, controls.max_iter, diffs, ratios, ball_ok, False, "iteration limit")


def continuation_step(end_state, w: WindowProblem, length: float) -> WindowProblem:
    """Next window from the physical end state ``(u(T), u_t(T))`` with classical data."""
    u_end, ut_end = end_state
    if not (np.all(np.isfinite(u_end)) and np.all(np.isfinite(ut_end))):
        raise NonFiniteStateError("cannot continue from a non-finite end state")
    return WindowProblem(
        grid=w.grid, prop=w.prop, nonlinearity=w.nonlinearity,
        phi_hat=w.grid.forward(np.asarray(u_end, dtype=complex)),
        psi_hat=w.grid.forward(np.asarray(ut_end, dtype=complex)),
        length=length, t_start=w.t_start + w.length, n_t=w.n_t, refine=w.refine,
        nq_inner=w.nq_inner,
    )


def solve_nonlinear(problem: NonlinearProblem, horizon: float,
                    controls: NonlinearControls | None = None, check: bool = True) -> NonlinearRun:
    """Windowed fixed-point solve up to ``horizon`` or until blow-up is flagged.

    With nonzero kernels the first window spans the kernel horizon so the
    integral conditions can be imposed; its length is not shrunk. Later
    windows use ``max_window`` (or the fixed ``controls.window``), halved on
    non-contraction down to ``controls.shrink_floor``.
    """
    controls = controls or NonlinearControls()
    grid = problem.grid
    if check:
        check_problem(problem.as_linear())
    norms = NormSuite(grid, problem.s, problem.p)
    prop = PropagatorTable.from_symbols(problem.L0, problem.L1, problem.L2, grid)
    fbar = problem.nonlinearity.fbar

    def planned_length(phi_like, psi_like, t_now):
        if controls.window is not None:
            L = controls.window
        else:
            L = max_window(data_size(phi_like, psi_like, norms), controls.C0, controls.C1, fbar)
        return min(L, horizon - t_now)

    phi, psi = problem.phi.values, problem.psi.values
    times, us, uts, records = [], [], [], []
    termination, blowup_time, message = "horizon_reached", None, ""

    if problem.has_kernels:
        first_len = problem.alpha.horizon
        det = build_determinant(problem.alpha, problem.beta, prop, grid)
        w = WindowProblem(grid, prop, problem.nonlinearity, to_frequency(problem.phi).values,
                          to_frequency(problem.psi).values, first_len, 0.0, controls.n_t,
                          controls.refine, problem.alpha, problem.beta, det, controls.nq_inner)
    else:
        w = WindowProblem(grid, prop, problem.nonlinearity, to_frequency(problem.phi).values,
                          to_frequency(problem.psi).values, planned_length(phi, psi, 0.0), 0.0,
                          controls.n_t, controls.refine, nq_inner=controls.nq_inner)
    radius = data_size(phi, psi, norms) + 1.0

    while True:
        shrinks = 0
        while True:
            fp = iterate_window(w, controls, norms, radius)
            if fp.converged or w.has_kernels:
                break
            if w.length / 2 < controls.shrink_floor:
                break
            log.info("window at t=%g: %s, halving %g", w.t_start, fp.reason, w.length)
            w = WindowProblem(grid, prop, w.nonlinearity, w.phi_hat, w.psi_hat, w.length / 2,
                              w.t_start, w.n_t, w.refine, nq_inner=w.nq_inner)
            shrinks += 1
        if not fp.converged:
            termination = "blow_up_detected"
            blowup_time = w.t_start
            message = f"Picard iteration failed at t={w.t_start:g} ({fp.reason})"
            break

        monitors = np.array([blowup_monitor(a, b, grid, problem.s, problem.p) for a, b in zip(fp.u, fp.ut)])
        over = np.nonzero(~(monitors <= controls.blowup_ceiling))[0]
        keep = slice(0 if not times else 1, None if over.size == 0 else over[0] + 1)
        node_times = w.t_start + w.nodes
        times.extend(node_times[keep])
        us.extend(fp.u[keep])
        uts.extend(fp.ut[keep])
        records.append(WindowRecord(len(records), w.t_start, w.length, fp.iterations, fp.differences,
                                    fp.ratios, radius, fp.ball_ok, float(np.max(monitors[keep])), shrinks))
        if over.size:
            termination = "blow_up_detected"
            blowup_time = float(node_times[over[0]])
            message = f"monitor {monitors[over[0]]:.6g} exceeded ceiling {controls.blowup_ceiling:g}"
            break
        t_now = w.t_start + w.length
        if t_now >= horizon * (1 - 1e-12):
            break
        if len(records) >= controls.max_windows:
            termination = "max_windows"
            break
        end = (fp.u[-1], fp.ut[-1])
        radius = data_size(end[0], end[1], norms) + 1.0
        w = continuation_step(end, w, planned_length(end[0], end[1], t_now))

    times = np.asarray(times, dtype=float)
    if not us:
        empty = np.empty((0,) + grid.shape, dtype=complex)
        return NonlinearRun(times, empty, empty.copy(), records, termination, blowup_time, message, grid)
    u = np.asarray(us)
    ut = np.asarray(uts)
    if problem.has_kernels and horizon < times[-1]:
        mask = times <= horizon * (1 + 1e-12)
        times, u, ut = times[mask], u[mask], ut[mask]
    # emitted values are finite by construction; enforce it anyway
    finite = np.all(np.isfinite(u.reshape(len(times), -1)), axis=1) & np.all(
        np.isfinite(ut.reshape(len(times), -1)), axis=1)
    if not finite.all():
        cut = int(np.argmin(finite))
        times, u, ut = times[:cut], u[:cut], ut[:cut]
        termination = "blow_up_detected"
        blowup_time = blowup_time if blowup_time is not None else float(times[-1]) if len(times) else 0.0
    return NonlinearRun(times, u, ut, records, termination, blowup_time, message, grid)
