import numpy as np
import pytest
from hypothesis import given, strategies as st

from boussinesq_nonlocal.errors import InadmissibleProblemError
from boussinesq_nonlocal.grid import make_grid, to_frequency
from boussinesq_nonlocal.linear import LinearProblem, solve_linear
from boussinesq_nonlocal.nonlinear import (
    NonFiniteStateError,
    NonlinearControls,
    NonlinearProblem,
    WindowProblem,
    blowup_monitor,
    continuation_step,
    iterate_window,
    max_window,
    parse_nonlinearity,
    picard_map,
    register_nonlinearity,
    solve_nonlinear,
)
from boussinesq_nonlocal.nonlocal_conditions import NonlocalKernel
from boussinesq_nonlocal.norms import NormSuite
from boussinesq_nonlocal.propagator import PropagatorTable
from boussinesq_nonlocal.symbols import preset_symbol

from oracles import rk4_spectral

CLASSICAL = preset_symbol("classical_boussinesq_1")


def bump(grid, amp=0.1, center=0.0, width=0.6):
    return grid.sample(lambda x: amp * np.exp(-((x - center) ** 2) / (2 * width * width)))


def nl_problem(grid, f, phi=None, psi=None, alpha=None, beta=None, T=1.0):
    return NonlinearProblem(*CLASSICAL,
                            alpha if alpha is not None else NonlocalKernel.zero(T),
                            beta if beta is not None else NonlocalKernel.zero(T),
                            phi if phi is not None else bump(grid),
                            psi if psi is not None else grid.zeros(),
                            f if not isinstance(f, str) else parse_nonlinearity(f))


def window(grid, f, phi, psi, length, n_t=33):
    prop = PropagatorTable.from_symbols(*CLASSICAL, grid)
    return WindowProblem(grid, prop, f, to_frequency(phi).values, to_frequency(psi).values, length, n_t=n_t)


class TestRegistry:
    def test_zero(self):
        f = register_nonlinearity("zero")
        assert f.fbar(10.0) == 0.0 and f.is_zero
        assert not np.any(f(np.ones(3)))

    def test_sine_majorant(self):
        f = register_nonlinearity("sine")
        assert all(f.fbar(r) == 1.0 for r in (0.0, 1.0, 100.0))

    def test_cubic_majorant(self):
        f = register_nonlinearity("cubic")
        assert f.fbar(1.0) == 6.0 and f.fbar(3.0) == 27.0

    def test_quadratic_majorant(self):
        f = register_nonlinearity("quadratic")
        assert f.fbar(0.5) == 2.0 and f.fbar(4.0) == 8.0

    def test_parse_with_parameter(self):
        f = parse_nonlinearity("linear(0.5)")
        assert f(np.array([2.0]))[0] == 1.0 and f.fbar(3.0) == 0.5

    def test_unknown(self):
        with pytest.raises(ValueError):
            register_nonlinearity("exp")

    @pytest.mark.parametrize("name", ["quadratic", "cubic", "sine", "linear"])
    def test_derivatives_match_finite_differences(self, name):
        f = register_nonlinearity(name)
        x = np.linspace(-2, 2, 11)
        h = 1e-5
        for lo, hi in ((f.fn, f.d1), (f.d1, f.d2), (f.d2, f.d3)):
            np.testing.assert_allclose((lo(x + h) - lo(x - h)) / (2 * h), hi(x), atol=1e-6)

    @given(st.sampled_from(["quadratic", "cubic", "sine", "linear", "zero"]), st.floats(0, 10), st.floats(0, 10))
    def test_majorant_bounds_and_monotone(self, name, r1, r2):
        f = register_nonlinearity(name)
        lo, hi = sorted((r1, r2))
        assert f.fbar(lo) <= f.fbar(hi)
        x = np.linspace(-hi, hi, 201)
        assert np.max(np.abs(f.d1(x))) <= f.fbar(hi) + 1e-12
        assert np.max(np.abs(f.d2(x))) <= f.fbar(hi) + 1e-12
        assert f.fbar(hi) >= abs(f.d1(np.zeros(1))[0]) - 1e-15


class TestMaxWindow:
    def test_unit_data(self):
        # 1/(1 * 3) and 1/(2 * 2): the second bound has (M+1)^2 = 1
        assert max_window(0.0, 1.0, 1.0, lambda r: 1.0) == pytest.approx(1 / 4)

    def test_zero_nonlinearity(self):
        assert max_window(3.0, 1.0, 1.0, lambda r: 0.0) == pytest.approx(min(1 / 4, 1 / 2))
        assert max_window(0.0, 1.0, 1.0, lambda r: 0.0) == pytest.approx(1 / 2)

    def test_second_example(self):
        assert max_window(1.0, 1.0, 1.0, lambda r: 2 * r) == pytest.approx(1 / 34)

    def test_negative_size(self):
        with pytest.raises(ValueError):
            max_window(-1.0, 1.0, 1.0, lambda r: 1.0)

    @given(st.floats(0, 50), st.floats(0, 50), st.floats(1, 5))
    def test_decreasing_in_data_size(self, a, b, c):
        f = register_nonlinearity("cubic").fbar
        lo, hi = sorted((a, b))
        assert max_window(hi, c, c, f) <= max_window(lo, c, c, f)


class TestMonitor:
    def test_zero(self, grid1):
        assert blowup_monitor(grid1.zeros(), grid1.zeros(), grid1) == 0.0

    def test_constant(self):
        g = make_grid(1, 16, 2.0)
        c = 1.5
        # Y^{2,2} of a constant is its L^2 norm, |c| sqrt(2L)
        assert blowup_monitor(np.full(16, c), np.zeros(16), g) == pytest.approx(c * 2.0 + c)

    def test_homogeneous(self, grid1):
        u = grid1.sample(lambda x: np.cos(2 * x)).values
        assert blowup_monitor(3 * u, 0 * u, grid1) == pytest.approx(3 * blowup_monitor(u, 0 * u, grid1))

    def test_non_finite(self, grid1):
        u = np.zeros(32)
        u[3] = np.nan
        assert blowup_monitor(u, u, grid1) == np.inf


class TestPicardMap:
    def test_zero_nonlinearity_is_linear_solution(self, grid1, rng):
        f = register_nonlinearity("zero")
        phi, psi = bump(grid1), bump(grid1, 0.05, 1.0)
        w = window(grid1, f, phi, psi, 0.5)
        u1, _ = picard_map(rng.normal(size=(33, 32)), w)
        u2, ut2 = picard_map(np.zeros((33, 32)), w)
        np.testing.assert_allclose(u1, u2, atol=1e-15)
        lin = solve_linear(LinearProblem(*CLASSICAL, NonlocalKernel.zero(0.5), NonlocalKernel.zero(0.5),
                                         phi, psi, times=tuple(w.nodes)), check=False, residuals=False)
        np.testing.assert_allclose(u2, [x.values for x in lin.u], atol=1e-12)
        np.testing.assert_allclose(ut2, [x.values for x in lin.ut], atol=1e-12)

    def test_zero_nonlinearity_converges_in_one_step(self, grid1):
        w = window(grid1, register_nonlinearity("zero"), bump(grid1), grid1.zeros(), 0.3)
        fp = iterate_window(w, NonlinearControls(), NormSuite(grid1), radius=10.0)
        assert fp.converged and fp.iterations == 1

    def test_linear_nonlinearity_single_mode(self, grid1):
        # f(u) = c u: each mode obeys u_tt + (Q - c L) u = 0
        c = 0.5
        k = 2
        w = window(grid1, register_nonlinearity("linear", c), grid1.sample(lambda x: np.cos(k * x)), grid1.zeros(), 0.05)
        fp = iterate_window(w, NonlinearControls(), NormSuite(grid1), radius=100.0)
        q = k * k / (1 + k * k)
        r = np.sqrt(q - c * q)
        x = grid1.coordinates[0]
        want = np.cos(r * w.nodes)[:, None] * np.cos(k * x)
        assert np.max(np.abs(fp.u - want)) < 1e-7

    def test_quadratic_small_data_contracts(self, grid1):
        f = register_nonlinearity("quadratic")
        phi = bump(grid1, 0.05)
        ns = NormSuite(grid1)
        M = ns.ysp_linf(phi.values)
        w = window(grid1, f, phi, grid1.zeros(), max_window(M, 1.0, 1.0, f.fbar))
        fp = iterate_window(w, NonlinearControls(), ns, radius=M + 1)
        assert fp.converged and fp.ball_ok
        assert fp.ratios and max(fp.ratios) <= 0.5 + 0.05

    def test_unique_fixed_point_from_two_starts(self, grid1):
        f = register_nonlinearity("quadratic")
        phi = bump(grid1, 0.2)
        w = window(grid1, f, phi, grid1.zeros(), 0.1)
        ns = NormSuite(grid1)
        controls = NonlinearControls()
        a = iterate_window(w, controls, ns, 10.0)
        b = iterate_window(w, controls, ns, 10.0, initial=np.zeros((33, 32)))
        assert np.max(np.abs(a.u - b.u)) <= 10 * controls.tol_fp


class TestContinuation:
    def test_non_finite_end_state(self, grid1):
        w = window(grid1, register_nonlinearity("zero"), bump(grid1), grid1.zeros(), 0.1)
        bad = np.full(32, np.inf)
        with pytest.raises(NonFiniteStateError):
            continuation_step((bad, bad), w, 0.1)

    def test_next_window_starts_from_end_state(self, grid1):
        f = register_nonlinearity("quadratic")
        w = window(grid1, f, bump(grid1), grid1.zeros(), 0.1)
        fp = iterate_window(w, NonlinearControls(), NormSuite(grid1), 10.0)
        nxt = continuation_step((fp.u[-1], fp.ut[-1]), w, 0.1)
        assert nxt.t_start == pytest.approx(0.1) and not nxt.has_kernels
        fp2 = iterate_window(nxt, NonlinearControls(), NormSuite(grid1), 10.0)
        assert np.max(np.abs(fp2.u[0] - fp.u[-1])) < 1e-12
        assert np.max(np.abs(fp2.ut[0] - fp.ut[-1])) < 1e-9

    @pytest.mark.parametrize("name,tol", [("zero", 1e-9), ("quadratic", 1e-6)])
    def test_two_windows_equal_one(self, grid1, name, tol):
        prob = nl_problem(grid1, name, phi=bump(grid1, 0.3), psi=bump(grid1, 0.1, 0.5))
        one = solve_nonlinear(prob, 0.2, NonlinearControls(window=0.2))
        two = solve_nonlinear(prob, 0.2, NonlinearControls(window=0.1))
        for t in two.times:
            try:
                a, _ = one.at(t)
            except KeyError:
                continue
            b, _ = two.at(t)
            assert np.max(np.abs(a - b)) <= tol


class TestSolveNonlinear:
    def test_zero_nonlinearity_matches_linear_solver(self, grid1):
        phi = bump(grid1, 0.5)
        alpha = NonlocalKernel.atoms(1.0, [0.4], [0.1])
        prob = nl_problem(grid1, "zero", phi=phi, alpha=alpha)
        run = solve_nonlinear(prob, 1.0)
        lin = solve_linear(LinearProblem(*CLASSICAL, alpha, NonlocalKernel.zero(1.0), phi, grid1.zeros(),
                                         times=tuple(run.times[::8])), residuals=False)
        for t, u in zip(lin.times, lin.u):
            assert np.max(np.abs(run.at(t)[0] - u.values)) < 1e-10

    @pytest.mark.parametrize("name", ["linear(0.7)", "quadratic", "cubic"])
    def test_matches_rk4_oracle(self, name):
        grid = make_grid(1, 32, np.pi)
        phi, psi = bump(grid, 0.3, 0.2), bump(grid, 0.1, -0.5)
        prob = nl_problem(grid, name, phi=phi, psi=psi)
        run = solve_nonlinear(prob, 0.5, NonlinearControls(window=0.125))
        ref = rk4_spectral(grid, *CLASSICAL, prob.nonlinearity.fn, phi.values, psi.values, run.times[::8])
        assert np.max(np.abs(run.u[::8] - ref)) < 1e-5
        assert run.termination == "horizon_reached"

    def test_two_dimensional_rk4_oracle(self):
        grid = make_grid(2, 16, np.pi)
        L0, L1, L2 = preset_symbol("classical_boussinesq_2")
        phi = grid.sample(lambda x, y: 0.2 * np.exp(-(x * x + y * y)))
        prob = NonlinearProblem(L0, L1, L2, NonlocalKernel.zero(1.0), NonlocalKernel.zero(1.0), phi,
                                grid.zeros(), register_nonlinearity("quadratic"))
        run = solve_nonlinear(prob, 0.25, NonlinearControls(window=0.125))
        ref = rk4_spectral(grid, L0, L1, L2, prob.nonlinearity.fn, phi.values, np.zeros(grid.shape), [0.25])
        assert np.max(np.abs(run.u[-1] - ref[0])) < 1e-5

    def test_first_window_spans_kernel_horizon(self, grid1):
        alpha = NonlocalKernel.from_function(0.3, lambda s: 0.1 + 0 * s, 33)
        prob = nl_problem(grid1, "quadratic", alpha=alpha, T=0.3)
        run = solve_nonlinear(prob, 0.5, NonlinearControls(window=0.1))
        assert run.windows[0].length == pytest.approx(0.3)
        assert run.times[-1] == pytest.approx(0.5)

    def test_window_records(self, grid1):
        run = solve_nonlinear(nl_problem(grid1, "quadratic"), 0.3, NonlinearControls(window=0.1))
        assert run.windows_completed == 3
        assert all(w.iterations <= 50 for w in run.windows)
        assert np.all(np.diff(run.times) > 0)
        assert run.window_length == pytest.approx(0.1)

    def test_large_data_blows_up_finitely(self, grid1):
        prob = nl_problem(grid1, "quadratic", phi=bump(grid1, 20.0))
        run = solve_nonlinear(prob, 2.0, NonlinearControls(window=0.02, blowup_ceiling=1e4))
        assert run.termination == "blow_up_detected"
        assert run.blowup_time is not None and 0 < run.blowup_time < 2.0
        assert np.all(np.isfinite(run.u)) and np.all(np.isfinite(run.ut))

    def test_rejects_inadmissible_kernels(self, grid1):
        alpha = NonlocalKernel.atoms(1.0, [0.5], [-0.7])
        beta = NonlocalKernel.atoms(1.0, [0.3], [0.5])
        with pytest.raises(InadmissibleProblemError):
            solve_nonlinear(nl_problem(grid1, "quadratic", alpha=alpha, beta=beta), 1.0)

    def test_controls_validation(self):
        with pytest.raises(ValueError):
            NonlinearControls(n_t=32)
        with pytest.raises(ValueError):
            NonlinearControls(refine=3)
