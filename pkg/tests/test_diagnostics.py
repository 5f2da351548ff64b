import numpy as np
import pytest
from hypothesis import given, strategies as st

from boussinesq_nonlocal.diagnostics import (
    Trial,
    calibrated_constant,
    check_exponents,
    classical_limit_error,
    composition_check,
    determinant_oracle_error,
    identities_suite,
    manufactured_residual,
    nirenberg_check,
    nirenberg_sides,
    pde_residual,
    random_trials,
    spectral_derivative,
    superposition_error,
    trig_identity_error,
    verify_uniform_estimate,
    verify_sobolev_estimate,
    zero_kernel_determinant_is_one,
)
from boussinesq_nonlocal.grid import make_grid
from boussinesq_nonlocal.linear import LinearProblem, SeparableSource, apply_S1, solve_linear
from boussinesq_nonlocal.nonlinear import register_nonlinearity
from boussinesq_nonlocal.nonlocal_conditions import NonlocalKernel, admissibility_margin
from boussinesq_nonlocal.norms import NormSuite
from boussinesq_nonlocal.symbols import preset_symbol

CLASSICAL = preset_symbol("classical_boussinesq_1")


def zero_trial(**kw):
    base = dict(phi=(0.0, (0.0,), 1.0), psi=(0.0, (0.0,), 1.0), source=None, omega=0.0,
                alpha=("zero", None, None), beta=("zero", None, None))
    base.update(kw)
    return Trial(**base)


class TestTrials:
    def test_seeded(self):
        assert random_trials(5, seed=3) == random_trials(5, seed=3)
        assert random_trials(5, seed=3) != random_trials(5, seed=4)

    def test_all_admissible(self):
        g = make_grid(1, 16, 8.0)
        for tr in random_trials(40, seed=1):
            p = tr.realize(g, CLASSICAL, (0.0, 1.0))
            assert admissibility_margin(p.alpha, p.beta) > 0.6


class TestEstimates:
    def test_zero_data_ratio_is_zero(self):
        rep = verify_uniform_estimate([zero_trial()], refine=False, points=32)
        assert rep.max_ratio == 0.0 and rep.lhs[0] == 0.0 and rep.rhs[0] == 0.0

    def test_single_mode_closed_form(self):
        # phi = A cos(kx) on a box, zero kernels: |u|_inf + |u_t|_inf peaks at max_t
        # A(|cos wt| + w |sin wt|) over the sampled times
        g = make_grid(1, 32, np.pi)
        k, A = 2, 0.7
        w = np.sqrt(k * k / (1 + k * k))
        times = np.linspace(0, 1, 11)
        p = LinearProblem(*CLASSICAL, NonlocalKernel.zero(1.0), NonlocalKernel.zero(1.0),
                          g.sample(lambda x: A * np.cos(k * x)), g.zeros(), times=tuple(times))
        sol = solve_linear(p, residuals=False)
        ns = NormSuite(g)
        lhs = max(ns.linf(u.values) + ns.linf(ut.values) for u, ut in zip(sol.u, sol.ut))
        want = max(A * (abs(np.cos(w * t)) + w * abs(np.sin(w * t))) for t in times)
        assert lhs == pytest.approx(want, rel=1e-12)

    def test_phi_only_reduces_to_s1(self):
        tr = zero_trial(phi=(0.8, (0.5,), 0.9), alpha=("atoms", (0.3,), (0.1,)))
        g = make_grid(1, 64, 8.0)
        times = np.linspace(0, 1, 11)
        rep = verify_sobolev_estimate([tr], refine=False, points=64)
        p = tr.realize(g, CLASSICAL, times)
        ns = NormSuite(g)
        S1 = max(ns.ysp(apply_S1(p, p.phi, t).values) for t in times)
        # left side carries u_t too, so the S1 ratio is a lower bound
        assert rep.max_ratio >= S1 / ns.ysp(p.phi.values) - 1e-12

    def test_small_family_finite_and_refinable(self):
        rep = verify_uniform_estimate(8, seed=2, points=32)
        assert np.all(np.isfinite(rep.ratios)) and np.all(rep.ratios >= 0)
        assert rep.refined_max_ratio is not None and rep.relative_change is not None

    def test_sobolev_family(self):
        rep = verify_sobolev_estimate(8, seed=5, points=32)
        assert np.isfinite(rep.max_ratio) and rep.stable


class TestNirenberg:
    def test_identity_case(self, grid1):
        u = grid1.sample(lambda x: np.cos(3 * x))
        lhs, rhs, ok = nirenberg_check(u, 0, 2, 2.0, 2.0, 2.0, 0.0, C_est=1.0)
        assert lhs == pytest.approx(rhs) and ok

    def test_gaussian_holds_with_calibrated_constant(self):
        g = make_grid(1, 128, 8.0)
        u = g.sample(lambda x: np.exp(-(x - 0.3) ** 2 / 1.2))
        lhs, rhs, ok = nirenberg_check(u, 1, 2, 2.0, 2.0, 2.0, 0.5)
        assert ok and lhs > 0

    def test_exponent_relation_enforced(self, grid1):
        u = grid1.sample(np.cos)
        with pytest.raises(ValueError):
            nirenberg_check(u, 1, 2, 2.0, 2.0, 3.0, 0.5)
        with pytest.raises(ValueError):
            check_exponents(1, 2, 2.0, 2.0, 2.0, 0.2, 1)

    def test_spectral_derivative(self, grid1):
        u = grid1.sample(np.sin).values
        np.testing.assert_allclose(spectral_derivative(grid1, u, (1,)), np.cos(grid1.coordinates[0]), atol=1e-13)
        np.testing.assert_allclose(spectral_derivative(grid1, u, (2,)), -u, atol=1e-13)

    def test_sides_for_l2_interpolation_obey_cauchy_schwarz(self):
        # ||u'||_2^2 = -<u, u''> <= ||u||_2 ||u''||_2, so the constant 1 already works
        g = make_grid(1, 128, 8.0)
        for c in (0.5, 1.0, 2.0):
            lhs, rhs = nirenberg_sides(g.sample(lambda x: np.exp(-x * x / c)), 1, 2, 2.0, 2.0, 2.0, 0.5)
            assert lhs <= rhs * (1 + 1e-12)

    def test_calibration_is_cached(self):
        g = make_grid(1, 64, 8.0)
        a = calibrated_constant(g, 1, 2, 2.0, 2.0, 2.0, 0.5)
        assert calibrated_constant(g, 1, 2, 2.0, 2.0, 2.0, 0.5) == a


class TestComposition:
    @given(st.sampled_from(["quadratic", "cubic", "sine", "linear", "zero"]), st.integers(0, 2**31), st.floats(0.1, 3))
    def test_bound_on_random_fields(self, name, seed, scale):
        g = make_grid(1, 32, 2.0)
        u = g.field(scale * np.random.default_rng(seed).normal(size=32))
        _, _, ok = composition_check(register_nonlinearity(name), u)
        assert ok


class TestManufactured:
    def base(self, T=1.0, alpha=None):
        g = make_grid(1, 32, np.pi)
        return LinearProblem(*CLASSICAL, alpha or NonlocalKernel.zero(T), NonlocalKernel.zero(T),
                             g.zeros(), g.zeros(), times=tuple(np.linspace(0, T, 5)))

    def test_free_mode(self):
        k = 2
        w = np.sqrt(k * k / (1 + k * k))
        rep = manufactured_residual(self.base(), lambda t, x: np.cos(k * x) * np.cos(w * t),
                                    lambda t, x: -w * np.cos(k * x) * np.sin(w * t),
                                    lambda t, x: -w * w * np.cos(k * x) * np.cos(w * t), nodes_sequence=())
        assert rep.error <= 1e-9

    def test_zero_solution(self):
        z = lambda t, x: 0 * x
        rep = manufactured_residual(self.base(), z, z, z, nodes_sequence=())
        assert rep.error == 0.0

    def test_polynomial_in_time_order(self):
        k = 2
        rep = manufactured_residual(self.base(), lambda t, x: (t + t**3) * np.cos(k * x),
                                    lambda t, x: (1 + 3 * t * t) * np.cos(k * x),
                                    lambda t, x: 6 * t * np.cos(k * x))
        assert rep.error < 1e-9
        assert np.min(rep.observed_orders) >= 3.5

    def test_with_nonlocal_kernel(self):
        k = 1
        alpha = NonlocalKernel.from_function(1.0, lambda s: 0.2 * np.exp(-s))
        rep = manufactured_residual(self.base(alpha=alpha), lambda t, x: np.exp(-t) * np.sin(k * x),
                                    lambda t, x: -np.exp(-t) * np.sin(k * x),
                                    lambda t, x: np.exp(-t) * np.sin(k * x), nodes_sequence=())
        assert rep.error < 1e-8

    def test_pde_residual_of_forced_solution(self, grid1):
        src = SeparableSource(grid1, grid1.sample(lambda x: np.exp(np.cos(x))), np.cos)
        p = LinearProblem(*CLASSICAL, NonlocalKernel.atoms(1.0, [0.5], [0.1]), NonlocalKernel.zero(1.0),
                          grid1.sample(np.sin), grid1.zeros(), src, times=(0.0,))
        evo = solve_linear(p, residuals=False).evolution
        assert pde_residual(evo, [0.2, 0.5, 0.8]) < 1e-5


class TestIdentities:
    def test_trig_identity(self):
        assert trig_identity_error(2000, seed=1) < 1e-9

    def test_determinant_oracle(self):
        assert determinant_oracle_error(50, seed=1) < 1e-9

    def test_zero_kernels(self):
        assert zero_kernel_determinant_is_one()

    def test_superposition(self):
        assert superposition_error(3) < 1e-12

    def test_classical_limit(self):
        assert classical_limit_error(ks=(1,), n_times=6) < 1e-9

    def test_suite_all_pass(self):
        results = identities_suite(seed=0, trials=50)
        assert {r.name for r in results} >= {"trig_identity", "determinant_expansion", "classical_limit"}
        assert all(r.passed for r in results)
