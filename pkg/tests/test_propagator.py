import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from boussinesq_nonlocal.errors import PropagatorOverflowError
from boussinesq_nonlocal.propagator import (
    PropagatorTable,
    cos_prop,
    forcing,
    phi_kernel,
    sin_prop,
    u_prop,
    ut_prop,
)


def table(*Q, L=None):
    return PropagatorTable.from_values(np.array(Q, dtype=complex), L)


class TestCos:
    @pytest.mark.parametrize("t", [0.0, 0.3, 17.0])
    def test_zero_symbol(self, t):
        assert cos_prop(table(0.0), 0, t) == 1.0

    def test_half_period(self):
        assert cos_prop(table(1.0), 0, np.pi) == pytest.approx(-1.0, abs=1e-15)

    def test_negative_symbol_is_cosh(self):
        assert cos_prop(table(-1.0), 0, 1.0) == pytest.approx(math.cosh(1.0), rel=1e-14)


class TestSin:
    @pytest.mark.parametrize("t", [0.0, 0.3, 17.0])
    def test_zero_symbol_gives_t(self, t):
        assert sin_prop(table(0.0), 0, t) == pytest.approx(t, abs=1e-300)

    def test_quarter_period(self):
        assert sin_prop(table(1.0), 0, np.pi / 2) == pytest.approx(1.0)

    def test_q_four(self):
        assert sin_prop(table(4.0), 0, 1.0) == pytest.approx(math.sin(2.0) / 2.0, rel=1e-14)

    def test_negative_symbol_is_sinh(self):
        assert sin_prop(table(-4.0), 0, 1.0) == pytest.approx(math.sinh(2.0) / 2.0, rel=1e-14)


class TestBranches:
    def test_principal_root(self, rng):
        Q = rng.normal(size=50) + 1j * rng.normal(size=50)
        Q[:5] = -np.abs(Q[:5].real)
        tab = table(*Q)
        np.testing.assert_allclose(tab.sqrtQ**2, Q, rtol=1e-13)
        assert np.all(tab.sqrtQ.real >= 0)
        assert np.all(tab.sqrtQ[tab.sqrtQ.real == 0].imag >= 0)

    def test_sign_of_root_is_irrelevant(self, rng):
        Q = rng.normal(size=20) + 1j * rng.normal(size=20)
        a = PropagatorTable.from_values(Q)
        b = PropagatorTable(Q=a.Q, L=a.L, sqrtQ=-a.sqrtQ)
        t = np.linspace(0, 3, 7)
        np.testing.assert_allclose(a.cos(t), b.cos(t), rtol=1e-13)
        np.testing.assert_allclose(a.sin(t), b.sin(t), rtol=1e-13)

    @pytest.mark.parametrize("phase", [0.0, 0.5, 1.0, 2.0, np.pi])
    def test_series_agrees_at_switch(self, phase):
        sq = np.exp(1j * phase / 2)
        Q = sq * sq
        z = 1e-4
        inside = table(Q)
        t_in = z * (1 - 1e-9)
        t_out = z * (1 + 1e-9)
        c_in, c_out = inside.cos(t_in)[0], inside.cos(t_out)[0]
        s_in, s_out = inside.sin(t_in)[0], inside.sin(t_out)[0]
        assert abs(c_in - c_out) < 1e-12
        assert abs(s_in / t_in - s_out / t_out) < 1e-12

    def test_overflow_guard_names_mode_and_time(self):
        tab = table(1.0, -1.0)
        with pytest.raises(PropagatorOverflowError) as info:
            tab.cos(np.array([1.0, 800.0]))
        assert info.value.mode == (1,)
        assert info.value.t == 800.0

    def test_real_growth_below_guard_is_finite(self):
        assert np.isfinite(table(-1.0).cos(699.0)).all()

    def test_oscillatory_flag(self):
        assert table(0.0, 1.0, 2.5).oscillatory
        assert not table(1.0, -0.5).oscillatory
        assert not table(1.0 + 0.1j).oscillatory

    def test_pointwise_pairs_times_with_modes(self, rng):
        Q = rng.uniform(0, 4, size=30)
        t = rng.uniform(0, 5, size=30)
        tab = table(*Q)
        np.testing.assert_allclose(tab.cos(t, pointwise=True), np.diag(tab.cos(t)), rtol=1e-14)
        np.testing.assert_allclose(tab.sin(t, pointwise=True), np.diag(tab.sin(t)), rtol=1e-14)


class TestIdentities:
    @given(st.floats(1e-6, 100.0), st.floats(0.0, 20.0))
    def test_energy_identity_real(self, q, z):
        tab = table(q)
        t = z / math.sqrt(q)
        c, s = tab.cos(t)[0], tab.sin(t)[0]
        assert abs(c * c + q * s * s - 1) < 1e-10

    @given(st.floats(-4, 4), st.floats(-4, 4), st.floats(0.0, 5.0))
    def test_energy_identity_complex(self, a, b, t):
        Q = complex(a, b)
        if Q == 0:
            return
        tab = table(Q)
        c, s = tab.cos(t)[0], tab.sin(t)[0]
        scale = max(1.0, abs(c) ** 2, abs(Q * s * s))
        assert abs(c * c + Q * s * s - 1) < 1e-10 * scale

    @given(st.floats(0.01, 10.0), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 3.0))
    def test_ode_residual(self, q, u0, u1, t):
        tab = table(q)
        h = 1e-3

        def u(s):
            return tab.cos(s)[0] * u0 + tab.sin(s)[0] * u1

        utt = (-u(t + 2 * h) + 16 * u(t + h) - 30 * u(t) + 16 * u(t - h) - u(t - 2 * h)) / (12 * h * h)
        assert abs(utt + q * u(t)) < 1e-6 * (1 + abs(u0) + abs(u1)) * (1 + q)


class TestStateFormulas:
    def test_ut_at_zero_is_u1(self):
        assert ut_prop(table(2.0), 0, 0.0, 3.0, -1.5) == -1.5

    def test_ut_quarter_period(self):
        assert ut_prop(table(1.0), 0, np.pi / 2, 1.0, 0.0) == pytest.approx(-1.0)

    def test_ut_is_time_derivative(self, rng):
        h = 1e-4
        for _ in range(20):
            Q = complex(rng.uniform(-1, 4), rng.uniform(-1, 1))
            u0, u1 = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
            t = rng.uniform(0.2, 2.0)
            tab = table(Q)
            fd = (u_prop(tab, 0, t + h, u0, u1) - u_prop(tab, 0, t - h, u0, u1)) / (2 * h)
            assert abs(fd - ut_prop(tab, 0, t, u0, u1)) < 1e-6

    def test_duhamel_term_is_added(self):
        tab = table(1.0)
        assert u_prop(tab, 0, 0.0, 1.0, 0.0, duhamel=0.25) == pytest.approx(1.25)

    def test_whole_table_without_mode(self):
        tab = table(0.0, 1.0)
        np.testing.assert_allclose(u_prop(tab, None, 1.0, 1.0, 0.0), [1.0, np.cos(1.0)])


class TestSourceKernel:
    def test_zero_source(self):
        assert phi_kernel(table(2.0, L=1.0), 0, 1.0, 0.0) == 0

    def test_zero_symbol(self):
        assert phi_kernel(table(0.0, L=1.0), 0, 0.7, 2.0) == pytest.approx(1.4)

    def test_classical_value(self):
        q = 2 / 3
        got = phi_kernel(table(q, L=q), 0, 1.0, 1.0)
        assert got == pytest.approx(q * math.sin(math.sqrt(q)) / math.sqrt(q), rel=1e-14)

    def test_forcing_multiplies_by_l(self):
        tab = table(1.0, 2.0, L=[0.5, 3.0])
        np.testing.assert_allclose(forcing(tab, np.array([2.0, 1.0])), [1.0, 3.0])

    def test_from_symbols(self, grid1, classical1):
        tab = PropagatorTable.from_symbols(*classical1, grid1)
        k2 = grid1.xi_norm2
        np.testing.assert_allclose(tab.Q, k2 / (1 + k2))
        assert tab.oscillatory
