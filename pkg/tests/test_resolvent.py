import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nearcrit.errors import InvalidParameter, InvalidRegime
from nearcrit.kernels import make_exponential_kernel, make_gamma2_kernel, scale_kernel
from nearcrit.resolvent import (default_alpha, fourier_residual, increment_energy, l2_distance_on_unit,
                                limit_density, malthusian_parameter, solve_on_grid, solve_resolvent)
from oracles import exp_resolvent_rescaled, gamma2_resolvent_rescaled


@pytest.mark.parametrize("regime", ["-", "0", "+"])
def test_exponential_closed_form(regime):
    sk = scale_kernel(make_exponential_kernel(1.3), regime, 16)
    rt = solve_resolvent(sk, 256)
    exact = exp_resolvent_rescaled(1.3, sk.a_T, 16, rt.grid)
    assert np.max(np.abs(rt.psi_values - exact)) <= 1e-6


@pytest.mark.parametrize("regime", ["-", "0", "+"])
def test_gamma2_closed_form(regime):
    sk = scale_kernel(make_gamma2_kernel(0.8), regime, 16)
    rt = solve_resolvent(sk, 256)
    exact = gamma2_resolvent_rescaled(0.8, sk.a_T, 16, rt.grid)
    assert np.max(np.abs(rt.psi_values - exact)) <= 1e-6


def test_direct_and_series_solvers_agree():
    ev = make_gamma2_kernel(1.0).evaluate
    direct = solve_on_grid(ev, 0.99, 20.0, 600, method="direct")
    series = solve_on_grid(ev, 0.99, 20.0, 600, method="fft")
    assert np.max(np.abs(direct - series)) < 1e-12


def test_small_grid_rejected():
    with pytest.raises(InvalidParameter):
        solve_resolvent(scale_kernel(make_exponential_kernel(1.0), "-", 10), 128)


@pytest.mark.parametrize("regime,sign", [("-", -1), ("0", 0), ("+", 1)])
def test_limit_density(regime, sign):
    rho = limit_density(regime, 2.0)
    t = np.linspace(0, 1, 5)
    assert np.allclose(rho(t), np.exp(sign * t / 2.0) / 2.0)


def test_exponential_critical_resolvent_equals_limit():
    rt = solve_resolvent(scale_kernel(make_exponential_kernel(1.0), "0", 64), 256)
    assert l2_distance_on_unit(rt) < 1e-10


def test_table_cumulative_and_interpolation():
    sk = scale_kernel(make_exponential_kernel(1.0), "-", 100)
    rt = solve_resolvent(sk, 1024)
    assert rt.cumulative()[-1] == pytest.approx(0.99 * (1 - math.exp(-1)), abs=1e-6)
    assert rt.psi(0.5) == pytest.approx(0.99 * math.exp(-0.5), abs=1e-6)
    assert rt.sup_psi == pytest.approx(0.99, abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.floats(min_value=0.3, max_value=3.0), st.sampled_from(["-", "0", "+"]),
       st.floats(min_value=2.0, max_value=50.0))
def test_resolvent_is_nonnegative(beta, regime, T):
    rt = solve_resolvent(scale_kernel(make_gamma2_kernel(beta), regime, T), 256, tol=1e-7, max_points=1 << 14)
    assert np.all(rt.psi_values >= -1e-9)


def test_increment_energy():
    rt = solve_resolvent(scale_kernel(make_gamma2_kernel(1.0), "-", 50), 512)
    assert increment_energy(rt, 0.4, 0.4) == 0.0
    assert increment_energy(rt, 0.3, 0.5) > 0.0


@pytest.mark.parametrize("T", [10.0, 100.0, 1e4])
def test_malthusian_exponential(T):
    sk = scale_kernel(make_exponential_kernel(1.5), "+", T)
    res = malthusian_parameter(sk)
    assert res.b_T == pytest.approx(1.5 * (2 / T + 1 / T**2), rel=1e-10)
    assert res.tilted_l1 == pytest.approx(1 / sk.a_T, abs=1e-14)
    assert res.m_tilde == pytest.approx(1 / (sk.a_T**3 * 1.5), rel=1e-10)


def test_malthusian_gamma2_limit():
    sk = scale_kernel(make_gamma2_kernel(1.0), "+", 1e4)
    res = malthusian_parameter(sk)
    assert abs(1e4 * res.b_T - 2 / sk.base.m) < 1e-3


def test_malthusian_requires_supercritical():
    with pytest.raises(InvalidRegime):
        malthusian_parameter(scale_kernel(make_exponential_kernel(1.0), "-", 10))


@pytest.mark.parametrize("maker", [make_exponential_kernel, make_gamma2_kernel])
@pytest.mark.parametrize("regime", ["-", "0"])
def test_fourier_residual_within_moment_bound(maker, regime):
    sk = scale_kernel(maker(1.0), regime, 200)
    z = np.linspace(-30, 30, 241)
    diag = fourier_residual(sk, z)
    assert diag.within_bound
    alpha = default_alpha(sk.base.m, sk.base.m2)
    assert np.array_equal(diag.flagged & (z != 0), np.abs(z) > alpha * 200)
    if regime == "0":
        assert diag.flagged[z == 0].all()


@pytest.mark.parametrize("maker", [make_exponential_kernel, make_gamma2_kernel])
def test_fourier_residual_supercritical_decays_like_inverse_horizon(maker):
    z = np.linspace(-3, 3, 61)
    consts = [fourier_residual(scale_kernel(maker(1.0), "+", T), z).constant for T in (100, 400, 1600)]
    assert max(consts) / min(consts) < 1.01
    diag = fourier_residual(scale_kernel(maker(1.0), "+", 400), z, constant=max(consts))
    assert diag.within_bound
