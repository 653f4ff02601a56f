import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nearcrit.errors import InvalidParameter, InvalidRegime, OutOfRange
from nearcrit.kernels import (KernelSpec, Regime, criticality_factor, kernel_moments,
                              make_exponential_kernel, make_gamma2_kernel, make_kernel, scale_kernel)
from nearcrit.kernels import _gauss_transform

rates = st.floats(min_value=0.2, max_value=5.0)


@pytest.mark.parametrize("family,m_of_beta,m2_of_beta", [
    ("exponential", lambda b: 1 / b, lambda b: 2 / b**2),
    ("gamma2", lambda b: 2 / b, lambda b: 6 / b**2),
])
@pytest.mark.parametrize("beta", [0.5, 1.0, 3.0])
def test_analytic_moments_match_quadrature(family, m_of_beta, m2_of_beta, beta):
    base = make_kernel(family, beta)
    l1, m, m2 = kernel_moments(base)
    assert l1 == pytest.approx(1.0, abs=1e-10)
    assert m == pytest.approx(m_of_beta(beta), rel=1e-9)
    assert m2 == pytest.approx(m2_of_beta(beta), rel=1e-9)
    assert base.m == m_of_beta(beta) and base.m2 == m2_of_beta(beta)


@pytest.mark.parametrize("maker", [make_exponential_kernel, make_gamma2_kernel])
def test_analytic_transform_matches_quadrature(maker):
    base = maker(1.7)
    p = np.array([0.0, 0.3, 2.0, 0.1 - 0.5j, 1e-3 + 4j])
    assert np.allclose(base.laplace(p), _gauss_transform(base, p, 0), atol=1e-11)
    assert np.allclose(base.laplace_moment(p), _gauss_transform(base, p, 1), atol=1e-11)


@given(rates)
def test_transform_at_zero_is_mass_and_mean(beta):
    for base in (make_exponential_kernel(beta), make_gamma2_kernel(beta)):
        assert base.laplace(0.0).real == pytest.approx(1.0)
        assert base.laplace_moment(0.0).real == pytest.approx(base.m)


@given(rates, st.floats(min_value=0.0, max_value=50.0))
def test_kernels_nonnegative(beta, t):
    for base in (make_exponential_kernel(beta), make_gamma2_kernel(beta)):
        assert base(t) >= 0
        assert base(-t - 1e-9) == 0


def test_gamma2_vanishes_at_origin_and_peaks_at_inverse_rate():
    base = make_gamma2_kernel(2.0)
    assert base(0.0) == 0.0
    assert base.sup_norm() == pytest.approx(2.0 * math.exp(-1.0), rel=1e-6)


def test_user_kernel_uses_quadrature():
    # half-normal density with unit scale
    c = math.sqrt(2 / math.pi)
    ev = lambda t: np.where(t >= 0, c * np.exp(-0.5 * np.maximum(t, 0) ** 2), 0.0)
    dv = lambda t: np.where(t >= 0, -c * t * np.exp(-0.5 * np.maximum(t, 0) ** 2), 0.0)
    base = KernelSpec("half-normal", ev, dv)
    assert base.m == pytest.approx(c, rel=1e-9)
    assert base.m2 == pytest.approx(1.0, rel=1e-9)
    assert base.laplace(0.0).real == pytest.approx(1.0, abs=1e-10)


def test_mass_checked_unless_disabled():
    ev = lambda t: np.where(t >= 0, 2 * np.exp(-np.maximum(t, 0)), 0.0)
    with pytest.raises(InvalidParameter):
        KernelSpec("double", ev, ev)
    assert KernelSpec("double", ev, ev, validate=False).l1_norm == pytest.approx(2.0)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("inf"), float("nan"), "x"])
def test_bad_rate(bad):
    with pytest.raises(InvalidParameter):
        make_exponential_kernel(bad)


def test_unknown_family():
    with pytest.raises(InvalidParameter):
        make_kernel("weibull", 1.0)


@pytest.mark.parametrize("label,regime", [("sub", Regime.SUB), ("-", Regime.SUB), ("critical", Regime.CRITICAL),
                                          ("0", Regime.CRITICAL), ("+", Regime.SUPER), ("Super", Regime.SUPER)])
def test_regime_aliases(label, regime):
    assert Regime.parse(label) is regime


def test_unknown_regime():
    with pytest.raises(InvalidRegime):
        Regime.parse("near")


@pytest.mark.parametrize("regime,expected", [("-", 0.99), ("0", 1.0), ("+", 1.01)])
def test_criticality_factor(regime, expected):
    assert criticality_factor(regime, 100) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("T", [1.999, 0.0, -5.0, float("nan")])
def test_criticality_factor_rejects_small_horizon(T):
    with pytest.raises(OutOfRange):
        criticality_factor("-", T)


@given(st.floats(min_value=2.0, max_value=1e6), st.sampled_from(["-", "0", "+"]))
def test_scaled_kernel_mass(T, regime):
    sk = scale_kernel(make_exponential_kernel(1.0), regime, T)
    assert sk.a_T * sk.base.l1_norm == pytest.approx(1.0 + Regime.parse(regime).sign / T)
    assert sk.evaluate(0.0) == pytest.approx(sk.a_T)
