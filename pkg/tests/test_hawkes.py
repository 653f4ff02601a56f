import math

import numpy as np
import pytest
from scipy import integrate

from nearcrit import _pycore
from nearcrit.coupling import sample_poisson_field
from nearcrit.errors import CapacityError, InvalidParameter
from nearcrit.hawkes import (discretize_path, rescaled_paths, simulate_hawkes, simulate_with_retry)
from nearcrit.kernels import KernelSpec, make_exponential_kernel, make_gamma2_kernel, scale_kernel
from nearcrit.rng import Streams


def _run(maker, regime="-", T=60.0, mu=1.0, seed=1, rep=0, theta=None):
    sk = scale_kernel(maker(1.0), regime, T)
    fld, hp, _ = simulate_with_retry(sk, mu, Streams(seed, rep), theta_max=theta)
    return sk, fld, hp


def _accepted_heights(fld, hp):
    out = []
    for i in range(fld.k):
        t, th, _ = fld.column_points(i, fld.grid.rows)
        keep = np.isin(t, hp.events)
        out.append(th[keep])
    return np.concatenate(out)


@pytest.mark.parametrize("maker", [make_exponential_kernel, make_gamma2_kernel])
def test_events_lie_under_left_intensity(maker):
    sk, fld, hp = _run(maker)
    left, right, _ = hp.intensity(hp.events)
    theta = _accepted_heights(fld, hp)
    assert theta.size == hp.events.size > 0
    assert np.all(theta <= left)
    assert np.all(left >= hp.mu - 1e-12)


def test_rejected_points_lie_above_intensity():
    sk, fld, hp = _run(make_exponential_kernel)
    for i in range(fld.k):
        t, th, _ = fld.column_points(i, fld.grid.rows)
        rej = ~np.isin(t, hp.events)
        if rej.any():
            assert np.all(th[rej] > hp.intensity(t[rej])[0])


def test_same_field_same_events():
    a = _run(make_gamma2_kernel, seed=4)[2]
    b = _run(make_gamma2_kernel, seed=4)[2]
    assert np.array_equal(a.events, b.events)


def test_ceiling_retry_does_not_change_events():
    sk = scale_kernel(make_exponential_kernel(1.0), "+", 80.0)
    _, tight, attempts = simulate_with_retry(sk, 1.0, Streams(2, 0), theta_max=0.3)
    _, loose, first = simulate_with_retry(sk, 1.0, Streams(2, 0), theta_max=50.0)
    assert attempts > 1 and first == 1
    assert np.array_equal(tight.events, loose.events)


def test_capacity_error_without_retries():
    sk = scale_kernel(make_exponential_kernel(1.0), "+", 80.0)
    with pytest.raises(CapacityError):
        simulate_with_retry(sk, 1.0, Streams(2, 0), theta_max=0.02, retries=0)


def test_exponential_intensity_jumps_and_compensator():
    sk, _, hp = _run(make_exponential_kernel, T=40.0)
    left, right, comp = hp.intensity(hp.events)
    assert np.allclose(right - left, sk.a_T * 1.0)
    grid = np.union1d(np.linspace(0, 40.0, 40001), hp.events)
    left_g, right_g, comp_grid = hp.intensity(grid)
    numeric = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(grid) * (right_g[:-1] + left_g[1:]))])
    assert np.max(np.abs(numeric - comp_grid)) < 1e-3


def test_gamma2_intensity_matches_direct_sum():
    sk, _, hp = _run(make_gamma2_kernel, T=40.0)
    q = np.linspace(0.0, 40.0, 97)
    left = hp.intensity(q)[0]
    direct = [hp.mu + np.sum(sk.evaluate(t - hp.events[hp.events < t])) for t in q]
    assert np.allclose(left, direct, rtol=1e-11, atol=1e-12)


def test_generic_kernel_route_reproduces_markov_route():
    beta = 1.0
    base = make_exponential_kernel(beta)
    clone = KernelSpec("clone", base.evaluate, base.derivative)
    for regime in ("-", "+"):
        fast = scale_kernel(base, regime, 30.0)
        slow = scale_kernel(clone, regime, 30.0)
        f1 = sample_poisson_field(30.0, 3.0, Streams(8, 0))
        f2 = sample_poisson_field(30.0, 3.0, Streams(8, 0))
        a = simulate_hawkes(fast, 1.0, f1)
        b = simulate_hawkes(slow, 1.0, f2)
        assert np.array_equal(a.events, b.events)
        q = np.linspace(0, 30.0, 31)
        la, _, ca = a.intensity(q)
        lb, _, cb = b.intensity(q)
        assert np.allclose(la, lb, rtol=1e-9)
        assert np.allclose(ca, cb, rtol=1e-4)


def test_zero_kernel_gives_poisson_counts():
    zero = KernelSpec("zero", lambda t: np.zeros(np.shape(t)), lambda t: np.zeros(np.shape(t)), validate=False)
    sk = scale_kernel(zero, "-", 20.0)
    counts = []
    for r in range(300):
        fld = sample_poisson_field(20.0, 1.0, Streams(6, r))
        counts.append(simulate_hawkes(sk, 0.5, fld).events.size)
    counts = np.array(counts)
    assert abs(counts.mean() - 10.0) < 3 * math.sqrt(10.0 / counts.size)


def test_acceptance_monotone_in_height():
    rng = np.random.default_rng(0)
    t = np.sort(rng.uniform(0, 50, 400))
    th = rng.uniform(0, 4, 400)
    acc, _ = _pycore.sweep_slab(0, t, th, 1.0, 0.9, 1.0, np.zeros(3), 1e9)
    lowered = th.copy()
    lowered[acc] *= rng.uniform(0, 1, acc.sum())
    acc2, _ = _pycore.sweep_slab(0, t, lowered, 1.0, 0.9, 1.0, np.zeros(3), 1e9)
    assert np.array_equal(acc, acc2)


def test_rescaled_paths_at_origin_and_monotone_counts():
    sk, _, hp = _run(make_exponential_kernel)
    grid = np.linspace(0, 1, 101)
    rp = rescaled_paths(hp, grid)
    assert rp.Lambda[0] == hp.mu / hp.T and rp.H_scaled[0] == 0 and rp.martingale[0] == 0
    assert np.all(np.diff(rp.H_scaled) >= 0)
    assert np.allclose(rp.H_scaled * hp.T**2, np.round(rp.H_scaled * hp.T**2))


def test_no_events_gives_negative_martingale():
    sk = scale_kernel(make_exponential_kernel(1.0), "-", 10.0)
    fld = sample_poisson_field(10.0, 1.0, Streams(0))
    hp = simulate_hawkes(sk, 1e-9, fld)
    rp = rescaled_paths(hp, [0.0, 0.5, 1.0])
    assert hp.events.size == 0
    assert np.all(rp.H_scaled == 0) and rp.martingale[-1] < 0


def test_discretize_path():
    grid = np.linspace(0, 1, 17)
    assert np.allclose(discretize_path(grid, np.full(17, 3.0), 4), 3.0)
    steps = discretize_path(grid, grid, 4)
    inside = [(grid > i / 4) & (grid <= (i + 1) / 4) for i in range(4)]
    for i, sel in enumerate(inside):
        assert np.allclose(steps[sel], i / 4)


def test_bad_baseline_and_horizon():
    sk = scale_kernel(make_exponential_kernel(1.0), "-", 10.0)
    with pytest.raises(InvalidParameter):
        simulate_hawkes(sk, -1.0, sample_poisson_field(10.0, 1.0, Streams(0)))
    with pytest.raises(InvalidParameter):
        simulate_hawkes(sk, 1.0, sample_poisson_field(11.0, 1.0, Streams(0)))


def test_mean_counts_match_integrated_mean_intensity():
    from oracles import exp_mean_rescaled_intensity
    T, reps = 50.0, 300
    sk = scale_kernel(make_exponential_kernel(1.0), "-", T)
    H = []
    for r in range(reps):
        _, hp, _ = simulate_with_retry(sk, 1.0, Streams(12, r))
        H.append(hp.events.size / T**2)
    H = np.array(H)
    s = np.linspace(0, 1, 2001)
    target = integrate.trapezoid(exp_mean_rescaled_intensity(1.0, 1.0, sk.a_T, T, s), s)
    assert abs(H.mean() - target) < 3 * H.std(ddof=1) / math.sqrt(reps)
