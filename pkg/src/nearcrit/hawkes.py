"""Hawkes processes read off a Poisson field.

A point ``(t, theta)`` of the field becomes an event exactly when
``theta <= lambda(t-)``. The field is swept one time column at a time; the
column is realised only up to the height the intensity can reach inside it,
and if an accepted point pushes the intensity above that height the column
is extended and swept again from its saved state. No randomness besides the
field is involved, so a field determines its path.

For the exponential kernel the excess intensity is a one-dimensional Markov
state; for the gamma2 kernel ``(A, B)`` with ``A' = -beta A`` and
``B' = beta^2 A - beta B`` carries it exactly. Other kernels use direct
summation over past events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import _backend
from .coupling import PoissonFieldSample, sample_poisson_field
from .errors import CapacityError, InvalidParameter
from .kernels import ScaledKernel
from .rng import Streams

HEADROOM = 1.5


def _kind(sk: ScaledKernel) -> int | None:
    fam = sk.base.family
    if fam == "exponential":
        return _backend.KIND_EXP
    if fam == "gamma2":
        return _backend.KIND_GAMMA2
    return None


@dataclass
class HawkesPath:
    sk: ScaledKernel
    mu: float
    events: np.ndarray
    grid_n: int = 1024
    _cdf_table: tuple | None = field(default=None, repr=False)

    @property
    def T(self) -> float:
        return self.sk.T

    def intensity(self, times):
        """Left limit, right limit and compensator of the intensity at ``times``.

        ``times`` in original units; any order.
        """
        times = np.asarray(times, dtype=float)
        order = np.argsort(times, kind="stable")
        q = np.ascontiguousarray(times[order])
        kind = _kind(self.sk)
        if kind is not None:
            left, right, comp = _backend.intensity_at(
                kind, np.ascontiguousarray(self.events), self.mu, self.sk.a_T, self.sk.base.beta, q)
        else:
            left, right, comp = self._direct(q)
        out = [np.empty_like(left) for _ in range(3)]
        for o, v in zip(out, (left, right, comp)):
            o[order] = v
        return tuple(out)

    def _direct(self, q):
        a, base = self.sk.a_T, self.sk.base
        ev = self.events
        cdf = _kernel_cdf(base)
        left = np.empty(q.size)
        right = np.empty(q.size)
        comp = np.empty(q.size)
        for n, t in enumerate(q):
            past = ev[ev < t]
            left[n] = self.mu + a * float(np.sum(base.evaluate(t - past)))
            at = ev[ev == t]
            right[n] = left[n] + a * float(base.evaluate(np.zeros(1))[0]) * at.size
            comp[n] = self.mu * t + a * float(np.sum(cdf(t - past)))
        return left, right, comp

    @property
    def lambda_grid(self) -> np.ndarray:
        t = np.linspace(0.0, self.T, self.grid_n + 1)
        return self.intensity(t)[0]

    def counts(self, times) -> np.ndarray:
        """``H`` at ``times``: number of events in ``(0, t]``."""
        return np.searchsorted(self.events, np.asarray(times, dtype=float), side="right")


def _kernel_cdf(base):
    key = id(base)
    if key not in _CDF_CACHE:
        t = np.linspace(0.0, base.t_cut, 20001)
        vals = base.evaluate(t)
        cum = integrate.cumulative_trapezoid(vals, t, initial=0.0)
        _CDF_CACHE[key] = (t, cum)
    t, cum = _CDF_CACHE[key]
    return lambda x: np.interp(x, t, cum, right=cum[-1])


_CDF_CACHE: dict = {}


def simulate_hawkes(sk: ScaledKernel, mu: float, field: PoissonFieldSample) -> HawkesPath:
    """Events of the Hawkes process with baseline ``mu`` embedded in ``field``.

    Raises
    ------
    CapacityError
        The intensity left the field's height ceiling; retry with a taller
        field built on the same streams (see :func:`simulate_with_retry`).
    """
    if not (mu >= 0 and math.isfinite(mu)):
        raise InvalidParameter(f"mu must be nonnegative, got {mu}")
    if abs(field.T - sk.T) > 1e-12 * sk.T:
        raise InvalidParameter(f"field horizon {field.T} differs from kernel horizon {sk.T}")
    kind = _kind(sk)
    if kind is None:
        return _simulate_generic(sk, mu, field)
    a, beta = sk.a_T, sk.base.beta
    width = field.width
    state = np.zeros(3)
    events = []
    for i in range(field.k):
        bound0 = _peak(kind, mu, beta, state[1], state[2])
        top = field.grid.rows
        if bound0 > top * width:
            raise CapacityError(f"intensity {bound0:.4g} above the field ceiling {top * width:.4g}")
        rows = min(top, max(1, int(math.ceil(HEADROOM * bound0 / width)) + 1))
        while True:
            t, th, _ = field.column_points(i, rows)
            saved = state.copy()
            acc, bound = _backend.sweep_slab(kind, t, th, mu, a, beta, state, rows * width)
            if bound <= rows * width:
                break
            state[:] = saved
            if bound > top * width:
                raise CapacityError(f"intensity {bound:.4g} above the field ceiling {top * width:.4g}")
            rows = min(top, int(math.ceil(HEADROOM * bound / width)) + 1)
        events.append(t[acc])
    ev = np.concatenate(events) if events else np.empty(0)
    return HawkesPath(sk, float(mu), ev)


def _peak(kind, mu, beta, s1, s2):
    if kind == _backend.KIND_EXP:
        return mu + s1
    if s1 <= 0.0:
        return mu + s2
    hstar = (beta * s1 - s2) / (beta * beta * s1)
    if hstar <= 0.0:
        return mu + s2
    return mu + beta * s1 * math.exp(-beta * hstar)


def _simulate_generic(sk: ScaledKernel, mu: float, field: PoissonFieldSample) -> HawkesPath:
    """Direct summation; every column is realised to the full ceiling."""
    a, base = sk.a_T, sk.base
    sup_phi = base.sup_norm()
    ceiling = field.grid.rows * field.width
    events: list[float] = []
    for i in range(field.k):
        t, th, _ = field.column_points(i, field.grid.rows)
        for tp, hp in zip(t, th):
            past = np.asarray(events)
            past = past[past > tp - base.t_cut]
            lam = mu + a * float(np.sum(base.evaluate(tp - past)))
            if hp <= lam:
                events.append(float(tp))
                if mu + a * sup_phi * (past.size + 1) > ceiling and lam + a * sup_phi > ceiling:
                    raise CapacityError("intensity may exceed the field ceiling")
    return HawkesPath(sk, float(mu), np.asarray(events))


@lru_cache(maxsize=64)
def _mean_peak(family: str, beta: float, regime, T: float, mu: float) -> float:
    from .kernels import make_kernel, scale_kernel
    from .resolvent import solve_resolvent

    sk = scale_kernel(make_kernel(family, beta), regime, T)
    rt = solve_resolvent(sk, 256, tol=1e-4, max_points=1 << 14)
    return mu / T + mu * float(np.max(rt.cumulative()))


def default_theta_max(sk: ScaledKernel, mu: float) -> float:
    """Rescaled ceiling ``4 (mu + sup_t E Lambda_t)``, at least 1."""
    if sk.base.family in ("exponential", "gamma2"):
        peak = _mean_peak(sk.base.family, sk.base.beta, sk.regime, sk.T, mu)
    else:
        peak = mu
    return max(1.0, 4.0 * (mu + peak))


def simulate_with_retry(sk: ScaledKernel, mu: float, streams: Streams, k: int | None = None,
                        theta_max: float | None = None, retries: int = 3):
    """Simulate, doubling the ceiling on exceedance. Same streams every attempt.

    Returns ``(field, path, attempts)``.
    """
    theta = theta_max if theta_max is not None else default_theta_max(sk, mu)
    for attempt in range(retries + 1):
        fld = sample_poisson_field(sk.T, theta, streams, k=k)
        try:
            return fld, simulate_hawkes(sk, mu, fld), attempt + 1
        except CapacityError:
            theta *= 2.0
    raise CapacityError(f"intensity exceeded the ceiling after {retries} doublings")


@dataclass(frozen=True)
class RescaledPaths:
    t: np.ndarray
    Lambda: np.ndarray
    H_scaled: np.ndarray
    martingale: np.ndarray
    compensator: np.ndarray


def rescaled_paths(hp: HawkesPath, unit_grid) -> RescaledPaths:
    """Intensity, counts and compensated counts on the unit time scale.

    ``Lambda = lambda(tT-)/T``, ``H_scaled = H(tT)/T^2`` and
    ``martingale = (H(tT) - int_0^{tT} lambda)/T``; ``compensator`` is the
    raw integral.
    """
    t = np.asarray(unit_grid, dtype=float)
    T = hp.T
    left, _, comp = hp.intensity(t * T)
    H = hp.counts(t * T)
    return RescaledPaths(t, left / T, H / T**2, (H - comp) / T, comp)


def discretize_path(grid, values, k: int) -> np.ndarray:
    """Left-point step version on ``(i/k, (i+1)/k]`` evaluated on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    idx = np.maximum(np.ceil(grid * k - 1e-9).astype(int) - 1, 0)
    nodes = idx / k
    return np.interp(nodes, grid, values)
