"""Renewal resolvent of a scaled kernel and its large-horizon limits.

The resolvent ``Psi`` of ``a * phi`` solves ``Psi = a phi + (a phi) * Psi`` on
``[0, T]``. It is computed by product integration: the kernel is integrated
exactly against the piecewise-linear interpolant of ``Psi`` (trapezoidal
product rule), which is second order in the step. The step is refined
geometrically from ``T/n`` and the two finest levels are combined by
Richardson extrapolation until the change at the output nodes drops below
``tol``. The lower-triangular Toeplitz system is solved either by forward
substitution or, for long grids, by power-series inversion with FFTs; the
two agree to rounding.

All returned tables live on the unit interval: ``psi(t) = Psi(T t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from . import _backend
from .errors import InvalidParameter, InvalidRegime, NumericFailure
from .kernels import Regime, ScaledKernel

MAX_POINTS = 1 << 22
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class ResolventTable:
    T: float
    regime: Regime
    grid: np.ndarray
    psi_values: np.ndarray
    rho_values: np.ndarray
    d_values: np.ndarray
    internal_points: int
    error_estimate: float

    @property
    def sup_psi(self) -> float:
        return float(np.max(self.psi_values))

    def psi(self, t) -> np.ndarray:
        """Linear interpolation of the rescaled resolvent on ``[0, 1]``."""
        return np.interp(t, self.grid, self.psi_values)

    def cumulative(self) -> np.ndarray:
        """Trapezoidal ``int_0^t psi`` at the grid points."""
        h = np.diff(self.grid)
        return np.concatenate([[0.0], np.cumsum(0.5 * h * (self.psi_values[1:] + self.psi_values[:-1]))])


@dataclass(frozen=True)
class MalthusianResult:
    b_T: float
    tilted_l1: float
    m_tilde: float


@dataclass(frozen=True)
class FourierDiagnostics:
    z_grid: np.ndarray
    residual: np.ndarray
    bound: np.ndarray
    flagged: np.ndarray
    constant: float | None = None

    @property
    def within_bound(self) -> bool:
        ok = ~self.flagged
        return bool(np.all(self.residual[ok] <= self.bound[ok]))


# ---------------------------------------------------------------- weights

def _hat_integrals(kernel: Callable, h: float, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Integrals of ``phi`` against rising and falling hats on ``[i h, (i+1) h]``.

    Returns ``(rise, fall)`` with ``rise[i] = int phi(x) (x - i h)/h`` and
    ``fall[i] = int phi(x) ((i+1) h - x)/h`` for ``i < count``.
    """
    out_r = np.empty(count)
    out_f = np.empty(count)
    up = 0.5 * (1.0 + _GL_X)
    wr = 0.5 * h * _GL_W * up
    wf = 0.5 * h * _GL_W * (1.0 - up)
    block = 1 << 16
    for s in range(0, count, block):
        i = np.arange(s, min(count, s + block), dtype=float)
        x = (i[:, None] + up[None, :]) * h
        v = kernel(x)
        out_r[s:s + i.size] = v @ wr
        out_f[s:s + i.size] = v @ wf
    return out_r, out_f


def _series_inverse(c: np.ndarray) -> np.ndarray:
    """Coefficients of ``1 / c(z)`` modulo ``z**len(c)`` by Newton iteration."""
    n = c.size
    g = np.array([1.0 / c[0]])
    length = 1
    while length < n:
        length = min(2 * length, n)
        size = 1 << (2 * length - 1).bit_length()
        G = np.fft.rfft(g, size)
        e = np.fft.irfft(np.fft.rfft(c[:length], size) * G, size)[:length]
        e = -e
        e[0] += 2.0
        g = np.fft.irfft(G * np.fft.rfft(e, size), size)[:length]
    return g


def _series_product(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    size = 1 << (a.size + b.size - 1).bit_length()
    return np.fft.irfft(np.fft.rfft(a, size) * np.fft.rfft(b, size), size)[:n]


def solve_on_grid(kernel: Callable, a: float, horizon: float, N: int, method: str = "auto") -> np.ndarray:
    """Product-trapezoid solution of the renewal equation on ``N`` uniform steps.

    Parameters
    ----------
    kernel : callable
        The unscaled density ``phi``.
    a : float
        Mass factor.
    horizon : float
        Right end of the time interval.
    N : int
        Number of steps.
    method : {"auto", "direct", "fft"}
        Forward substitution or series inversion.

    Returns
    -------
    ndarray of shape (N + 1,)
        Resolvent values at ``i * horizon / N``.
    """
    h = horizon / N
    rise, fall = _hat_integrals(kernel, h, N + 1)
    w = np.empty(N + 1)
    w[0] = fall[0]
    w[1:] = rise[:-1] + fall[1:]
    phi = kernel(np.arange(N + 1) * h)
    psi0 = a * phi[0]
    diag = 1.0 - a * w[0]
    if not diag > 0:
        raise NumericFailure(
            f"product rule is unstable at step {h:.3g} (1 - a*w0 = {diag:.3g}); increase n"
        )
    f = a * phi[1:] + a * rise[:N] * psi0
    if method == "auto":
        method = "direct" if N <= 2048 else "fft"
    if method == "direct":
        body = _backend.volterra_forward(np.ascontiguousarray(a * w), np.ascontiguousarray(f))
    elif method == "fft":
        c = -a * w[:N]
        c[0] += 1.0
        body = _series_product(f, _series_inverse(c), N)
    else:
        raise InvalidParameter(f"unknown method {method!r}")
    out = np.concatenate([[psi0], body])
    if not np.all(np.isfinite(out)):
        raise NumericFailure("resolvent solve produced non-finite values; increase n")
    return out


def solve_resolvent(sk: ScaledKernel, n: int = 4096, tol: float = 1e-9,
                    max_points: int = MAX_POINTS, method: str = "auto") -> ResolventTable:
    """Rescaled resolvent of ``sk`` on ``n + 1`` uniform points of ``[0, 1]``.

    The first level uses step ``T/n``. Further levels halve the step and
    are Richardson-combined with the previous one; refinement stops once two
    successive extrapolations differ by less than ``tol`` or the internal
    grid would exceed ``max_points``.
    """
    if n < 256:
        raise InvalidParameter(f"grid resolution n must be >= 256, got {n}")
    T, a = sk.T, sk.a_T
    ev = sk.base.evaluate
    prev_raw = solve_on_grid(ev, a, T, n, method)
    best = prev_raw
    prev_ext = None
    err = math.inf
    r = 1
    while 2 * r * n <= max_points:
        r *= 2
        raw = solve_on_grid(ev, a, T, r * n, method)[::r]
        ext = (4.0 * raw - prev_raw) / 3.0
        err = float(np.max(np.abs(ext - (prev_ext if prev_ext is not None else raw))))
        best = ext
        prev_raw, prev_ext = raw, ext
        if err < tol:
            break
    grid = np.linspace(0.0, 1.0, n + 1)
    rho = limit_density(sk.regime, sk.base.m)(grid)
    return ResolventTable(T, sk.regime, grid, best, rho, best - rho, r * n, err)


def limit_density(regime: Regime | str, m: float) -> Callable[[np.ndarray], np.ndarray]:
    """Limit of the rescaled resolvent: decaying, flat or growing exponential."""
    regime = Regime.parse(regime)
    if not (m > 0):
        raise InvalidParameter(f"first moment m must be positive, got {m}")
    c = regime.sign

    def rho(t):
        return np.exp(c * np.asarray(t, dtype=float) / m) / m

    return rho


def l2_distance_on_unit(rt: ResolventTable) -> float:
    """Trapezoidal L2 norm of ``psi - rho`` on ``[0, 1]``."""
    d2 = rt.d_values**2
    h = np.diff(rt.grid)
    return float(math.sqrt(np.sum(0.5 * h * (d2[1:] + d2[:-1]))))


def increment_energy(rt: ResolventTable, s: float, t: float, points: int = 2001) -> float:
    """``int_0^s |psi(t-u) - psi(s-u)|^2 du`` with the interpolated table."""
    u = np.linspace(0.0, s, points)
    diff = rt.psi(t - u) - rt.psi(s - u)
    return float(integrate.trapezoid(diff**2, u))


def malthusian_parameter(sk: ScaledKernel) -> MalthusianResult:
    """Tilt rate ``b`` with ``int exp(-b s) a phi(s) ds = 1/a`` for ``a > 1``."""
    if sk.regime is not Regime.SUPER:
        raise InvalidRegime("the tilt rate is defined for the supercritical regime only")
    a, base = sk.a_T, sk.base
    target = 1.0 / a

    def g(b):
        return a * float(base.laplace(b).real) - target

    hi = 1.0 / base.m
    while g(hi) > 0:
        hi *= 2.0
    b = optimize.brentq(g, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    tilted = a * float(base.laplace(b).real)
    if abs(tilted - target) >= 1e-12:
        raise NumericFailure(f"tilt root not resolved: residual {tilted - target:.3e}")
    m_tilde = a * float(base.laplace_moment(b).real)
    return MalthusianResult(b, tilted, m_tilde)


def default_alpha(m: float, m2: float) -> float:
    """Frequency range factor ``0.1 m / m2``, inside the admissible ``(0, m / (8 m2))``."""
    return 0.1 * m / m2


def fourier_residual(sk: ScaledKernel, z_grid, alpha: float | None = None,
                     constant: float | None = None) -> FourierDiagnostics:
    """Residual between the transforms of the rescaled resolvent and its limit.

    Uses the convention ``F f(z) = int exp(i z t) f(t) dt``. Below and at
    criticality the envelope is the explicit moment bound; above, the
    residual of the exponentially tilted problem is compared with ``C/T``
    where ``C`` is given or taken as the largest ``T |residual|`` over
    validated frequencies. Frequencies with ``|z| > alpha T`` (and ``z = 0``
    at criticality, where the limit transform has a pole) are flagged.
    """
    z = np.asarray(z_grid, dtype=float)
    T, a, base = sk.T, sk.a_T, sk.base
    m, m2 = base.m, base.m2
    if alpha is None:
        alpha = default_alpha(m, m2)
    flagged = np.abs(z) > alpha * T
    if sk.regime is Regime.SUPER:
        b = malthusian_parameter(sk).b_T
        tilted = a * base.laplace(b - 1j * z / T)
        lim = 1.0 / (m * b * T - 1.0 - 1j * m * z)
        res = np.abs(1.0 / (T * (1.0 - tilted)) - lim)
        ok = ~flagged
        if constant is None:
            constant = float(np.max(T * res[ok])) if np.any(ok) else math.nan
        bound = np.full(z.shape, constant / T)
        return FourierDiagnostics(z, res, bound, flagged, constant)
    with np.errstate(divide="ignore", invalid="ignore"):
        first = 1.0 / (T * (1.0 - a * base.laplace(-1j * z / T)))
        if sk.regime is Regime.SUB:
            lim = 1.0 / (1.0 - 1j * m * z)
        else:
            lim = 1j / (m * z)
            flagged = flagged | (z == 0)
        res = np.abs(first - lim)
    root = np.sqrt(z * z * m * m + 1.0)
    bound = 4.0 / (T * root) + 4.0 * np.abs(z) * m2 / (T * m * root)
    return FourierDiagnostics(z, res, bound, flagged, None)
