"""Square-root diffusions arising as scaling limits.

``dX = (mu + c X) dt / m + sqrt(X) dB / m`` on ``[0, 1]`` with ``X_0 = 0`` and
``c`` equal to -1, 0 or +1 by regime, discretised by Euler steps of size
``1/k`` with full truncation at zero.

The coupled version takes its noise from the Gaussian twin of a Poisson
field: over ``(i/k, (i+1)/k]`` the term ``sqrt(X) dB`` is the sheet mass of
the column below height ``X_{i/k}``, which given the past is
``N(0, X_{i/k}/k)``. The reference version draws that Gaussian directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coupling import CoupledSheet
from .errors import InvalidParameter
from .kernels import Regime


@dataclass(frozen=True)
class LimitPath:
    regime: Regime
    mu: float
    m: float
    grid: np.ndarray
    X_values: np.ndarray
    driving: str
    noise: np.ndarray

    def at(self, t) -> np.ndarray:
        """Linear interpolation between grid nodes."""
        return np.interp(t, self.grid, self.X_values)

    def integral(self, t) -> np.ndarray:
        """``int_0^t X`` of the interpolated path."""
        cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(self.grid) * (self.X_values[1:] + self.X_values[:-1]))])
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.grid, t, side="right") - 1, 0, self.grid.size - 2)
        t0 = self.grid[idx]
        x0 = self.X_values[idx]
        slope = (self.X_values[idx + 1] - x0) / (self.grid[idx + 1] - t0)
        d = t - t0
        return cum[idx] + x0 * d + 0.5 * slope * d * d

    def sheet_integral(self) -> np.ndarray:
        """Cumulative noise ``int 1(theta <= X) dW`` at the grid nodes."""
        return np.concatenate([[0.0], np.cumsum(self.noise)])


def _check(mu, m):
    if not (mu >= 0 and math.isfinite(mu)):
        raise InvalidParameter(f"mu must be nonnegative, got {mu}")
    if not (m > 0 and math.isfinite(m)):
        raise InvalidParameter(f"m must be positive, got {m}")


def simulate_limit_coupled(regime, mu: float, m: float, sheet: CoupledSheet,
                           k: int | None = None, grid=None) -> LimitPath:
    """Euler path driven by the sheet's column masses.

    The step is ``1/k`` with ``k`` the sheet's grid; passing another ``k``
    is an error. ``grid`` only selects where the returned path is sampled.
    """
    regime = Regime.parse(regime)
    _check(mu, m)
    if k is not None and k != sheet.k:
        raise InvalidParameter(f"sheet has k={sheet.k}, step requested for k={k}")
    k = sheet.k
    c = regime.sign
    X = np.zeros(k + 1)
    noise = np.zeros(k)
    dt = 1.0 / k
    for i in range(k):
        x = X[i]
        dw = sheet.column_increment(i, x) if x > 0 else 0.0
        noise[i] = dw
        X[i + 1] = max(0.0, x + (mu + c * x) * dt / m + dw / m)
    nodes = np.arange(k + 1) / k
    path = LimitPath(regime, float(mu), float(m), nodes, X, "coupled-sheet", noise)
    return _resample(path, grid)


def simulate_cir_reference(regime, mu: float, m: float, rng: np.random.Generator, grid=None,
                           k: int = 256, reps: int | None = None):
    """Same scheme driven by fresh Gaussians; vectorised over ``reps`` if given."""
    regime = Regime.parse(regime)
    _check(mu, m)
    c = regime.sign
    n = 1 if reps is None else int(reps)
    dt = 1.0 / k
    X = np.zeros((n, k + 1))
    noise = np.zeros((n, k))
    z = rng.standard_normal((k, n))
    for i in range(k):
        x = X[:, i]
        dw = np.sqrt(np.maximum(x, 0.0) * dt) * z[i]
        noise[:, i] = dw
        X[:, i + 1] = np.maximum(0.0, x + (mu + c * x) * dt / m + dw / m)
    nodes = np.arange(k + 1) / k
    if reps is None:
        return _resample(LimitPath(regime, float(mu), float(m), nodes, X[0], "independent-bm", noise[0]), grid)
    return LimitPath(regime, float(mu), float(m), nodes, X, "independent-bm", noise)


def _resample(path: LimitPath, grid) -> LimitPath:
    if grid is None:
        return path
    grid = np.asarray(grid, dtype=float)
    return LimitPath(path.regime, path.mu, path.m, grid, path.at(grid), path.driving, path.noise)
