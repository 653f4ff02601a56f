"""Poisson field on a cell grid and its Gaussian twin.

Coordinates. The field lives on ``[0, T] x [0, Theta T]`` in original
units. Rescaled coordinates divide both axes by ``T``; the grid of cells
``(i/k, (i+1)/k] x (j/k, (j+1)/k]`` in rescaled units has ``k`` columns and
``ceil(Theta k)`` rows. The rescaled compensated measure of a cell is
``count / T - T / k**2``, with mean zero and variance ``1 / k**2``.

Laziness. Every cell draws its count, the uniform used to Gaussianize it,
the positions of its points and its pinned sheet from streams keyed by
``(seed, replication, tag, column[, cell])``. Columns are realised only as
high as a consumer asks, and asking for more rows later leaves the lower
rows unchanged. This is what lets a simulation raise its ceiling on retry
without changing the randomness it has already used.

Gaussian twin. Each cell's Gaussian increment is the comonotone transform
of its Poisson increment (quantile of ``N(0, 1/k**2)`` at the randomised
Poisson CDF). Inside a cell the sheet is completed by an independent
pinned Brownian sheet, so the assembled field is an exact Brownian sheet
whose cell increments equal the Gaussianized values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import special

from .errors import CapacityError, DependencyError, InvalidInput, InvalidParameter, OutOfRange
from .rng import TAG_BETA, TAG_COUNT, TAG_POSITION, TAG_SHEET, TAG_UNIFORM, Streams

DEFAULT_POINT_CAP = 20_000_000


def default_cells(T: float) -> int:
    """Number of cells per unit used by the main coupling: ``floor(T**0.8) + 1``."""
    return int(math.floor(T ** 0.8)) + 1


@dataclass(frozen=True)
class CellGrid:
    k: int
    rows: int

    @property
    def theta_extent(self) -> float:
        return self.rows / self.k


# ------------------------------------------------------------ Poisson field

class PoissonFieldSample:
    """Lazily realised unit-rate Poisson measure on ``[0,T] x [0,Theta T]``.

    Parameters
    ----------
    T : float
        Horizon, at least 2.
    theta_max : float
        Ceiling of the rescaled height axis. Rounded up to a whole number of
        cell rows.
    streams : Streams
        Keyed random streams of the replication.
    k : int, optional
        Cells per unit; defaults to :func:`default_cells`.
    point_cap : int
        Largest expected number of points that may be materialised at once.
    """

    def __init__(self, T: float, theta_max: float, streams: Streams, k: int | None = None,
                 point_cap: int = DEFAULT_POINT_CAP):
        if not (T >= 2):
            raise OutOfRange(f"horizon T must be >= 2, got {T}")
        if not (theta_max > 0 and math.isfinite(theta_max)):
            raise InvalidParameter(f"theta_max must be positive, got {theta_max}")
        self.T = float(T)
        self.k = int(k) if k is not None else default_cells(T)
        if self.k < 1:
            raise InvalidParameter(f"k must be >= 1, got {k}")
        self.grid = CellGrid(self.k, int(math.ceil(theta_max * self.k - 1e-9)))
        self.theta_max = self.grid.theta_extent
        self.streams = streams
        self.point_cap = point_cap
        self.cell_mean = self.T**2 / self.k**2
        self.width = self.T / self.k  # cell side in original units
        self._counts: dict[int, np.ndarray] = {}
        self._uniforms: dict[int, np.ndarray] = {}
        self._xi: dict[int, np.ndarray] = {}
        self._points: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    # -- per-column realisations -------------------------------------------

    def _check(self, i: int, rows: int) -> None:
        if not 0 <= i < self.k:
            raise OutOfRange(f"column {i} outside 0..{self.k - 1}")
        if rows > self.grid.rows:
            raise CapacityError(
                f"requested {rows} rows but the ceiling allows {self.grid.rows} (theta_max={self.theta_max})"
            )

    def column_counts(self, i: int, rows: int) -> np.ndarray:
        """Raw counts of the first ``rows`` cells of column ``i``."""
        self._check(i, rows)
        have = self._counts.get(i)
        if have is None or have.size < rows:
            size = max(rows, 2 * have.size if have is not None else rows)
            size = min(size, self.grid.rows)
            gen = self.streams.generator(TAG_COUNT, i)
            self._counts[i] = gen.poisson(self.cell_mean, size=size)
            have = self._counts[i]
        return have[:rows]

    def column_uniforms(self, i: int, rows: int) -> np.ndarray:
        self._check(i, rows)
        have = self._uniforms.get(i)
        if have is None or have.size < rows:
            size = min(max(rows, 2 * have.size if have is not None else rows), self.grid.rows)
            u = self.streams.generator(TAG_UNIFORM, i).random(size)
            self._uniforms[i] = np.where(u == 0.0, 0.5 * np.nextafter(0.0, 1.0), u)
            have = self._uniforms[i]
        return have[:rows]

    def column_xi(self, i: int, rows: int) -> np.ndarray:
        """Gaussianized increments of the first ``rows`` cells of column ``i``."""
        have = self._xi.get(i)
        if have is None or have.size < rows:
            self.column_counts(i, rows)
            counts = self._counts[i]
            u = self.column_uniforms(i, counts.size)
            self._xi[i] = gaussianize_counts(counts, u, self.cell_mean, self.k)
            have = self._xi[i]
        return have[:rows]

    def column_points(self, i: int, rows: int):
        """Points of column ``i`` in its first ``rows`` cells, sorted by time.

        Returns ``(t, theta, cell)`` in original units with the row index of
        each point.
        """
        have = self._points.get(i)
        if have is not None and have[3] >= rows:
            t, th, cell, _ = have
            if have[3] == rows:
                return t, th, cell
            keep = cell < rows
            return t[keep], th[keep], cell[keep]
        counts = self.column_counts(i, rows)
        total = int(counts.sum())
        u = self.streams.generator(TAG_POSITION, i).random(2 * total)
        cell = np.repeat(np.arange(rows), counts)
        t = (i + u[0::2]) * self.width
        th = (cell + u[1::2]) * self.width
        order = np.argsort(t, kind="stable")
        t, th, cell = t[order], th[order], cell[order]
        self._points[i] = (t, th, cell, rows)
        return t, th, cell

    # -- whole-field views -------------------------------------------------

    @property
    def cell_counts(self) -> np.ndarray:
        """Counts of every cell, shape ``(k, rows)``."""
        return np.stack([self.column_counts(i, self.grid.rows) for i in range(self.k)])

    @property
    def points(self) -> np.ndarray:
        """All points as an ``(n, 2)`` array of ``(t, theta)`` sorted by ``t``."""
        expected = self.T**2 * self.theta_max
        if expected > self.point_cap:
            raise CapacityError(
                f"expected {expected:.3g} points exceeds the cap {self.point_cap:.3g}; "
                "iterate over columns with column_points instead"
            )
        cols = [self.column_points(i, self.grid.rows) for i in range(self.k)]
        t = np.concatenate([c[0] for c in cols]) if cols else np.empty(0)
        th = np.concatenate([c[1] for c in cols]) if cols else np.empty(0)
        return np.column_stack([t, th])

    def compensated_increment(self, i: int, j: int) -> float:
        return compensated_cell_increment(self, i, j, self.k)

    def beta_sampler(self, i: int, j: int) -> "PinnedSheetSampler":
        return PinnedSheetSampler(self.k, lambda: self.streams.generator(TAG_BETA, i, j))


def sample_poisson_field(T: float, theta_max: float, rng_stream: Streams, k: int | None = None,
                         point_cap: int = DEFAULT_POINT_CAP) -> PoissonFieldSample:
    """Unit-rate Poisson measure on ``[0,T] x [0, theta_max T]`` (realised on demand)."""
    return PoissonFieldSample(T, theta_max, rng_stream, k=k, point_cap=point_cap)


def compensated_cell_increment(field: PoissonFieldSample, i: int, j: int, k: int) -> float:
    """``count / T - T / k**2`` for cell ``(i, j)`` of the field's grid."""
    if k != field.k:
        raise InvalidParameter(f"field is gridded with k={field.k}, not {k}")
    if not (0 <= i < field.k and 0 <= j < field.grid.rows):
        raise OutOfRange(f"cell ({i}, {j}) outside the sampled region")
    n = field.column_counts(i, j + 1)[j]
    return n / field.T - field.T / k**2


# ----------------------------------------------------------- h_k transform

TAIL_SWITCH = 1e-280


def gaussianize_counts(counts, u, mean: float, k: int) -> np.ndarray:
    """Comonotone transform of Poisson(``mean``) counts to ``N(0, 1/k**2)``.

    Randomised CDF ``P(N < n) + u P(N = n)`` mapped through the Gaussian
    quantile; the upper half uses the survival side to keep tail accuracy.
    Where either side would underflow it is evaluated in log space.
    """
    n = np.asarray(counts, dtype=float)
    u = np.asarray(u, dtype=float)
    n, u = np.broadcast_arrays(n, u)
    with np.errstate(divide="ignore"):
        logpmf = n * math.log(mean) - mean - special.gammaln(n + 1.0) if mean > 0 else np.where(n == 0, 0.0, -np.inf)
    pmf = np.exp(logpmf)
    below = np.where(n > 0, special.pdtr(np.maximum(n - 1.0, 0.0), mean), 0.0)
    above = special.pdtrc(n, mean)
    p = below + u * pmf
    q = above + (1.0 - u) * pmf
    z = np.where(p <= q, special.ndtri(np.minimum(p, 0.5)), -special.ndtri(np.minimum(q, 0.5)))
    tiny = np.flatnonzero(np.minimum(p, q).ravel() < TAIL_SWITCH)
    if tiny.size:
        zf = z.ravel().copy()
        for idx in tiny:
            nn, uu, lp = n.ravel()[idx], u.ravel()[idx], logpmf.ravel()[idx]
            if nn > mean:
                zf[idx] = -special.ndtri_exp(lp + math.log(_upper_series(nn, mean, 1.0 - uu)))
            else:
                zf[idx] = special.ndtri_exp(lp + math.log(_lower_series(nn, mean, uu)))
        z = zf.reshape(z.shape)
    return z / k


def _upper_series(n: float, mean: float, first: float) -> float:
    """``first + sum_j prod_{i<=j} mean/(n+i)``: ``P(N > n) / P(N = n)`` plus ``first``."""
    total, term, i = first, 1.0, 1
    while i < 100000:
        term *= mean / (n + i)
        total += term
        if term < 1e-17 * total:
            break
        i += 1
    return total


def _lower_series(n: float, mean: float, first: float) -> float:
    """``first + sum_j prod_{i<j} (n-i)/mean``: ``P(N < n) / P(N = n)`` plus ``first``."""
    total, term, i = first, 1.0, 0
    while i < n:
        term *= (n - i) / mean
        total += term
        if term < 1e-17 * total:
            break
        i += 1
    return total


def comonotone_gaussianize(delta, u, k: int, T: float) -> np.ndarray:
    """Map compensated cell increments to Gaussian increments.

    Parameters
    ----------
    delta : array_like
        Values ``(n - T**2/k**2) / T`` for integer counts ``n``.
    u : array_like
        Uniforms in ``(0, 1)`` breaking the ties of the discrete law.
    k : int
        Cells per unit.
    T : float
        Horizon.
    """
    delta = np.asarray(delta, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)):
        raise InvalidInput("u must lie in (0, 1)")
    mean = T * T / (k * k)
    n = np.rint(T * delta + mean)
    off = np.abs(delta - (n - mean) / T)
    if np.any(off > 1e-9) or np.any(n < 0):
        raise InvalidInput("increment is not on the Poisson lattice of this (k, T); check the grid")
    return gaussianize_counts(n, u, mean, k)


# ------------------------------------------------------------ pinned sheet

def sample_pinned_sheet(k: int, points, rng: np.random.Generator, batch: tuple = ()) -> np.ndarray:
    """Brownian sheet on ``[0,1/k]^2`` pinned to zero at ``(1/k, 1/k)``.

    Built as ``B(x,y) - k^2 x y B(1/k,1/k)`` from an auxiliary sheet ``B``
    sampled on the lattice spanned by the queries. ``batch`` prepends
    independent copies.

    Returns
    -------
    ndarray of shape ``batch + (len(points),)``
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    side = 1.0 / k
    tol = 1e-12 * max(1.0, side)
    if pts.size and (np.any(pts < -tol) or np.any(pts > side + tol)):
        raise OutOfRange("pinned-sheet queries must lie in the cell square [0, 1/k]^2")
    pts = np.clip(pts, 0.0, side)
    pts = np.where(np.abs(pts - side) <= tol, side, pts)
    xs, xi = np.unique(np.append(pts[:, 0], side), return_inverse=True)
    ys, yi = np.unique(np.append(pts[:, 1], side), return_inverse=True)
    dx = np.diff(xs, prepend=0.0)
    dy = np.diff(ys, prepend=0.0)
    z = rng.standard_normal(tuple(batch) + (xs.size, ys.size))
    B = np.cumsum(np.cumsum(z * np.sqrt(np.outer(dx, dy)), axis=-2), axis=-1)
    corner = B[..., -1, -1]
    qx, qy = xi[:-1], yi[:-1]
    vals = B[..., qx, qy] - (k * k) * pts[:, 0] * pts[:, 1] * corner[..., None]
    return vals


class PinnedSheetSampler:
    """Pinned sheet of one cell. ``rng_factory`` returns the cell's stream."""

    def __init__(self, k: int, rng_factory: Callable[[], np.random.Generator], batch: tuple = ()):
        self.k = k
        self.rng_factory = rng_factory
        self.batch = tuple(batch)

    def __call__(self, points) -> np.ndarray:
        return sample_pinned_sheet(self.k, points, self.rng_factory(), self.batch)


def zero_sampler(points) -> np.ndarray:
    return np.zeros(len(np.atleast_2d(points)))


# ---------------------------------------------------------- sheet assembly

def _locate(v: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell index with ``(i/k, (i+1)/k]`` convention and offset inside it."""
    scaled = v * k
    idx = np.ceil(scaled - 1e-9).astype(int) - 1
    idx = np.maximum(idx, 0)
    off = v - idx / k
    return idx, np.clip(off, 0.0, 1.0 / k)


def node_values(xi: np.ndarray) -> np.ndarray:
    """Sheet at grid nodes: two-dimensional prefix sums of the cell increments."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros(xi.shape[:-2] + (xi.shape[-2] + 1, xi.shape[-1] + 1))
    out[..., 1:, 1:] = np.cumsum(np.cumsum(xi, axis=-2), axis=-1)
    return out


def assemble_sheet(xi, beta_samplers, k: int, points) -> np.ndarray:
    """Brownian sheet values at ``points`` from cell increments and pinned sheets.

    Parameters
    ----------
    xi : ndarray, shape ``batch + (rows_s, rows_t)``
        Cell increments; ``xi[..., i, j]`` belongs to cell
        ``(i/k, (i+1)/k] x (j/k, (j+1)/k]``.
    beta_samplers : mapping or callable
        ``(i, j) -> sampler`` or a mapping with those keys. A sampler maps an
        ``(n, 2)`` array of in-cell offsets to pinned-sheet values; each is
        called at most once, with every offset its cell needs.
    k : int
        Cells per unit.
    points : array_like, shape ``(q, 2)``
        Query points ``(s, t)`` in rescaled units.

    Returns
    -------
    ndarray of shape ``batch + (q,)``
    """
    xi = np.asarray(xi, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(pts < 0):
        raise OutOfRange("sheet queries must be nonnegative")
    nodes = node_values(xi)
    batch = xi.shape[:-2]
    ci, x = _locate(pts[:, 0], k)
    cj, y = _locate(pts[:, 1], k)
    side = 1.0 / k
    on_axis = (pts[:, 0] == 0) | (pts[:, 1] == 0)
    need: dict[tuple[int, int], list] = {}

    def want(cell, off, q, role):
        need.setdefault(cell, []).append((off, q, role))

    for q in range(pts.shape[0]):
        if on_axis[q]:
            continue
        i, j = int(ci[q]), int(cj[q])
        if i >= xi.shape[-2] or j >= xi.shape[-1]:
            raise DependencyError(f"no increment for cell ({i}, {j}) needed by query {q}")
        want((i, j), (x[q], y[q]), q, "inner")
        for jj in range(j):
            want((i, jj), (x[q], side), q, "edge_s")
        for ii in range(i):
            want((ii, j), (side, y[q]), q, "edge_t")

    out = np.zeros(batch + (pts.shape[0],))
    for q in range(pts.shape[0]):
        if not on_axis[q]:
            out[..., q] = nodes[..., ci[q], cj[q]]
    for (i, j), items in need.items():
        sampler = _get_sampler(beta_samplers, i, j)
        offs = np.array([it[0] for it in items])
        beta = np.asarray(sampler(offs))
        beta = np.broadcast_to(beta, batch + (len(items),))
        for n, (off, q, _role) in enumerate(items):
            out[..., q] += beta[..., n] + k * k * off[0] * off[1] * xi[..., i, j]
    return out


def _get_sampler(beta_samplers, i: int, j: int):
    if beta_samplers is None:
        return zero_sampler
    if isinstance(beta_samplers, Mapping):
        try:
            return beta_samplers[(i, j)]
        except KeyError:
            raise DependencyError(f"no pinned sheet for cell ({i}, {j})") from None
    return beta_samplers(i, j)


class CoupledSheet:
    """Gaussian twin of one replication's Poisson field.

    Exposes what the limit equation and the estimators read from the sheet:
    rectangle increments ``W((i/k, (i+1)/k] x (0, level])`` of one column.
    """

    def __init__(self, field: PoissonFieldSample):
        self.field = field
        self.k = field.k

    def xi(self, i: int, rows: int) -> np.ndarray:
        return self.field.column_xi(i, rows)

    def _split(self, level: float):
        k = self.k
        full = int(math.floor(level * k + 1e-12))
        y = level - full / k
        if y <= 1e-15:
            y = 0.0
        return full, y

    def _strip_end(self, i: int, full: int, y: float):
        """``B(1/k, y)`` and ``B(1/k, 1/k)`` of the auxiliary sheet of cell ``(i, full)``.

        Drawn from the first two normals of the cell's stream, which is the
        same realisation :func:`sample_pinned_sheet` gives for the single
        query ``(1/k, y)``.
        """
        side = 1.0 / self.k
        z = self.field.streams.generator(TAG_BETA, i, full).standard_normal(2)
        low = z[0] * math.sqrt(side * y)
        return low, low + z[1] * math.sqrt(side * (side - y))

    def column_increment(self, i: int, level: float) -> float:
        """``W`` over column ``i`` up to rescaled height ``level``."""
        if level <= 0:
            return 0.0
        k = self.k
        full, y = self._split(level)
        xi = self.field.column_xi(i, full + (1 if y > 0 else 0))
        total = float(np.sum(xi[:full]))
        if y > 0:
            low, corner = self._strip_end(i, full, y)
            beta = low - k * y * corner
            total += beta + k * y * xi[full]
        return total

    def column_profile(self, i: int, level: float, x) -> np.ndarray:
        """``W((i/k, i/k + x] x (0, level])`` for offsets ``x`` in ``[0, 1/k]``.

        Agrees with :meth:`column_increment` at ``x = 1/k``. Interior values
        complete the partial cell by a Brownian bridge to its drawn endpoint;
        the full cells below enter only through the sum of their pinned
        sheets along the top edge, itself a Brownian bridge of rate
        ``rows/k`` vanishing at both ends.
        """
        x = np.asarray(x, dtype=float)
        if level <= 0 or x.size == 0:
            return np.zeros(x.shape)
        k = self.k
        side = 1.0 / k
        full, y = self._split(level)
        xi = self.field.column_xi(i, full + (1 if y > 0 else 0))
        out = k * x * float(np.sum(xi[:full]))
        order = np.argsort(x, kind="stable")
        xs = x[order]
        dx = np.diff(xs, prepend=0.0)
        if full > 0:
            z = self.field.streams.generator(TAG_SHEET, i, full).standard_normal(xs.size + 1)
            free = np.cumsum(z[:-1] * np.sqrt(dx * full / k))
            end = free[-1] + z[-1] * math.sqrt(max(side - xs[-1], 0.0) * full / k)
            bridge = np.empty_like(xs)
            bridge[:] = free - xs * k * end
            out[order] += bridge
        if y > 0:
            low, corner = self._strip_end(i, full, y)
            z = self.field.streams.generator(TAG_BETA, i, full).standard_normal(xs.size + 3)[2:]
            free = np.cumsum(z[:-1] * np.sqrt(dx * y))
            free_end = free[-1] + z[-1] * math.sqrt(max(side - xs[-1], 0.0) * y)
            Bxy = free - xs * k * free_end + xs * k * low
            beta = Bxy - k * k * xs * y * corner
            out[order] += beta + k * k * xs * y * xi[full]
        return out

    def values(self, points) -> np.ndarray:
        """Sheet values at arbitrary rescaled points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        k = self.k
        cols = int(min(k, np.max(np.ceil(pts[:, 0] * k - 1e-9)) if pts.size else 0))
        rows = int(np.max(np.ceil(pts[:, 1] * k - 1e-9))) if pts.size else 0
        cols, rows = max(cols, 1), max(rows, 1)
        xi = np.stack([self.field.column_xi(i, rows) for i in range(cols)])
        return assemble_sheet(xi, self.field.beta_sampler, k, pts)


# ------------------------------------------------------------- Yamada

@dataclass(frozen=True)
class YamadaFunction:
    """Smooth even approximation of ``|x|`` with controlled curvature.

    The second derivative is supported on ``eps exp(-eta/m^2) <= |x| <= eps``
    where it equals ``(2 m^2 / eta) sin^2(pi u) / |x|`` with
    ``u = ln(eps/|x|) m^2 / eta``; it integrates to one on each side, so the
    first derivative climbs from 0 to 1 across the support.
    """

    eps: float
    eta: float
    m: float
    _log_width: float = field(init=False)
    _lower: float = field(init=False)
    _at_eps: float = field(init=False)

    def __post_init__(self):
        for name in ("eps", "eta", "m"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidParameter(f"{name} must be positive and finite, got {v}")
        L = self.eta / self.m**2
        lower = self.eps * math.exp(-L)
        if not lower < self.eps:
            raise InvalidParameter("support of the second derivative is empty")
        object.__setattr__(self, "_log_width", L)
        object.__setattr__(self, "_lower", lower)
        object.__setattr__(self, "_at_eps", float(self._inner_value(np.array([0.0]))[0]))

    def _u(self, ax):
        return np.log(self.eps / ax) / self._log_width

    def second(self, x) -> np.ndarray:
        ax = np.abs(np.asarray(x, dtype=float))
        inside = (ax >= self._lower) & (ax <= self.eps)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self._u(np.where(inside, ax, self.eps))
            val = (2.0 * self.m**2 / self.eta) * np.sin(np.pi * u) ** 2 / np.where(inside, ax, 1.0)
        return np.where(inside, val, 0.0)

    def first(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.clip(self._u(np.maximum(ax, 1e-300)), 0.0, 1.0)
        g = (1.0 - u) + np.sin(2.0 * np.pi * u) / (2.0 * np.pi)
        g = np.where(ax <= self._lower, 0.0, np.where(ax >= self.eps, 1.0, g))
        return np.sign(x) * g

    def _inner_value(self, u):
        # L eps * int_u^1 g(v) exp(-L v) dv by Gauss-Legendre on [u, 1].
        gx, gw = np.polynomial.legendre.leggauss(48)
        L = self._log_width
        half = 0.5 * (1.0 - u)
        v = (0.5 * (1.0 + u))[..., None] + half[..., None] * gx
        g = (1.0 - v) + np.sin(2.0 * np.pi * v) / (2.0 * np.pi)
        return L * self.eps * half * np.sum(gw * g * np.exp(-L * v), axis=-1)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.clip(self._u(np.maximum(ax, 1e-300)), 0.0, 1.0)
        inner = self._inner_value(u)
        return np.where(ax <= self._lower, 0.0,
                        np.where(ax >= self.eps, self._at_eps + ax - self.eps, inner))

    evaluate = __call__


def build_yamada(eps: float, eta: float, m: float) -> YamadaFunction:
    return YamadaFunction(float(eps), float(eta), float(m))
