"""Monte Carlo estimates of the coupling and convergence bounds.

Every estimator is a map over replications followed by an ordered
reduction. Replication ``r`` of an experiment draws only from
``Streams(experiment_seed(seed, ...), r)``, so results do not depend on how
replications are scheduled across worker processes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .coupling import CoupledSheet, default_cells, sample_poisson_field
from .errors import CapacityError, InvalidInput, InvalidParameter
from .hawkes import HawkesPath, default_theta_max, simulate_hawkes
from .kernels import Regime, make_kernel, scale_kernel
from .limit_process import LimitPath, simulate_cir_reference, simulate_limit_coupled
from .rng import TAG_LIMIT, TAG_PAIRS, Streams, experiment_seed

# Experiment labels mixed into seeds; part of the reproducibility contract.
EXP_CELL = 1
EXP_INTEGRAL = 2
EXP_CONVERGE = 3
EXP_HAWKES = 4
EXP_LIMIT = 5


# ------------------------------------------------------------ summaries

@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int


def summarize(samples) -> Estimate:
    """Sample mean with its standard error (``nan`` error below two samples)."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n == 0:
        return Estimate(float("nan"), float("nan"), 0)
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return Estimate(mean, se, n)


@dataclass(frozen=True)
class RateFit:
    xs: np.ndarray
    ys: np.ndarray
    stderrs: np.ndarray
    slope: float
    intercept: float
    r2: float

    def predict(self, x) -> np.ndarray:
        return np.exp(self.intercept) * np.asarray(x, dtype=float) ** self.slope


def fit_rate(xs, ys, stderrs=None) -> RateFit:
    """Least squares of ``ln y`` on ``ln x``.

    Points are weighted by ``(y / se)**2``, the inverse delta-method variance
    of ``ln y``, when every standard error is positive and finite; otherwise
    the fit is unweighted.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise InvalidInput("xs and ys must be one-dimensional and of equal length")
    if xs.size < 3:
        raise InvalidInput(f"need at least 3 points, got {xs.size}")
    if np.any(~np.isfinite(ys)) or np.any(ys <= 0):
        raise InvalidInput("rate fit needs positive finite ys")
    if np.any(xs <= 0):
        raise InvalidInput("rate fit needs positive xs")
    se = np.full(xs.shape, np.nan) if stderrs is None else np.asarray(stderrs, dtype=float)
    if np.all(np.isfinite(se)) and np.all(se > 0):
        w = (ys / se) ** 2
    else:
        w = np.ones_like(ys)
    lx, ly = np.log(xs), np.log(ys)
    W = w.sum()
    mx, my = (w @ lx) / W, (w @ ly) / W
    sxx = w @ (lx - mx) ** 2
    slope = float((w @ ((lx - mx) * (ly - my))) / sxx)
    intercept = float(my - slope * mx)
    resid = ly - intercept - slope * lx
    tot = w @ (ly - my) ** 2
    r2 = 1.0 if tot == 0 else float(1.0 - (w @ resid ** 2) / tot)
    return RateFit(xs, ys, se, slope, intercept, r2)


# ------------------------------------------------------------ envelopes

@dataclass(frozen=True)
class EnvelopeCheck:
    constant: float
    fit_index: tuple
    envelope: np.ndarray
    passed: bool


def envelope_least_squares(ys, shape, fit_index) -> float:
    """``C`` minimising ``sum (y - C g)^2`` over the fit points."""
    y = np.asarray(ys, dtype=float)[list(fit_index)]
    g = np.asarray(shape, dtype=float)[list(fit_index)]
    return float(g @ y / (g @ g))


def envelope_max_ratio(ys, shape, fit_index) -> float:
    """Smallest ``C`` with ``y <= C g`` on the fit points."""
    y = np.asarray(ys, dtype=float)[list(fit_index)]
    g = np.asarray(shape, dtype=float)[list(fit_index)]
    return float(np.max(y / g))


def check_envelope(ys, stderrs, shape, constant, fit_index=(), sigmas: float = 3.0) -> EnvelopeCheck:
    """Every point lies below ``C g`` within ``sigmas`` standard errors."""
    y = np.asarray(ys, dtype=float)
    se = np.nan_to_num(np.asarray(stderrs, dtype=float))
    env = constant * np.asarray(shape, dtype=float)
    ok = bool(np.all(y - sigmas * se <= env))
    return EnvelopeCheck(float(constant), tuple(fit_index), env, ok)


def small_half(n: int) -> tuple:
    """Indices of the first half (rounded up) of a sweep sorted by size."""
    return tuple(range((n + 1) // 2))


def interleaved_half(n: int) -> tuple:
    """Even indices of a sweep."""
    return tuple(range(0, n, 2))


# ------------------------------------------------------------ parallel map

def run_replications(fn: Callable, tasks: Sequence, threads: int = 1) -> list:
    """``[fn(t) for t in tasks]`` in task order, optionally across processes."""
    if threads is None or threads <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


# ------------------------------------------------------------ kernel config

@dataclass(frozen=True)
class ModelConfig:
    """Kernel family, rate, regime and baseline of one Hawkes model."""

    family: str = "exponential"
    beta: float = 1.0
    regime: str = "-"
    mu: float = 1.0

    def scaled(self, T: float):
        return scale_kernel(make_kernel(self.family, self.beta), self.regime, T)

    def code(self) -> tuple:
        fam = {"exponential": 1, "gamma2": 2}.get(self.family, 0)
        return fam, float(self.beta), Regime.parse(self.regime).sign + 1, float(self.mu)


def _coupled_run(model: ModelConfig, T: float, streams: Streams, k: int, retries: int = 3,
                 with_limit: bool = False):
    """Field, Hawkes path and optionally the coupled limit path.

    The ceiling doubles whenever either path leaves it; the same streams are
    reused, so lower cells keep their values. Returns ``None`` once retries
    are exhausted.
    """
    sk = model.scaled(T)
    theta = default_theta_max(sk, model.mu)
    for _ in range(retries + 1):
        fld = sample_poisson_field(T, theta, streams, k=k)
        try:
            hp = simulate_hawkes(sk, model.mu, fld)
            X = None
            if with_limit:
                X = simulate_limit_coupled(model.regime, model.mu, sk.base.m, CoupledSheet(fld))
            return fld, hp, X
        except CapacityError:
            theta *= 2.0
    return None


# ------------------------------------------------------------ cell coupling

def cell_coupling_samples(T: float, k: int, cells: int, seed: int):
    """Gaussianized increments and their rescaled Poisson counterparts.

    Fields of height one supply ``k**2`` independent cells each; as many are
    drawn as needed and the first ``cells`` kept, column by column.
    """
    if cells < 1:
        raise InvalidParameter("cells must be positive")
    s = experiment_seed(seed, EXP_CELL, float(T), k)
    xi_all, delta_all = [], []
    have, block = 0, 0
    while have < cells:
        fld = sample_poisson_field(T, 1.0, Streams(s, block), k=k)
        for i in range(k):
            counts = fld.column_counts(i, k)
            xi_all.append(fld.column_xi(i, k))
            delta_all.append(counts / T - T / k**2)
            have += k
            if have >= cells:
                break
        block += 1
    return np.concatenate(xi_all)[:cells], np.concatenate(delta_all)[:cells]


@dataclass(frozen=True)
class CellCouplingResult:
    k: int
    estimates: list
    fit: RateFit


def estimate_cell_coupling(T_list, k: int, reps: int, seed: int) -> CellCouplingResult:
    """Mean squared cell difference ``E|W(cell) - N~(cell)|^2`` for each ``T``."""
    T_list = [float(t) for t in T_list]
    ests = []
    for T in T_list:
        xi, delta = cell_coupling_samples(T, k, reps, seed)
        ests.append(summarize((xi - delta) ** 2))
    fit = fit_rate(T_list, [e.mean for e in ests], [e.stderr for e in ests])
    return CellCouplingResult(k, ests, fit)


# ------------------------------------------------------------ integral coupling

def _integral_rep(task):
    model, T, k, f, seed, rep = task
    streams = Streams(experiment_seed(seed, EXP_INTEGRAL, *model.code(), float(T), k), rep)
    run = _coupled_run(model, T, streams, k)
    if run is None:
        return None
    fld, hp, _ = run
    sheet = CoupledSheet(fld)
    nodes = np.arange(k) / k
    left = hp.intensity(nodes * T)[0] / T
    weights = np.array([float(f(t)) for t in nodes])
    base, best = 0.0, 0.0
    for i in range(k):
        level = left[i]
        rows = min(fld.grid.rows, int(math.ceil(level * k)) + 1)
        t, th, _ = fld.column_points(i, rows)
        ts = t[th <= level * T]
        x = np.append(np.clip(ts / T - i / k, 0.0, 1.0 / k), 1.0 / k)
        w = sheet.column_profile(i, level, x)
        after = np.arange(1, ts.size + 1) / T - T * level * x[:-1]
        diff_after = after - w[:-1]
        end = ts.size / T - T * level / k - w[-1]
        if ts.size:
            vals = base + weights[i] * np.concatenate([diff_after, diff_after - 1.0 / T])
            best = max(best, float(np.max(np.abs(vals))))
        base += weights[i] * end
        best = max(best, abs(base))
    return best * best


@dataclass(frozen=True)
class IntegralCouplingResult:
    T: float
    k_list: list
    estimates: list
    incomplete: list
    fit: RateFit | None


def estimate_integral_coupling(T: float, k_list, reps: int, f: Callable = None, seed: int = 0,
                               model: ModelConfig = ModelConfig(), threads: int = 1
                               ) -> IntegralCouplingResult:
    """``E sup_t |int f 1(theta <= u) d(N~ - W)|^2`` for each number of cells.

    ``u`` is the simulated intensity frozen at the left end of each column,
    and ``f`` is sampled at the same nodes. The sup runs over column ends
    and both sides of every field point below ``u``, where the difference
    attains its extremes.
    """
    if f is None:
        f = _unit_weight
    probe = np.array([float(f(t)) for t in np.linspace(0.0, 1.0, 257)])
    if not np.all(np.isfinite(probe)):
        raise InvalidParameter("weight function is not finite on [0, 1]")
    ests, incomplete = [], []
    for k in k_list:
        tasks = [(model, float(T), int(k), f, seed, r) for r in range(reps)]
        out = run_replications(_integral_rep, tasks, threads)
        vals = [v for v in out if v is not None]
        incomplete.append(len(out) - len(vals))
        ests.append(summarize(vals))
    ys = [e.mean for e in ests]
    fit = None
    if len(k_list) >= 3 and all(y > 0 for y in ys):
        fit = fit_rate(k_list, ys, [e.stderr for e in ests])
    return IntegralCouplingResult(float(T), list(k_list), ests, incomplete, fit)


def _unit_weight(t):
    return 1.0


def integral_envelope_shape(T: float, k_list) -> np.ndarray:
    k = np.asarray(k_list, dtype=float)
    return 1.0 / k + k**2 / T**2


# ------------------------------------------------------------ distance to the limit

@dataclass(frozen=True)
class ConvergeSample:
    """Squared sup distances of one replication."""

    intensity: float
    integrated: float
    counts: float
    martingale: float


def sup_distances(hp: HawkesPath, X: LimitPath, sheet: CoupledSheet) -> ConvergeSample:
    """Squared sup distances between a Hawkes path and its coupled limit.

    Evaluated on the union of the limit's grid and both sides of every
    event: the intensity ``Lambda`` against ``X``; the integrated intensity
    and the scaled counts ``H/T^2`` against ``int X``; and the compensated
    counts ``(H - int lambda)/T`` against ``int 1(theta <= X) dW`` with the
    level held on each column.
    """
    T, k = hp.T, sheet.k
    ev = hp.events / T
    nodes = X.grid
    left_e, right_e, comp_e = hp.intensity(hp.events)
    left_n, _, comp_n = hp.intensity(nodes * T)
    H_e = np.arange(1, ev.size + 1, dtype=float)
    H_n = hp.counts(nodes * T).astype(float)

    x_e, x_n = X.at(ev), X.X_values
    d_int = max(np.max(np.abs(left_n / T - x_n), initial=0.0),
                np.max(np.abs(left_e / T - x_e), initial=0.0),
                np.max(np.abs(right_e / T - x_e), initial=0.0))

    ix_e, ix_n = X.integral(ev), X.integral(nodes)
    d_cum = max(np.max(np.abs(comp_n / T**2 - ix_n), initial=0.0),
                np.max(np.abs(comp_e / T**2 - ix_e), initial=0.0))
    d_cnt = max(np.max(np.abs(H_n / T**2 - ix_n), initial=0.0),
                np.max(np.abs(H_e / T**2 - ix_e), initial=0.0),
                np.max(np.abs((H_e - 1) / T**2 - ix_e), initial=0.0))

    w_nodes = X.sheet_integral()
    col = np.minimum(np.maximum(np.ceil(ev * k - 1e-9).astype(int) - 1, 0), k - 1)
    w_e = np.empty(ev.size)
    for i in np.unique(col):
        sel = col == i
        w_e[sel] = w_nodes[i] + sheet.column_profile(int(i), float(X.X_values[i]), ev[sel] - i / k)
    m_e = (H_e - comp_e) / T
    d_mart = max(np.max(np.abs((H_n - comp_n) / T - w_nodes), initial=0.0),
                 np.max(np.abs(m_e - w_e), initial=0.0),
                 np.max(np.abs(m_e - 1.0 / T - w_e), initial=0.0))
    return ConvergeSample(d_int**2, d_cum**2, d_cnt**2, d_mart**2)


def _converge_rep(task):
    model, T, k, seed, rep = task
    streams = Streams(experiment_seed(seed, EXP_CONVERGE, *model.code(), float(T), k), rep)
    run = _coupled_run(model, T, streams, k, with_limit=True)
    if run is None:
        return None
    fld, hp, X = run
    return sup_distances(hp, X, CoupledSheet(fld))


@dataclass(frozen=True)
class ConvergeResult:
    model: ModelConfig
    T_list: list
    k_list: list
    intensity: list
    integrated: list
    counts: list
    martingale: list
    incomplete: list

    def fit(self, name: str = "intensity") -> RateFit:
        """Fit of the estimates against ``ln T``; a slope of -1 is ``C/ln T``."""
        ests = getattr(self, name)
        return fit_rate(np.log(self.T_list), [e.mean for e in ests], [e.stderr for e in ests])


def estimate_convergence(model: ModelConfig, T_list, reps: int, seed: int, k: int | None = None,
                         threads: int = 1) -> ConvergeResult:
    """Run the coupled pipeline once per replication and ``T``.

    ``k`` defaults to ``floor(T**0.8) + 1`` for every ``T``. Replications
    whose ceiling retries run out are counted in ``incomplete`` and left out
    of the means.
    """
    T_list = [float(t) for t in T_list]
    cols = {n: [] for n in ("intensity", "integrated", "counts", "martingale")}
    ks, incomplete = [], []
    for T in T_list:
        kk = default_cells(T) if k is None else int(k)
        ks.append(kk)
        out = run_replications(_converge_rep, [(model, T, kk, seed, r) for r in range(reps)], threads)
        done = [o for o in out if o is not None]
        incomplete.append(len(out) - len(done))
        for n in cols:
            cols[n].append(summarize([getattr(o, n) for o in done]))
    return ConvergeResult(model, T_list, ks, cols["intensity"], cols["integrated"], cols["counts"],
                          cols["martingale"], incomplete)


def estimate_intensity_distance(model: ModelConfig, T_list, reps: int, seed: int, threads: int = 1):
    """``E sup_t |Lambda_t - X_t|^2`` per ``T`` and its fit against ``ln T``."""
    res = estimate_convergence(model, T_list, reps, seed, threads=threads)
    ys = [e.mean for e in res.intensity]
    fit = res.fit("intensity") if len(T_list) >= 3 and all(y > 0 for y in ys) else None
    return res, fit


def estimate_path_distances(model: ModelConfig, T: float, reps: int, seed: int, threads: int = 1):
    """Integrated-intensity, count and martingale sup distances at one ``T``."""
    res = estimate_convergence(model, [T], reps, seed, threads=threads)
    return res.integrated[0], res.counts[0], res.martingale[0]


# Names used by the published interface.
estimate_theorem41 = estimate_intensity_distance
estimate_corollary44 = estimate_path_distances


def log_envelope_check(ests, T_list, sigmas: float = 3.0):
    """Strict decrease and ``y <= C/ln T`` with ``C`` set by the smallest ``T``."""
    ys = np.array([e.mean for e in ests])
    se = np.array([e.stderr for e in ests])
    shape = 1.0 / np.log(np.asarray(T_list, dtype=float))
    C = float(ys[0] / shape[0])
    env = check_envelope(ys, se, shape, C, (0,), sigmas)
    decreasing = bool(np.all(np.diff(ys) < 0))
    return decreasing, env


# ------------------------------------------------------------ Hawkes properties

def _hawkes_rep(task):
    model, T, grid, seed, rep = task
    streams = Streams(experiment_seed(seed, EXP_HAWKES, *model.code(), float(T)), rep)
    run = _coupled_run(model, T, streams, None)
    if run is None:
        return None
    hp = run[1]
    left, _, comp = hp.intensity(np.append(grid * T, T))
    HT = float(hp.events.size)
    return left[:-1] / T, (HT - comp[-1]) / T, HT / T**2


def hawkes_samples(model: ModelConfig, T: float, reps: int, seed: int, grid, threads: int = 1):
    """Rescaled intensity on ``grid`` plus the terminal martingale and ``H_T/T^2``.

    Returns ``(Lambda, martingale, counts, incomplete)`` with ``Lambda`` of
    shape ``(done, grid.size)``.
    """
    grid = np.asarray(grid, dtype=float)
    out = run_replications(_hawkes_rep, [(model, float(T), grid, seed, r) for r in range(reps)], threads)
    done = [o for o in out if o is not None]
    lam = np.array([o[0] for o in done])
    mart = np.array([o[1] for o in done])
    cnt = np.array([o[2] for o in done])
    return lam, mart, cnt, len(out) - len(done)


def bracket_check(martingale, counts, sigmas: float = 3.0):
    """Variance of the terminal martingale against the mean of ``H_T/T^2``.

    Returns ``(variance, mean, combined_stderr, passed)``.
    """
    M = np.asarray(martingale, dtype=float)
    Q = np.asarray(counts, dtype=float)
    n = M.size
    c = M - M.mean()
    var = float(np.mean(c**2) * n / (n - 1))
    se_var = math.sqrt(max(float(np.mean(c**4)) - var**2, 0.0) / n)
    se_q = float(np.std(Q, ddof=1) / math.sqrt(n))
    se = math.hypot(se_var, se_q)
    mean = float(Q.mean())
    return var, mean, se, abs(var - mean) <= sigmas * se


def discretization_estimates(lam_fine, grid, k_list) -> list:
    """``max_t E|Lambda_t - Lambda_bar_t|^2`` for each ``k`` from sampled paths."""
    grid = np.asarray(grid, dtype=float)
    out = []
    for k in k_list:
        idx = np.maximum(np.ceil(grid * k - 1e-9).astype(int) - 1, 0)
        node_pos = np.searchsorted(grid, idx / k - 1e-12)
        if not np.allclose(grid[node_pos], idx / k, atol=1e-12):
            raise InvalidInput(f"grid does not contain the nodes of k={k}")
        sq = (lam_fine - lam_fine[:, node_pos]) ** 2
        means = sq.mean(axis=0)
        j = int(np.argmax(means))
        out.append(Estimate(float(means[j]), float(sq[:, j].std(ddof=1) / math.sqrt(sq.shape[0])),
                            sq.shape[0]))
    return out


def holder_estimates(lam_fine, grid, lags, seed: int, pairs: int = 16) -> list:
    """``E|Lambda_{s+h} - Lambda_s|^2`` over random ``s`` for each lag ``h``.

    ``s`` is drawn uniformly from grid points with ``s + h`` on the grid;
    each replication contributes ``pairs`` draws per lag.
    """
    grid = np.asarray(grid, dtype=float)
    step = grid[1] - grid[0]
    rng = Streams(experiment_seed(seed, EXP_HAWKES, TAG_PAIRS), 0).fresh(TAG_PAIRS)
    out = []
    for h in lags:
        d = int(round(h / step))
        if d < 1 or d >= grid.size:
            raise InvalidInput(f"lag {h} is not a positive multiple of the grid step below 1")
        starts = rng.integers(0, grid.size - d, size=(lam_fine.shape[0], pairs))
        rows = np.arange(lam_fine.shape[0])[:, None]
        sq = (lam_fine[rows, starts + d] - lam_fine[rows, starts]) ** 2
        per_rep = sq.mean(axis=1)
        out.append(summarize(per_rep))
    return out


# ------------------------------------------------------------ limit process

def _limit_rep(task):
    model, T, k, seed, rep = task
    streams = Streams(experiment_seed(seed, EXP_LIMIT, *model.code(), float(T), k), rep)
    sk = model.scaled(T)
    theta = default_theta_max(sk, model.mu)
    for _ in range(4):
        fld = sample_poisson_field(T, theta, streams, k=k)
        try:
            return simulate_limit_coupled(model.regime, model.mu, sk.base.m, CoupledSheet(fld)).X_values
        except CapacityError:
            theta *= 2.0
    return None


def limit_samples(model: ModelConfig, T: float, reps: int, seed: int, driver: str = "coupled",
                  k: int | None = None, threads: int = 1) -> np.ndarray:
    """Limit paths on a grid of ``k`` steps, one row per replication.

    ``driver`` is ``coupled`` (sheet built from a Poisson field of scale
    ``T``) or ``reference`` (independent Gaussians). ``k`` defaults to
    ``floor(T**0.8) + 1``.
    """
    k = default_cells(T) if k is None else int(k)
    if driver == "coupled":
        out = run_replications(_limit_rep, [(model, float(T), k, seed, r) for r in range(reps)], threads)
        return np.array([o for o in out if o is not None])
    if driver == "reference":
        m = make_kernel(model.family, model.beta).m
        rng = Streams(experiment_seed(seed, EXP_LIMIT, *model.code(), float(T), k), 0).fresh(TAG_LIMIT)
        return simulate_cir_reference(model.regime, model.mu, m, rng, k=k, reps=reps).X_values
    raise InvalidParameter(f"unknown driver {driver!r}")


def limit_mean(regime, mu: float, m: float, t) -> np.ndarray:
    """``E X_t`` of the limit diffusion started at zero."""
    t = np.asarray(t, dtype=float)
    c = Regime.parse(regime).sign
    if c == 0:
        return mu * t / m
    return c * mu * (np.exp(c * t / m) - 1.0)


# ------------------------------------------------------------ reports

@dataclass
class ExperimentReport:
    """Deterministic record of one experiment.

    Timing and host details are kept out of this record; they go to a
    separate metadata file so that reruns compare byte for byte.
    """

    experiment: str
    config: dict
    seed: int
    rows: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_json(self) -> str:
        return json.dumps(_plain(asdict(self)), sort_keys=True, indent=2, allow_nan=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def fit_record(fit: RateFit | None) -> dict | None:
    if fit is None:
        return None
    return {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2}
