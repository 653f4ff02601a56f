"""Excitation kernels and the near-critical scaling of their mass.

A base kernel is a probability density on ``[0, inf)`` with finite first and
second moments and a bounded, integrable derivative. A scaled kernel
multiplies it by a criticality factor ``a_T`` that tends to one from below,
sits at one, or tends to one from above as the horizon ``T`` grows.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import InvalidParameter, InvalidRegime, NumericFailure, OutOfRange

ArrayFn = Callable[[np.ndarray], np.ndarray]

TAIL_MASS = 1e-12
L1_TOL = 1e-8


class Regime(enum.Enum):
    """Position of the kernel mass relative to one."""

    SUB = "-"
    CRITICAL = "0"
    SUPER = "+"

    @property
    def sign(self) -> int:
        """Drift coefficient of the limit equation: -1, 0 or +1."""
        return {"-": -1, "0": 0, "+": 1}[self.value]

    @property
    def label(self) -> str:
        return {"-": "sub", "0": "critical", "+": "super"}[self.value]

    @classmethod
    def parse(cls, value: "Regime | str") -> "Regime":
        if isinstance(value, Regime):
            return value
        key = str(value).strip().lower()
        aliases = {
            "-": cls.SUB, "sub": cls.SUB, "subcritical": cls.SUB, "minus": cls.SUB,
            "0": cls.CRITICAL, "crit": cls.CRITICAL, "critical": cls.CRITICAL,
            "+": cls.SUPER, "super": cls.SUPER, "supercritical": cls.SUPER, "plus": cls.SUPER,
        }
        try:
            return aliases[key]
        except KeyError:
            raise InvalidRegime(f"unknown regime {value!r}; use sub, critical or super") from None


def criticality_factor(regime: Regime | str, T: float) -> float:
    """Return ``1 - 1/T``, ``1`` or ``1 + 1/T`` according to the regime."""
    regime = Regime.parse(regime)
    if not (T >= 2):
        raise OutOfRange(f"horizon T must be >= 2, got {T}")
    return 1.0 + regime.sign / T


@dataclass(frozen=True)
class KernelSpec:
    """A base excitation kernel.

    Parameters
    ----------
    family : str
        ``"exponential"``, ``"gamma2"`` or a free label for user kernels.
    evaluate, derivative : callable
        Vectorised density and its derivative, both zero for ``t < 0``.
    beta : float or None
        Rate parameter of the shipped families.
    analytic : dict or None
        Closed-form ``l1``, ``m``, ``m2`` and optionally ``laplace`` (a
        vectorised map ``p -> int exp(-p t) phi(t) dt`` on complex ``p``).
    validate : bool
        Reject kernels whose mass differs from one. Tests switch this off to
        build degenerate kernels.
    """

    family: str
    evaluate: ArrayFn
    derivative: ArrayFn
    beta: float | None = None
    analytic: dict | None = None
    validate: bool = True
    t_cut: float = field(init=False)
    l1_norm: float = field(init=False)
    m: float = field(init=False)
    m2: float = field(init=False)

    def __post_init__(self) -> None:
        set_ = object.__setattr__
        set_(self, "t_cut", _find_cutoff(self.evaluate))
        if self.analytic is not None:
            l1, m, m2 = self.analytic["l1"], self.analytic["m"], self.analytic["m2"]
        else:
            l1, m, m2 = kernel_moments(self)
        set_(self, "l1_norm", float(l1))
        set_(self, "m", float(m))
        set_(self, "m2", float(m2))
        if self.validate and abs(self.l1_norm - 1.0) > L1_TOL:
            raise InvalidParameter(f"kernel mass must be 1, got {self.l1_norm:.12g}")

    @property
    def analytic_moments_available(self) -> bool:
        return self.analytic is not None

    def __call__(self, t):
        return self.evaluate(np.asarray(t, dtype=float))

    def laplace(self, p) -> np.ndarray:
        """``int_0^inf exp(-p t) phi(t) dt`` for complex ``p`` with ``Re p >= 0``."""
        p = np.asarray(p, dtype=complex)
        if self.analytic is not None and "laplace" in self.analytic:
            return self.analytic["laplace"](p)
        return _gauss_transform(self, p, power=0)

    def laplace_moment(self, p) -> np.ndarray:
        """``int_0^inf t exp(-p t) phi(t) dt`` for complex ``p``."""
        p = np.asarray(p, dtype=complex)
        if self.analytic is not None and "laplace_moment" in self.analytic:
            return self.analytic["laplace_moment"](p)
        return _gauss_transform(self, p, power=1)

    def sup_norm(self) -> float:
        """Maximum of the density: grid search refined by a bounded scalar search."""
        t = np.linspace(0.0, self.t_cut, 20001)
        vals = self.evaluate(t)
        j = int(np.argmax(vals))
        lo, hi = t[max(j - 1, 0)], t[min(j + 1, t.size - 1)]
        res = optimize.minimize_scalar(lambda s: -float(self.evaluate(np.array(s))), bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-12})
        return float(max(vals[j], -res.fun))


def make_exponential_kernel(beta: float) -> KernelSpec:
    """``phi(t) = beta exp(-beta t)``."""
    beta = _check_rate(beta)

    def ev(t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, beta * np.exp(-beta * np.maximum(t, 0.0)), 0.0)

    def dv(t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, -beta * beta * np.exp(-beta * np.maximum(t, 0.0)), 0.0)

    analytic = {
        "l1": 1.0,
        "m": 1.0 / beta,
        "m2": 2.0 / beta**2,
        "laplace": lambda p: beta / (beta + p),
        "laplace_moment": lambda p: beta / (beta + p) ** 2,
    }
    return KernelSpec("exponential", ev, dv, beta=beta, analytic=analytic)


def make_gamma2_kernel(beta: float) -> KernelSpec:
    """``phi(t) = beta^2 t exp(-beta t)``, vanishing at the origin."""
    beta = _check_rate(beta)

    def ev(t):
        t = np.asarray(t, dtype=float)
        tp = np.maximum(t, 0.0)
        return np.where(t >= 0, beta * beta * tp * np.exp(-beta * tp), 0.0)

    def dv(t):
        t = np.asarray(t, dtype=float)
        tp = np.maximum(t, 0.0)
        return np.where(t >= 0, beta * beta * (1.0 - beta * tp) * np.exp(-beta * tp), 0.0)

    analytic = {
        "l1": 1.0,
        "m": 2.0 / beta,
        "m2": 6.0 / beta**2,
        "laplace": lambda p: beta**2 / (beta + p) ** 2,
        "laplace_moment": lambda p: 2.0 * beta**2 / (beta + p) ** 3,
    }
    return KernelSpec("gamma2", ev, dv, beta=beta, analytic=analytic)


def make_kernel(family: str, beta: float) -> KernelSpec:
    """Build a shipped kernel from its config name."""
    makers = {"exponential": make_exponential_kernel, "exp": make_exponential_kernel,
              "gamma2": make_gamma2_kernel}
    try:
        maker = makers[str(family).lower()]
    except KeyError:
        raise InvalidParameter(f"unknown kernel family {family!r}; use exponential or gamma2") from None
    return maker(beta)


def kernel_moments(base: KernelSpec) -> tuple[float, float, float]:
    """Mass, first and second moment by adaptive quadrature.

    Integrates on ``[0, t_cut]`` and adds the tail beyond it; raises
    :class:`NumericFailure` when the tail or the quadrature error estimate
    exceeds ``1e-10``.
    """
    out = []
    t_cut = base.t_cut
    for power in (0, 1, 2):
        f = (lambda s, p=power: float(base.evaluate(np.array(s))) * s**p)
        val, err = integrate.quad(f, 0.0, t_cut, limit=500, epsabs=1e-14, epsrel=1e-13)
        tail, terr = integrate.quad(f, t_cut, np.inf, limit=200, epsabs=1e-15)
        if not (np.isfinite(val) and np.isfinite(tail)) or err > 1e-10 or abs(tail) > 1e-10:
            raise NumericFailure(
                f"moment quadrature of order {power} did not converge (err={err:.2e}, tail={tail:.2e})"
            )
        out.append(val + tail)
    return out[0], out[1], out[2]


@dataclass(frozen=True)
class ScaledKernel:
    """Base kernel multiplied by the criticality factor ``a_T``."""

    base: KernelSpec
    regime: Regime
    T: float
    a_T: float

    def evaluate(self, t):
        return self.a_T * self.base.evaluate(np.asarray(t, dtype=float))

    @property
    def m(self) -> float:
        return self.base.m


def scale_kernel(base: KernelSpec, regime: Regime | str, T: float) -> ScaledKernel:
    regime = Regime.parse(regime)
    return ScaledKernel(base, regime, float(T), criticality_factor(regime, T))


def _check_rate(beta) -> float:
    try:
        beta = float(beta)
    except (TypeError, ValueError):
        raise InvalidParameter(f"beta must be a number, got {beta!r}") from None
    if not (beta > 0 and math.isfinite(beta)):
        raise InvalidParameter(f"beta must be positive and finite, got {beta}")
    return beta


def _find_cutoff(ev: ArrayFn) -> float:
    """Smallest power-of-two multiple of a unit where the weighted tail is negligible."""
    f = lambda s: float(ev(np.array(s))) * (1.0 + s * s)
    t = 1.0
    for _ in range(40):
        tail, _ = integrate.quad(f, t, np.inf, limit=200, epsabs=1e-16)
        if abs(tail) < TAIL_MASS:
            return t
        t *= 2.0
    raise NumericFailure("kernel tail does not decay; cannot choose a truncation point")


# Composite Gauss-Legendre rule on [0, t_cut], reused for transforms.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _composite_nodes(t_cut: float, panels: int = 256):
    edges = np.linspace(0.0, t_cut, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    weights = (half[:, None] * _GL_W[None, :]).ravel()
    return nodes, weights


def _gauss_transform(base: KernelSpec, p: np.ndarray, power: int) -> np.ndarray:
    nodes, weights = _composite_nodes(base.t_cut)
    vals = base.evaluate(nodes) * weights * nodes**power
    shape = p.shape
    flat = p.ravel()
    out = np.empty(flat.shape, dtype=complex)
    for start in range(0, flat.size, 256):
        chunk = flat[start:start + 256]
        out[start:start + 256] = np.exp(-np.outer(chunk, nodes)) @ vals
    return out.reshape(shape)
