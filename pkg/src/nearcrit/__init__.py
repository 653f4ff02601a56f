"""Near-critical Hawkes processes, their Poisson-to-Gaussian coupling and
CIR-type scaling limits."""

from ._backend import BACKEND
from .kernels import (KernelSpec, Regime, ScaledKernel, kernel_moments, make_exponential_kernel,
                      make_gamma2_kernel, make_kernel, scale_kernel)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "KernelSpec", "Regime", "ScaledKernel", "kernel_moments",
    "make_exponential_kernel", "make_gamma2_kernel", "make_kernel", "scale_kernel",
]
