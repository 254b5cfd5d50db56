"""Numerical laboratory for u_t + f(u)_x = G[u] with a singular odd convolution kernel G."""

__version__ = "0.1.0"

from .grid import GridError, GridFunction, derivative, fractional_tv, norm, total_variation
from .kernels import Kernel, KernelError, apply_periodic, apply_pv, eval_kernel
from .semigroup import BoundConstants, Flux, godunov_evolve, lax_oleinik_oracle, oleinik_check

__all__ = [
    "BoundConstants",
    "Flux",
    "GridError",
    "GridFunction",
    "Kernel",
    "KernelError",
    "apply_periodic",
    "apply_pv",
    "derivative",
    "eval_kernel",
    "fractional_tv",
    "godunov_evolve",
    "lax_oleinik_oracle",
    "norm",
    "oleinik_check",
    "total_variation",
]
