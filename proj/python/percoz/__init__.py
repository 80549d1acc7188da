"""Ornstein-Zernike percolation lab: Python bindings for the percoz core."""

from ._percoz import (
    DomainError,
    __version__,
    estimate,
    exact,
    oz_fit,
    oz_model,
    phi,
    renewal_solve,
    synthetic_kernel,
)

__all__ = [
    "DomainError",
    "__version__",
    "estimate",
    "exact",
    "oz_fit",
    "oz_model",
    "phi",
    "renewal_solve",
    "synthetic_kernel",
]
