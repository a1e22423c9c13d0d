"""Partial credit model estimation and recovery toolkit."""

from ._core import (
    __version__,
    category_probs,
    fit_mcmc,
    fit_mmle,
    fleishman_coeffs,
    generating_bank,
    psrf,
    simulate,
)

__all__ = [
    "__version__",
    "category_probs",
    "fit_mcmc",
    "fit_mmle",
    "fleishman_coeffs",
    "generating_bank",
    "psrf",
    "simulate",
]
