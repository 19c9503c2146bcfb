"""Polynomial approximation of non-polynomial functions.

Builds Chebyshev interpolants, sharpens them into near-minimax polynomials
via the Caratheodory-Fejer construction, and lowers `polynomial.eval` ops
into multiplication-efficient baby-step/giant-step arithmetic.
"""
from .chebyshev import ChebSeries, chebyshev_coefficients, chebyshev_to_monomial
from .cf import CfResult, cf_approximate, cf_approximate_info

__all__ = [
    "ChebSeries",
    "chebyshev_coefficients",
    "chebyshev_to_monomial",
    "CfResult",
    "cf_approximate",
    "cf_approximate_info",
]
