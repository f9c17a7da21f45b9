"""Exact sum-product computations in prime fields."""

from .fpcore import (
    DomainError,
    ElementSet,
    Prime,
    SetLiteralError,
    difference_set,
    dilate,
    format_set_literal,
    mod_inverse,
    parse_set_literal,
    product_set,
    ratio_of_differences,
    ratio_set_simple,
    signed_sumset,
    sumset,
    translate,
)

__version__ = "0.1.0"
