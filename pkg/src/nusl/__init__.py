"""Sparse approximation under non-uniformly distributed random supports."""

__version__ = "0.1.0"

from .model import (
    Dictionary,
    GramQuantities,
    SignalInstance,
    Support,
    SupportModel,
    build_support_model,
    make_signal,
    validate_dictionary,
)

__all__ = [
    "Dictionary",
    "GramQuantities",
    "SignalInstance",
    "Support",
    "SupportModel",
    "build_support_model",
    "make_signal",
    "validate_dictionary",
    "__version__",
]
