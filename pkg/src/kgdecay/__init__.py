"""Dissipative cubic Klein-Gordon laboratory.

Classify cubic nonlinearities F(u, u_t, u_x) of the 1D Klein-Gordon equation by
their dissipative structure, predict the logarithmic gain in the L^p decay of
small solutions, and check the prediction against direct simulation.
"""

from kgdecay.errors import (
    AmbiguousClassError,
    DomainError,
    IdenticallyZeroError,
    InstabilityError,
    InsufficientWindowError,
    NotApplicableError,
)
from kgdecay.nonlinearity import PRESETS, CubicNonlinearity, K_F_closed, P_F_coeffs
from kgdecay.classifier import CubicPoly, DissipationClass, classify, predicted_decay

__all__ = [
    "AmbiguousClassError",
    "CubicNonlinearity",
    "CubicPoly",
    "DissipationClass",
    "DomainError",
    "IdenticallyZeroError",
    "InstabilityError",
    "InsufficientWindowError",
    "K_F_closed",
    "NotApplicableError",
    "PRESETS",
    "P_F_coeffs",
    "classify",
    "predicted_decay",
]

__version__ = "0.1.0"
