"""Cubic nonlinearities F(u, u_t, u_x) and their resonance function K_F.

A general cubic homogeneous F is stored by ten real coefficients::

    F = (g1 u^2 + g2 ut^2 + g3 ux^2 + g4 ut ux) u
      + (g5 u^2 + g6 ut^2 + g7 ux^2) ut
      + (g8 u^2 + g9 ut^2 + g10 ux^2) ux

K_F(z) is the first Fourier coefficient of F evaluated on the free oscillation
(cos t, -cosh z sin t, sinh z sin t); its real part measures dissipation along
the ray x/t = tanh z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from kgdecay.errors import DomainError

Z_MAX = 300.0


@dataclass(frozen=True)
class CubicNonlinearity:
    gamma: tuple[float, ...]

    def __post_init__(self):
        g = tuple(float(c) for c in self.gamma)
        if len(g) != 10:
            raise ValueError(f"expected 10 coefficients, got {len(g)}")
        if not all(math.isfinite(c) for c in g):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "gamma", g)

    @classmethod
    def from_terms(cls, **terms: float) -> "CubicNonlinearity":
        """Build from keyword coefficients ``g1`` .. ``g10``; missing ones are zero."""
        g = [0.0] * 10
        for name, value in terms.items():
            if not name.startswith("g") or not name[1:].isdigit():
                raise ValueError(f"unknown term {name!r}")
            k = int(name[1:])
            if not 1 <= k <= 10:
                raise ValueError(f"unknown term {name!r}")
            g[k - 1] = value
        return cls(tuple(g))

    @classmethod
    def zero(cls) -> "CubicNonlinearity":
        return cls((0.0,) * 10)

    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.gamma)

    def __add__(self, other: "CubicNonlinearity") -> "CubicNonlinearity":
        return CubicNonlinearity(tuple(a + b for a, b in zip(self.gamma, other.gamma)))

    def __mul__(self, lam: float) -> "CubicNonlinearity":
        return CubicNonlinearity(tuple(lam * a for a in self.gamma))

    __rmul__ = __mul__


# Named examples: B1, B2, B3, C, B0 and a non-dissipative (A0) reference.
PRESETS: dict[str, CubicNonlinearity] = {
    "u2ut": CubicNonlinearity.from_terms(g5=-1),
    "u2utux": CubicNonlinearity.from_terms(g5=-1, g8=-1),
    "utpux3": CubicNonlinearity.from_terms(g6=-1, g7=-3, g9=-3, g10=-1),
    "ux2ut": CubicNonlinearity.from_terms(g7=-1),
    "ut3": CubicNonlinearity.from_terms(g6=-1),
    "u3": CubicNonlinearity.from_terms(g1=1),
}


def eval_F(nl: CubicNonlinearity, u, ut, ux):
    """Evaluate F pointwise; accepts scalars or numpy arrays."""
    g1, g2, g3, g4, g5, g6, g7, g8, g9, g10 = nl.gamma
    u2 = u * u
    ut2 = ut * ut
    ux2 = ux * ux
    return (
        (g1 * u2 + g2 * ut2 + g3 * ux2 + g4 * ut * ux) * u
        + (g5 * u2 + g6 * ut2 + g7 * ux2) * ut
        + (g8 * u2 + g9 * ut2 + g10 * ux2) * ux
    )


def _check_z(z: float) -> None:
    if not abs(z) <= Z_MAX:
        raise DomainError(f"|z| must be <= {Z_MAX}, got {z}")


def K_F_closed(nl: CubicNonlinearity, z: float) -> complex:
    _check_z(z)
    g1, g2, g3, g4, g5, g6, g7, g8, g9, g10 = nl.gamma
    c = math.cosh(z)
    s = math.sinh(z)
    im = (3 * g1 + g2 * c * c + g3 * s * s - g4 * c * s) / 8
    re = -c * (g5 + 3 * g6 * c * c + 3 * g7 * s * s) / 8 + s * (
        g8 + 3 * g9 * c * c + 3 * g10 * s * s
    ) / 8
    return complex(re, im)


def K_F_quadrature(nl: CubicNonlinearity, z: float, n_nodes: int = 64) -> complex:
    """Periodic trapezoid rule for (i / 2pi) * int_0^{2pi} F(...) e^{-i theta} d theta.

    Exact to rounding once ``n_nodes`` exceeds the integrand's trigonometric
    degree (4), so 16 nodes already suffice.
    """
    if n_nodes < 8:
        raise ValueError("n_nodes must be >= 8")
    _check_z(z)
    theta = 2 * np.pi * np.arange(n_nodes) / n_nodes
    sin = np.sin(theta)
    vals = eval_F(nl, np.cos(theta), -math.cosh(z) * sin, math.sinh(z) * sin)
    mean = np.mean(vals * np.exp(-1j * theta))
    return complex(1j * mean)


def P_F_coeffs(nl: CubicNonlinearity):
    """Coefficients of P_F(y) = 8 (1 - y^2)^{3/2} Re K_F(atanh y), lowest degree first."""
    from kgdecay.classifier import CubicPoly

    g = nl.gamma
    g5, g6, g7, g8, g9, g10 = g[4], g[5], g[6], g[7], g[8], g[9]
    return CubicPoly(
        -(g5 + 3 * g6),
        g8 + 3 * g9,
        g5 - 3 * g7,
        3 * g10 - g8,
    )


def nonlinearity_from_poly(p0: float, p1: float, p2: float, p3: float) -> CubicNonlinearity:
    """A nonlinearity (using only u_t^3, u_x^2 u_t, u_t^2 u_x, u_x^3) with the given P_F."""
    return CubicNonlinearity.from_terms(g6=-p0 / 3, g9=p1 / 3, g7=-p2 / 3, g10=p3 / 3)
