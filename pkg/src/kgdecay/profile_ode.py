"""Amplitude (profile) equation  d beta/d tau = -(kappa/tau)|beta|^2 beta + forcing.

With no forcing the equation is solvable in closed form: 1/|beta|^2 grows
linearly in log tau with slope 2 Re kappa, and the phase drifts by
Im kappa * |beta|^2 integrated against d log tau, which is the ``L_func`` below.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from kgdecay.errors import DomainError
from kgdecay.nonlinearity import CubicNonlinearity, K_F_closed

Forcing = Callable[[float], complex]


def L_func(s: float, phi: float) -> float:
    """-int_1^s dsigma / (sigma (1 + 2 phi log sigma)), in closed form."""
    if not s > 0:
        raise DomainError(f"s must be positive, got {s}")
    ls = math.log(s)
    arg = 2 * phi * ls
    if 1 + arg <= 0:
        raise DomainError(f"1 + 2*phi*log(s) = {1 + arg:.3g} <= 0")
    if phi == 0 or arg == 0:
        return -ls
    return -math.log1p(arg) / (2 * phi)


def L_func_quadrature(s: float, phi: float, n: int = 1000) -> float:
    """Adaptive quadrature of the defining integral in w = log sigma.

    ``n`` bounds the number of adaptive subintervals.
    """
    if not s > 0:
        raise DomainError(f"s must be positive, got {s}")
    ls = math.log(s)
    if 1 + 2 * phi * ls <= 0:
        raise DomainError("1 + 2*phi*log(s) <= 0")
    val, _ = integrate.quad(
        lambda w: 1.0 / (1 + 2 * phi * w), 0.0, ls, epsabs=0.0, epsrel=1e-13, limit=n
    )
    return -val


@dataclass(frozen=True)
class ProfileParams:
    kappa: complex
    beta0: complex
    tau0: float

    def __post_init__(self):
        if complex(self.kappa).real < 0:
            raise ValueError("Re kappa must be >= 0")
        if not self.tau0 > 1:
            raise ValueError("tau0 must exceed 1")


@dataclass(frozen=True)
class ProfileTrajectory:
    taus: np.ndarray
    betas: np.ndarray

    def __len__(self):
        return len(self.taus)


def integrate_profile(
    params: ProfileParams,
    forcing: Optional[Forcing],
    tau_end: float,
    steps_per_decade: int = 1000,
) -> ProfileTrajectory:
    """Classical RK4 in s = log tau, uniform steps, last step shortened to hit tau_end."""
    if not tau_end > params.tau0:
        raise ValueError("tau_end must exceed tau0")
    if steps_per_decade < 100:
        raise ValueError("steps_per_decade must be >= 100")
    kappa = complex(params.kappa)
    s0, s1 = math.log(params.tau0), math.log(tau_end)
    h = math.log(10.0) / steps_per_decade
    n = max(1, math.ceil((s1 - s0) / h - 1e-9))
    s_grid = s0 + h * np.arange(n + 1)
    s_grid[-1] = s1

    def rhs(s, b):
        out = -kappa * (b.real * b.real + b.imag * b.imag) * b
        if forcing is not None:
            tau = math.exp(s)
            out += tau * complex(forcing(tau))
        return out

    betas = np.empty(n + 1, dtype=complex)
    b = complex(params.beta0)
    betas[0] = b
    for i in range(n):
        s = s_grid[i]
        dt = s_grid[i + 1] - s
        k1 = rhs(s, b)
        k2 = rhs(s + dt / 2, b + dt / 2 * k1)
        k3 = rhs(s + dt / 2, b + dt / 2 * k2)
        k4 = rhs(s + dt, b + dt * k3)
        nb = b + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not cmath.isfinite(nb) or abs(nb) > 10 * max(abs(b), 1e-300):
            raise DomainError(
                f"|beta| jumped from {abs(b):.3g} to {abs(nb):.3g} at tau={math.exp(s):.6g}; "
                "is Re kappa >= 0 and the step small enough?"
            )
        b = nb
        betas[i + 1] = b
    return ProfileTrajectory(np.exp(s_grid), betas)


def exact_profile(params: ProfileParams, tau: float) -> complex:
    """Closed-form unforced solution started from beta0 at tau0."""
    kappa = complex(params.kappa)
    b0 = complex(params.beta0)
    m0 = abs(b0) ** 2
    ratio = tau / params.tau0
    denom = 1 + 2 * kappa.real * m0 * math.log(ratio)
    if denom <= 0:
        raise DomainError("1 + 2 Re(kappa)|beta0|^2 log(tau/tau0) <= 0")
    phase = kappa.imag * m0 * L_func(ratio, kappa.real * m0)
    return b0 * cmath.exp(1j * phase) / math.sqrt(denom)


def asymptotic_form(kappa: complex, beta_inf: complex, tau: float) -> complex:
    """beta_inf exp(i Im k |b|^2 L(tau, Re k |b|^2)) / sqrt(1 + 2 Re k |b|^2 log tau)."""
    kappa = complex(kappa)
    m = abs(beta_inf) ** 2
    denom = 1 + 2 * kappa.real * m * math.log(tau)
    if denom <= 0:
        raise DomainError("1 + 2 Re(kappa)|beta_inf|^2 log(tau) <= 0")
    phase = kappa.imag * m * L_func(tau, kappa.real * m)
    return beta_inf * cmath.exp(1j * phase) / math.sqrt(denom)


def invert_asymptotic_form(kappa: complex, beta: complex, tau: float) -> complex:
    """The beta_inf whose asymptotic form passes through ``beta`` at ``tau``."""
    kappa = complex(kappa)
    m = abs(beta) ** 2
    denom = 1 - 2 * kappa.real * m * math.log(tau)
    if denom <= 0:
        raise DomainError("trajectory is not of the damped asymptotic form at this tau")
    m_inf = m / denom
    phase = kappa.imag * m_inf * L_func(tau, kappa.real * m_inf)
    return beta * cmath.exp(-1j * phase) * math.sqrt(m_inf / m) if m > 0 else 0j


def fit_beta_inf(kappa: complex, traj: ProfileTrajectory, tail: float = 0.1) -> complex:
    """Average the inverted closed form over the last ``tail`` fraction of log tau."""
    s = np.log(traj.taus)
    cut = s[-1] - tail * (s[-1] - s[0])
    sel = np.nonzero(s >= cut)[0]
    vals = [invert_asymptotic_form(kappa, traj.betas[i], traj.taus[i]) for i in sel]
    return complex(np.mean(vals))


def leading_profile_A(
    z: float,
    tau: float,
    beta_inf: complex,
    nl: CubicNonlinearity,
    chi: Callable[[float], float] = lambda z: 1.0,
    log_argument: bool = True,
) -> complex:
    """Leading part A(tau, z) of the amplitude along the ray z.

    The modulus uses log(tau cosh z).  The phase uses L(log(tau cosh z), .) as
    displayed for the z-uniform statement; ``log_argument=False`` switches to
    L(tau cosh z, .), which is the form consistent with the unforced solution.
    """
    k = K_F_closed(nl, z)
    w = chi(z) ** 2
    m = abs(beta_inf) ** 2
    rho = tau * math.cosh(z)
    if not rho > 1:
        raise DomainError("tau cosh z must exceed 1")
    lg = math.log(rho)
    phi = w * k.real * m
    denom = 1 + 2 * phi * lg
    if denom <= 0:
        raise DomainError("1 + 2 chi^2 Re K_F |beta_inf|^2 log(tau cosh z) <= 0")
    if beta_inf == 0:
        return 0j
    phase = w * k.imag * m * L_func(lg if log_argument else rho, phi)
    return beta_inf * cmath.exp(1j * phase) / math.sqrt(denom)


@dataclass(frozen=True)
class DeviationReport:
    taus: np.ndarray
    scaled: np.ndarray
    beta_inf: complex

    @property
    def max(self) -> float:
        return float(np.max(self.scaled))

    def decade_means(self) -> tuple[float, float]:
        """Mean scaled deviation over the first and the last decade of the range."""
        lt = np.log10(self.taus)
        first = self.scaled[lt <= lt[0] + 1]
        last = self.scaled[lt >= lt[-1] - 1]
        return float(first.mean()), float(last.mean())


def asymptotics_deviation(
    params: ProfileParams,
    forcing: Optional[Forcing],
    tau_range: tuple[float, float],
    steps_per_decade: int = 1000,
) -> DeviationReport:
    """|beta - asymptotic form| (log tau)^{3/2} over ``tau_range``, beta_inf fitted from the tail."""
    lo, hi = tau_range
    if not params.tau0 <= lo < hi:
        raise ValueError("need tau0 <= tau_range[0] < tau_range[1]")
    traj = integrate_profile(params, forcing, hi, steps_per_decade)
    binf = fit_beta_inf(params.kappa, traj)
    sel = traj.taus >= lo
    taus = traj.taus[sel]
    dev = np.array(
        [abs(b - asymptotic_form(params.kappa, binf, t)) for t, b in zip(taus, traj.betas[sel])]
    )
    return DeviationReport(taus, dev * np.log(taus) ** 1.5, binf)
