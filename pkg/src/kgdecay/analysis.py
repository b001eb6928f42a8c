"""Post-processing: hyperbolic coordinates, alpha profiles, L^p norms and decay fits."""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np
from scipy import integrate

from kgdecay.classifier import DecayLaw
from kgdecay.errors import DomainError, InsufficientWindowError

if TYPE_CHECKING:
    from kgdecay.kg_solver import RunRecord

MIN_FIT_TIME = 20.0
MIN_MODULATION_SAMPLES = 20
# the tau window [100, 900] used for the modulation check spans 0.95 decades
MIN_MODULATION_RATIO = 9.0
Q_MARGIN = 0.15
RESIDUAL_MAX = 0.05
MIN_LOGLOG_SPAN = 1.0


@dataclass(frozen=True)
class HyperbolicPoint:
    tau: float
    z: float

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError("tau must be positive")


def to_hyperbolic(t: float, x: float, B: float) -> HyperbolicPoint:
    s = t + 2 * B
    if not abs(x) < s:
        raise DomainError(f"(t, x) = ({t}, {x}) lies outside the cone |x| < t + 2B")
    return HyperbolicPoint(math.sqrt((s - x) * (s + x)), math.atanh(x / s))


def from_hyperbolic(pt: HyperbolicPoint, B: float) -> tuple[float, float]:
    return pt.tau * math.cosh(pt.z) - 2 * B, pt.tau * math.sinh(pt.z)


def lp_norm(values, dx: float, p: float) -> float:
    """Riemann-sum L^p norm of samples on a uniform grid (max |u| when p is infinite)."""
    if p < 2:
        raise ValueError("p must be >= 2")
    a = np.abs(np.asarray(values, dtype=float))
    if a.size == 0:
        return 0.0
    m = float(a.max())
    if math.isinf(p) or m == 0 or not math.isfinite(m):
        return m
    # factor out the max so large p cannot overflow
    return m * float(np.sum((a / m) ** p) * dx) ** (1.0 / p)


@dataclass(frozen=True)
class AlphaSample:
    tau: float
    z: float
    alpha: complex


def _cubic_at(values: np.ndarray, x0: float, dx: float, x: float) -> float:
    """4-point Lagrange interpolation of nodal values at x_k = x0 + k dx."""
    s = (x - x0) / dx
    k = int(math.floor(s))
    if k < 1 or k + 2 >= len(values):
        raise DomainError(f"x = {x} too close to the grid edge for cubic interpolation")
    f = s - k
    w = (
        -f * (f - 1) * (f - 2) / 6,
        (f + 1) * (f - 1) * (f - 2) / 2,
        -(f + 1) * f * (f - 2) / 2,
        (f + 1) * f * (f - 1) / 6,
    )
    return float(sum(wi * values[k - 1 + i] for i, wi in enumerate(w)))


def _alpha_from_snapshot(snap, grid, tau: float, z: float) -> complex:
    x = tau * math.sinh(z)
    x0, dx = -grid.half_length, grid.dx
    u = _cubic_at(snap.u, x0, dx, x)
    ut = _cubic_at(snap.v, x0, dx, x)
    ux = _cubic_at(snap.ux, x0, dx, x)
    rt = math.sqrt(tau)
    v = rt * u
    dv = rt * (math.cosh(z) * ut + math.sinh(z) * ux) + u / (2 * rt)
    return cmath.exp(-1j * tau) * complex(v, -dv)


def extract_alpha(
    run: "RunRecord",
    z_grid: Sequence[float],
    tau_list: Sequence[float],
    B: Optional[float] = None,
    max_gap: float = 1.0,
) -> list[AlphaSample]:
    """alpha(tau, z) = e^{-i tau}(v - i d_tau v) with v = tau^{1/2} u, ordered z-major.

    Between two bracketing snapshots alpha is evaluated on the same ray at each
    snapshot time and interpolated linearly in tau; alpha varies slowly there
    while u itself oscillates with period 2 pi.
    """
    B = run.config.B if B is None else B
    times = np.array([s.t for s in run.snapshots])
    if times.size == 0:
        raise InsufficientWindowError("run has no snapshots")
    grid = run.grid
    out = []
    for z in z_grid:
        cz = math.cosh(z)
        for tau in tau_list:
            t_star = tau * cz - 2 * B
            if t_star < 0 or abs(tau * math.sinh(z)) >= grid.half_length:
                raise DomainError(f"(tau, z) = ({tau}, {z}) is outside the computed region")
            j = int(np.searchsorted(times, t_star))
            tol = 1e-9 * max(1.0, t_star)
            if j < len(times) and abs(times[j] - t_star) <= tol:
                alpha = _alpha_from_snapshot(run.snapshots[j], grid, tau, z)
            elif j > 0 and abs(times[j - 1] - t_star) <= tol:
                alpha = _alpha_from_snapshot(run.snapshots[j - 1], grid, tau, z)
            else:
                if j == 0 or j == len(times) or times[j] - times[j - 1] > max_gap:
                    raise InsufficientWindowError(
                        f"no snapshot pair within {max_gap} brackets t = {t_star:.6g}"
                    )
                ta, tb = times[j - 1], times[j]
                tau_a, tau_b = (ta + 2 * B) / cz, (tb + 2 * B) / cz
                aa = _alpha_from_snapshot(run.snapshots[j - 1], grid, tau_a, z)
                ab = _alpha_from_snapshot(run.snapshots[j], grid, tau_b, z)
                alpha = aa + (ab - aa) * (tau - tau_a) / (tau_b - tau_a)
            out.append(AlphaSample(float(tau), float(z), complex(alpha)))
    return out


def write_alpha_csv(samples: Sequence[AlphaSample], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "z", "re_alpha", "im_alpha"])
        for s in samples:
            w.writerow([repr(s.tau), repr(s.z), repr(s.alpha.real), repr(s.alpha.imag)])


@dataclass(frozen=True)
class ModulationFit:
    slope: float
    intercept: float
    r2: float

    @property
    def re_kappa(self) -> float:
        return self.slope / 2


def fit_modulation(samples: Sequence[AlphaSample]) -> ModulationFit:
    """Least-squares line through (log tau, 1/|alpha|^2); for the profile law slope = 2 Re kappa."""
    if len(samples) < MIN_MODULATION_SAMPLES:
        raise InsufficientWindowError(f"need at least {MIN_MODULATION_SAMPLES} samples")
    if len({s.z for s in samples}) != 1:
        raise ValueError("samples must share one z")
    tau = np.array([s.tau for s in samples])
    if tau.max() / tau.min() < MIN_MODULATION_RATIO * (1 - 1e-12):
        raise InsufficientWindowError(f"tau range must span a factor {MIN_MODULATION_RATIO:g}")
    amp = np.abs([s.alpha for s in samples])
    if amp.min() < 1e-12:
        raise DomainError("|alpha| below 1e-12; 1/|alpha|^2 regression is degenerate")
    x = np.log(tau)
    y = 1 / amp**2
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    # a flat series (kappa = 0) leaves only rounding in ss_tot
    flat = ss_tot <= 1e-24 * len(y) * float(y.mean()) ** 2
    r2 = 1.0 if flat else 1.0 - float(np.sum(resid**2)) / ss_tot
    return ModulationFit(float(slope), float(intercept), r2)


def I_p_m(t: float, m: int, p: float) -> float:
    """int_0^2 (1 + eta^m log(t + 2))^{-p/2} d eta."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if m not in (1, 2, 3):
        raise ValueError("m must be 1, 2 or 3")
    if not (m * p > 2 or (m == 1 and p == 2)):
        raise ValueError("need m*p > 2 or (m, p) = (1, 2)")
    if math.isinf(p):
        return 0.0
    lg = math.log(t + 2)
    # the integrand drops off on the scale eta ~ lg^{-1/m}
    knee = min(2.0, lg ** (-1.0 / m))
    f = lambda eta: (1 + eta**m * lg) ** (-p / 2)
    a, _ = integrate.quad(f, 0.0, knee, epsabs=0.0, epsrel=1e-12, limit=200)
    b, _ = integrate.quad(f, knee, 2.0, epsabs=0.0, epsrel=1e-12, limit=200) if knee < 2 else (0.0, 0)
    return a + b


@dataclass(frozen=True)
class DecayFit:
    p: float
    target: str
    a_fixed: float
    q_fit: float
    r_fit: Optional[float]
    residual: float
    window: tuple[float, float]

    @property
    def loglog_span(self) -> float:
        lo, hi = self.window
        return math.log(math.log(2 + hi)) - math.log(math.log(2 + lo))

    def as_dict(self) -> dict:
        return {
            "p": "inf" if math.isinf(self.p) else self.p,
            "target": self.target,
            "a_fixed": self.a_fixed,
            "q_fit": self.q_fit,
            "r_fit": self.r_fit,
            "residual": self.residual,
            "window": list(self.window),
        }


def fit_decay(
    times,
    norms,
    p: float,
    target: str = "u",
    window: Optional[tuple[float, float]] = None,
    loglog: bool = False,
) -> DecayFit:
    """Fit log y = c - q log log(2+t) [+ r log log(1 + log(2+t))], y = norm (1+t)^{1/2-1/p}."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if t.shape != y.shape:
        raise ValueError("times and norms must have equal length")
    lo, hi = window if window is not None else (MIN_FIT_TIME, float(t.max()))
    if lo < MIN_FIT_TIME:
        raise InsufficientWindowError(f"window starts at {lo} < {MIN_FIT_TIME}")
    sel = (t >= lo) & (t <= hi)
    t, y = t[sel], y[sel]
    if t.size < (4 if loglog else 3):
        raise InsufficientWindowError("too few samples in the fit window")
    # samples need only cover the window to within one sampling gap
    gap = float(np.max(np.diff(t))) if t.size > 1 else 0.0
    span_lo, span_hi = max(lo, t.min() - gap), min(hi, t.max() + gap)
    if span_hi < 10 * span_lo * (1 - 1e-12):
        raise InsufficientWindowError(
            f"window [{t.min():.4g}, {t.max():.4g}] spans less than one decade"
        )
    if np.any(y <= 0):
        raise DomainError("norms must be positive to take logarithms")
    a = 0.5 - (0.0 if math.isinf(p) else 1.0 / p)
    ly = np.log(y) + a * np.log1p(t)
    l2 = np.log(2 + t)
    cols = [np.ones_like(t), np.log(l2)]
    if loglog:
        cols.append(np.log(np.log1p(l2)))
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, ly, rcond=None)
    resid = ly - X @ coef
    return DecayFit(
        p=float(p),
        target=target,
        a_fixed=a,
        q_fit=float(-coef[1]),
        r_fit=float(coef[2]) if loglog else None,
        residual=float(np.sqrt(np.mean(resid**2))),
        window=(float(t.min()), float(t.max())),
    )


@dataclass(frozen=True)
class Verdict:
    verdict: str
    q_predicted: float
    margin: float
    diagnosis: str

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "q_predicted": self.q_predicted,
            "margin": self.margin,
            "diagnosis": self.diagnosis,
        }


def compare_with_theorem(fit: DecayFit, law: DecayLaw) -> Verdict:
    """Predicted rates are upper bounds, so only a fit well below the prediction counts against it."""
    q_pred = law.exponents(fit.target, fit.p).q
    margin = fit.q_fit - q_pred
    if margin >= -Q_MARGIN and fit.residual <= RESIDUAL_MAX:
        return Verdict("consistent", q_pred, margin, "")
    span = fit.loglog_span
    problems = []
    if margin < -Q_MARGIN:
        problems.append(f"q_fit {fit.q_fit:.3f} below predicted {q_pred:.3f} by {-margin:.3f}")
    if fit.residual > RESIDUAL_MAX:
        problems.append(f"residual {fit.residual:.3g} above {RESIDUAL_MAX}")
    if span < MIN_LOGLOG_SPAN:
        problems.append(
            f"log log(2+t) spans only {span:.3f} over [{fit.window[0]:g}, {fit.window[1]:g}] "
            f"(< {MIN_LOGLOG_SPAN}); logarithmic exponents are not resolvable here"
        )
        return Verdict("inconclusive", q_pred, margin, "; ".join(problems))
    return Verdict("inconsistent", q_pred, margin, "; ".join(problems))


def bracketing_record_times(
    z_grid: Sequence[float], tau_list: Sequence[float], B: float, dt: float
) -> tuple[float, ...]:
    """Solver step times on either side of every t = tau cosh z - 2B."""
    out = set()
    for z in z_grid:
        for tau in tau_list:
            t = tau * math.cosh(z) - 2 * B
            k = math.floor(t / dt + 1e-9)
            if abs(t - k * dt) <= 1e-9 * max(1.0, t):
                out.add(k * dt)
            else:
                out.update((k * dt, (k + 1) * dt))
    return tuple(sorted(t for t in out if t >= 0))
