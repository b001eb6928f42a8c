"""Dissipation classes of cubic nonlinearities.

Everything here works on the real cubic P_F(y), y = tanh z in [-1, 1].  The
class is read off from where P_F vanishes on the closed interval:

    P_F == 0                      -> A0  (no dissipation)
    P_F > 0 on [-1, 1]            -> B0
    zeros only at y = +-1         -> B_m, m = largest endpoint multiplicity
    double zero at interior y0    -> C
    P_F < 0 somewhere             -> NotDissipative

Floating coefficients need explicit thresholds.  ``tol`` is relative to the
largest coefficient magnitude; a perturbation of that size moves an m-fold
root by about tol**(1/m), which sets the multiplicity tests below.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from kgdecay.errors import (
    AmbiguousClassError,
    DomainError,
    IdenticallyZeroError,
    NotApplicableError,
)

DEFAULT_TOL = 1e-9
STRADDLE = 1e-2
TAGS = ("A0", "B0", "B1", "B2", "B3", "C", "NotDissipative")


@dataclass(frozen=True)
class CubicPoly:
    p0: float
    p1: float
    p2: float
    p3: float

    def __post_init__(self):
        for c in self.coeffs:
            if not math.isfinite(c):
                raise ValueError("coefficients must be finite")

    @property
    def coeffs(self) -> tuple[float, float, float, float]:
        return (self.p0, self.p1, self.p2, self.p3)

    def __call__(self, y):
        return self.p0 + y * (self.p1 + y * (self.p2 + y * self.p3))

    def deriv(self, y, k: int = 1):
        if k == 0:
            return self(y)
        if k == 1:
            return self.p1 + y * (2 * self.p2 + 3 * self.p3 * y)
        if k == 2:
            return 2 * self.p2 + 6 * self.p3 * y
        if k == 3:
            return 6 * self.p3 + 0 * y
        return 0 * y

    def scale(self) -> float:
        return max(abs(c) for c in self.coeffs)

    def __mul__(self, lam: float) -> "CubicPoly":
        return CubicPoly(*(lam * c for c in self.coeffs))

    __rmul__ = __mul__


@dataclass(frozen=True)
class DissipationClass:
    tag: str
    constants: dict = field(default_factory=dict)
    y0: float | None = None
    z0: float | None = None
    min_point: float | None = None
    min_value: float | None = None

    def condition_constant(self) -> float | None:
        """The sharp constant of the reported B_j condition, if any."""
        if self.tag in ("B0", "B1", "B2", "B3"):
            return self.constants.get(int(self.tag[1]))
        return None


class Exponents(NamedTuple):
    a: float
    q: float
    r: float


@dataclass(frozen=True)
class DecayLaw:
    """Predicted rate  t^{-a} (log t)^{-q} (log log t)^{r}  of ||u|| or ||du|| in L^p."""

    tag: str

    def exponents(self, target: str, p: float) -> Exponents:
        if target not in ("u", "du"):
            raise ValueError(f"target must be 'u' or 'du', got {target!r}")
        if p < 2:
            raise ValueError("p must be >= 2")
        inv = 0.0 if math.isinf(p) else 1.0 / p
        a = 0.5 - inv
        q, r = _LOG_EXPONENTS[self.tag](target, p, inv)
        return Exponents(a, q, r)

    def enhanced(self, target: str, p: float) -> bool:
        return self.exponents(target, p).q > 0


def _law_a0(target, p, inv):
    return 0.0, 0.0


def _law_b0(target, p, inv):
    return 0.5, 0.0


def _law_b1(target, p, inv):
    if target == "u":
        return 0.5, 0.0
    return (0.5, 0.5) if p == 2 else (inv, 0.0)


def _law_b2(target, p, inv):
    if target == "u":
        return (0.5, 0.5) if p == 2 else (inv, 0.0)
    return inv / 2, 0.0


def _law_b3(target, p, inv):
    return (inv / 2, 0.0) if target == "u" else (inv / 3, 0.0)


def _law_c(target, p, inv):
    return inv / 2, 0.0


_LOG_EXPONENTS = {
    "A0": _law_a0,
    "B0": _law_b0,
    "B1": _law_b1,
    "B2": _law_b2,
    "B3": _law_b3,
    "C": _law_c,
}


def min_on_interval(poly: CubicPoly, a: float, b: float) -> tuple[float, float]:
    """Exact minimum of a cubic on [a, b] from endpoints and critical points."""
    if not a < b:
        raise ValueError("need a < b")
    cands = [a, b]
    # p'(y) = p1 + 2 p2 y + 3 p3 y^2
    A, B, C = 3 * poly.p3, 2 * poly.p2, poly.p1
    if A != 0.0:
        disc = B * B - 4 * A * C
        if disc >= 0:
            sq = math.sqrt(disc)
            qq = -0.5 * (B + math.copysign(sq, B))
            if qq != 0.0:
                cands += [qq / A, C / qq]
            else:
                cands.append(0.0)
    elif B != 0.0:
        cands.append(-C / B)
    best_y, best_v = a, poly(a)
    for y in cands:
        if a < y < b or y in (a, b):
            v = poly(y)
            if v < best_v:
                best_y, best_v = y, v
    return best_y, best_v


def _cubic_roots(coeffs, tiny: float) -> list[complex]:
    """All complex roots of a polynomial of degree <= 3 in closed form."""
    c = list(coeffs)
    while c and abs(c[-1]) <= tiny:
        c.pop()
    deg = len(c) - 1
    if deg <= 0:
        return []
    if deg == 1:
        return [complex(-c[0] / c[1])]
    if deg == 2:
        a0, a1, a2 = c
        sq = cmath.sqrt(a1 * a1 - 4 * a2 * a0)
        if (a1 * sq.conjugate()).real < 0:
            sq = -sq
        qq = -0.5 * (a1 + sq)
        if qq == 0:
            return [0j, 0j]
        return [qq / a2, a0 / qq]
    a0, a1, a2, a3 = c
    b, cc, d = a2 / a3, a1 / a3, a0 / a3
    # depressed cubic t^3 + P t + Q with y = t - b/3
    P = cc - b * b / 3
    Q = 2 * b**3 / 27 - b * cc / 3 + d
    disc = cmath.sqrt((Q / 2) ** 2 + (P / 3) ** 3)
    w = -Q / 2 + disc
    if abs(w) < abs(-Q / 2 - disc):
        w = -Q / 2 - disc
    if w == 0:
        ts = [0j, 0j, 0j]
    else:
        uu = w ** (1 / 3)
        omega = cmath.exp(2j * math.pi / 3)
        ts = []
        for k in range(3):
            uk = uu * omega**k
            ts.append(uk - P / (3 * uk))
    roots = []
    for t in ts:
        y = t - b / 3
        # two Newton steps against cancellation in the closed form
        for _ in range(2):
            pv = a0 + y * (a1 + y * (a2 + y * a3))
            dv = a1 + y * (2 * a2 + 3 * a3 * y)
            if dv == 0:
                break
            y_new = y - pv / dv
            if abs(a0 + y_new * (a1 + y_new * (a2 + y_new * a3))) >= abs(pv):
                break
            y = y_new
        roots.append(complex(y))
    return roots


def _bisect(fn, lo: float, hi: float) -> float | None:
    flo, fhi = fn(lo), fn(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = fn(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _multiplicity(poly: CubicPoly, r: float, scale: float, tol: float) -> int:
    if abs(poly.deriv(r, 1)) > math.sqrt(tol) * scale:
        return 1
    if abs(poly.deriv(r, 2)) > tol ** (1 / 3) * scale:
        return 2
    return 3


def _polish(poly: CubicPoly, center: float, k: int, radius: float) -> float | None:
    if k >= 3:
        if poly.p3 == 0:
            return None
        return -poly.p2 / (3 * poly.p3)
    fn = (lambda y: poly.deriv(y, 1)) if k == 2 else poly
    r = _bisect(fn, center - radius, center + radius)
    if r is None:
        # touching root: the sign does not change, polish on the derivative
        r = _bisect(lambda y: poly.deriv(y, k), center - radius, center + radius)
    return r


def roots_in_interval(poly: CubicPoly, tol: float = DEFAULT_TOL) -> list[tuple[float, int]]:
    """Real roots in [-1, 1] with multiplicities, ascending."""
    scale = poly.scale()
    if scale <= tol:
        raise IdenticallyZeroError("polynomial is zero within tolerance")
    rho = tol ** (1 / 3)
    raw = _cubic_roots(poly.coeffs, 1e-15 * scale)
    cands = sorted(
        r.real for r in raw if abs(r.imag) <= rho and -1 - rho <= r.real <= 1 + rho
    )
    clusters: list[list[float]] = []
    for r in cands:
        if clusters and r - clusters[-1][-1] <= rho:
            clusters[-1].append(r)
        else:
            clusters.append([r])

    found: list[tuple[float, int]] = []
    for cl in clusters:
        k = len(cl)
        center = sum(cl) / k
        r = _polish(poly, center, k, 2 * rho)
        groups = [(r, k)]
        if r is None or abs(poly(r)) > tol * scale:
            # not a genuine multiple root: treat members as separate simple roots
            groups = []
            if k > 1:
                gaps = np.diff(cl)
                for i, x in enumerate(cl):
                    near = [g for g in (gaps[i - 1] if i else None, gaps[i] if i < k - 1 else None)
                            if g is not None]
                    radius = min([0.5 * rho] + [0.45 * g for g in near if g > 0])
                    groups.append((_polish(poly, x, 1, radius), 1))
        for r, k in groups:
            if r is None:
                continue
            for e in (-1.0, 1.0):
                if abs(r - e) <= tol ** (1 / k):
                    r = e
            if not -1.0 <= r <= 1.0 or abs(poly(r)) > tol * scale:
                continue
            found.append((r, _multiplicity(poly, r, scale, tol)))

    out: list[tuple[float, int]] = []
    for r, m in sorted(found):
        if out and abs(r - out[-1][0]) <= math.sqrt(tol) * 1e-3:
            if m > out[-1][1]:
                out[-1] = (r, m)
            continue
        out.append((r, m))
    return out


def _endpoint_multiplicity(poly: CubicPoly, e: float, scale: float, tol: float) -> int:
    if abs(poly(e)) > tol * scale:
        return 0
    return _multiplicity(poly, e, scale, tol)


def ratio_inf(poly: CubicPoly, j: int, tol: float = DEFAULT_TOL) -> float:
    """inf over (-1, 1) of poly(y) / (1 - y^2)^j for a poly nonnegative there.

    The endpoint zeros are divided out first, poly = (1-y)^mp (1+y)^mm R, so the
    ratio is (1-y)^(mp-j) (1+y)^(mm-j) R and its limits at +-1 are read off the
    exponents.  Interior critical points solve
    ((mm-j)(1-y) - (mp-j)(1+y)) R + (1-y^2) R' = 0.
    """
    if j not in (0, 1, 2, 3):
        raise ValueError("j must be 0, 1, 2 or 3")
    scale = poly.scale()
    if scale <= tol:
        raise NotApplicableError("zero polynomial")
    P = np.polynomial.Polynomial
    mp = _endpoint_multiplicity(poly, 1.0, scale, tol)
    mm = _endpoint_multiplicity(poly, -1.0, scale, tol)
    R = P(list(poly.coeffs)) // (P([1, -1]) ** mp * P([1, 1]) ** mm)
    a, b = mp - j, mm - j

    def ratio(y):
        return float((1 - y) ** a * (1 + y) ** b * R(y))

    values = [ratio(0.0)]
    for e, own, other in ((1.0, a, b), (-1.0, b, a)):
        if own > 0:
            values.append(0.0)
        elif own == 0:
            values.append(float(R(e)) * 2.0**other)
    crit = P([b - a, -(a + b)]) * R + P([1, 0, -1]) * R.deriv()
    coef = crit.coef.copy()
    while coef.size and abs(coef[-1]) <= 1e-14 * scale:
        coef = coef[:-1]
    if coef.size > 1:
        for r in np.roots(coef[::-1]):
            if abs(r.imag) <= 1e-7 and -1 < r.real < 1:
                values.append(ratio(r.real))
    for r, _ in roots_in_interval(poly, tol):
        if -1 < r < 1:
            values.append(0.0)
    inf = min(values)
    if inf <= tol * scale:
        raise NotApplicableError(f"infimum of p/(1-y^2)^{j} is zero")
    return inf


def classify(poly: CubicPoly, tol: float = DEFAULT_TOL) -> DissipationClass:
    if not 0 < tol <= 1e-3:
        raise ValueError("tol must lie in (0, 1e-3]")
    scale = poly.scale()
    if scale <= tol:
        return DissipationClass("A0")
    ymin, vmin = min_on_interval(poly, -1.0, 1.0)
    if vmin < -tol * scale:
        return DissipationClass("NotDissipative", min_point=ymin, min_value=vmin)

    constants = {}
    for j in range(4):
        try:
            constants[j] = ratio_inf(poly, j, tol) / 8
        except NotApplicableError:
            pass

    if vmin > tol * scale:
        return DissipationClass("B0", constants)

    roots = roots_in_interval(poly, tol)
    if not roots:
        raise AmbiguousClassError(
            f"minimum {vmin:.3g} at y={ymin:.6g} is within tolerance of zero "
            "but no root resolves there; tighten tol"
        )
    for r, m in roots:
        # a zero that holds only near the threshold would flip class under a small change of tol
        if abs(poly(r)) > STRADDLE * tol * scale:
            raise AmbiguousClassError(
                f"zero at y={r:.6g} holds only to |p|={abs(poly(r)):.3g}, "
                f"comparable to tol*scale={tol * scale:.3g}; tighten tol"
            )
    interior = [(r, m) for r, m in roots if -1 < r < 1]
    if interior:
        if len(interior) == 1 and interior[0][1] == 2:
            y0 = interior[0][0]
            return DissipationClass("C", {}, y0=y0, z0=math.atanh(y0))
        raise AmbiguousClassError(
            f"interior zero structure {interior} is not a single double root; tighten tol"
        )
    m = max(m for _, m in roots)
    return DissipationClass(f"B{m}", constants)


def predicted_decay(cls: DissipationClass) -> DecayLaw:
    if cls.tag == "NotDissipative":
        raise DomainError("no decay estimate applies to a non-dissipative nonlinearity")
    if cls.tag not in _LOG_EXPONENTS:
        raise ValueError(f"unknown class tag {cls.tag!r}")
    return DecayLaw(cls.tag)
