"""Pseudospectral solver for (d_t^2 - d_x^2 + 1) u = F(u, u_t, u_x) on a periodic box.

The box [-L, L) stands in for the real line: with data supported in |x| <= B
the exact solution stays inside |x| <= t + B, so as long as L >= T + B + margin
the periodic wrap never matters.  The state carries v = u_t explicitly because
F may depend on it, and u_x is always taken spectrally.

The linear flow is propagated exactly per Fourier mode (frequency
<xi> = sqrt(1 + xi^2)); the nonlinearity is a pointwise ODE for v with u frozen.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np

from kgdecay.analysis import lp_norm
from kgdecay.errors import InstabilityError
from kgdecay.nonlinearity import CubicNonlinearity, eval_F

NORM_TARGETS = ("u", "ut", "ux")
SCHEMES = ("strang_split", "rk4_mol")
SHAPES = ("bump", "bump_pair")
BLOWUP_FACTOR = 1e6


@dataclass(frozen=True)
class Grid1D:
    half_length: float
    n_points: int

    def __post_init__(self):
        n = self.n_points
        if n < 2 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two, got {n}")
        if not self.half_length > 0:
            raise ValueError("half_length must be positive")

    @property
    def dx(self) -> float:
        return 2 * self.half_length / self.n_points

    @cached_property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.n_points)

    @cached_property
    def xi(self) -> np.ndarray:
        return 2 * np.pi * np.fft.rfftfreq(self.n_points, self.dx)

    @cached_property
    def omega(self) -> np.ndarray:
        return np.sqrt(1 + self.xi**2)

    @cached_property
    def dealias(self) -> np.ndarray:
        """2/3-rule mask on the half spectrum."""
        return (self.xi <= (2 / 3) * self.xi[-1]).astype(float)

    def d_dx(self, f: np.ndarray) -> np.ndarray:
        return np.fft.irfft(1j * self.xi * np.fft.rfft(f), self.n_points)

    def d2_dx2(self, f: np.ndarray) -> np.ndarray:
        return np.fft.irfft(-(self.xi**2) * np.fft.rfft(f), self.n_points)


@dataclass(frozen=True)
class FieldState:
    t: float
    u: np.ndarray
    v: np.ndarray
    grid: Grid1D = field(repr=False)

    def __post_init__(self):
        n = self.grid.n_points
        if self.u.shape != (n,) or self.v.shape != (n,):
            raise ValueError("u and v must have one value per grid node")

    def linear_energy(self) -> float:
        """1/2 int (v^2 + u_x^2 + u^2) dx via Parseval.

        Summing in Fourier space keeps the Nyquist mode, whose derivative
        vanishes at the nodes but which the propagator still rotates.
        """
        g = self.grid
        uh, vh = np.fft.rfft(self.u), np.fft.rfft(self.v)
        dens = np.abs(vh) ** 2 + g.omega**2 * np.abs(uh) ** 2
        w = np.full(dens.shape, 2.0)
        w[0] = 1.0
        if g.n_points % 2 == 0:
            w[-1] = 1.0
        return 0.5 * g.dx / g.n_points * float(np.sum(w * dens))


@dataclass(frozen=True)
class SolverConfig:
    eps: float
    B: float
    dt: float
    T: float
    scheme: str = "strang_split"
    record_times: tuple[float, ...] = ()
    norm_every: float = 1.0
    p_values: tuple[float, ...] = (2.0, 4.0, math.inf)
    shape: str = "bump"
    margin: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "record_times", tuple(sorted(float(t) for t in self.record_times)))
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))

    def validate(self, grid: Grid1D) -> None:
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if not self.B > 1:
            raise ValueError("B must exceed 1")
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("dt and T must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.shape not in SHAPES:
            raise ValueError(f"shape must be one of {SHAPES}")
        if grid.half_length < self.T + self.B + self.margin:
            raise ValueError(
                f"half_length L={grid.half_length} < T + B + {self.margin:g} = "
                f"{self.T + self.B + self.margin:g}: finite propagation speed puts the "
                "support within |x| <= t + B, and it must stay off the periodic boundary"
            )
        if self.scheme == "rk4_mol" and self.dt > grid.dx / math.pi:
            raise ValueError(f"rk4_mol needs dt <= dx/pi = {grid.dx / math.pi:.4g}")
        if any(t < 0 or t > self.T for t in self.record_times):
            raise ValueError("record_times must lie in [0, T]")
        if any(p < 2 for p in self.p_values):
            raise ValueError("norm exponents must be >= 2")
        if self.norm_every < self.dt:
            raise ValueError("norm_every must be at least dt")


@dataclass(frozen=True)
class Snapshot:
    t: float
    u: np.ndarray
    v: np.ndarray
    ux: np.ndarray


@dataclass
class RunRecord:
    config: SolverConfig
    grid: Grid1D
    gamma: tuple[float, ...]
    snapshots: list[Snapshot]
    norm_times: np.ndarray
    norms: dict[tuple[str, float], np.ndarray]

    def norm_series(self, target: str, p: float) -> np.ndarray:
        """Series for ``u``, ``ut``, ``ux``, ``du`` (= ut + ux) or ``all`` (= u + ut + ux)."""
        p = float(p)
        if target == "du":
            return self.norms[("ut", p)] + self.norms[("ux", p)]
        if target == "all":
            return self.norms[("u", p)] + self.norms[("ut", p)] + self.norms[("ux", p)]
        return self.norms[(target, p)]


def bump_data(grid: Grid1D, B: float, eps: float, shape: str = "bump") -> FieldState:
    """eps * exp(1 - 1/(1 - (x/B)^2)) on |x| < B; g is zero or the same bump."""
    if not B < grid.half_length:
        raise ValueError("support radius must be smaller than the box")
    if shape not in SHAPES:
        raise ValueError(f"shape must be one of {SHAPES}")
    s = grid.x / B
    inside = np.abs(s) < 1
    f = np.zeros(grid.n_points)
    f[inside] = eps * np.exp(1 - 1 / (1 - s[inside] ** 2))
    g = f.copy() if shape == "bump_pair" else np.zeros_like(f)
    return FieldState(0.0, f, g, grid)


@lru_cache(maxsize=32)
def _propagator(grid: Grid1D, dt: float):
    w = grid.omega
    c, s = np.cos(dt * w), np.sin(dt * w)
    return c, s / w, -w * s


def _linear_hat(grid: Grid1D, dt: float, uh: np.ndarray, vh: np.ndarray):
    c, s_over_w, minus_ws = _propagator(grid, dt)
    return c * uh + s_over_w * vh, minus_ws * uh + c * vh


def linear_step(state: FieldState, dt: float) -> FieldState:
    """Exact flow of u_tt = u_xx - u over time dt for the semidiscrete system."""
    g = state.grid
    n = g.n_points
    uh, vh = _linear_hat(g, dt, np.fft.rfft(state.u), np.fft.rfft(state.v))
    return FieldState(state.t + dt, np.fft.irfft(uh, n), np.fft.irfft(vh, n), g)


def _rk4_v(nl: CubicNonlinearity, u: np.ndarray, v: np.ndarray, ux: np.ndarray, dt: float):
    k1 = eval_F(nl, u, v, ux)
    k2 = eval_F(nl, u, v + 0.5 * dt * k1, ux)
    k3 = eval_F(nl, u, v + 0.5 * dt * k2, ux)
    k4 = eval_F(nl, u, v + dt * k3, ux)
    return v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def nonlinear_step(state: FieldState, nl: CubicNonlinearity, dt: float) -> FieldState:
    """Advance v' = F(u, v, u_x) with u frozen by one RK4 step; de-alias the increment.

    Time is not advanced: this is the inner substep of the splitting.
    """
    if nl.is_zero() or dt == 0:
        return state
    g = state.grid
    ux = g.d_dx(state.u)
    dv = _rk4_v(nl, state.u, state.v, ux, dt) - state.v
    dv = np.fft.irfft(g.dealias * np.fft.rfft(dv), g.n_points)
    return FieldState(state.t, state.u, state.v + dv, g)


def step_strang(state: FieldState, nl: CubicNonlinearity, dt: float) -> FieldState:
    half = linear_step(state, dt / 2)
    half = nonlinear_step(half, nl, dt)
    return linear_step(half, dt / 2)


def _mol_rhs(grid: Grid1D, nl: CubicNonlinearity, u: np.ndarray, v: np.ndarray):
    n = grid.n_points
    uh = np.fft.rfft(u)
    uxx = np.fft.irfft(-(grid.xi**2) * uh, n)
    if nl.is_zero():
        return v, uxx - u
    ux = np.fft.irfft(1j * grid.xi * uh, n)
    f = np.fft.irfft(grid.dealias * np.fft.rfft(eval_F(nl, u, v, ux)), n)
    return v, uxx - u + f


def step_rk4_mol(state: FieldState, nl: CubicNonlinearity, dt: float) -> FieldState:
    """Classical RK4 on u_t = v, v_t = u_xx - u + F (F de-aliased)."""
    g = state.grid
    u, v = state.u, state.v
    a1, b1 = _mol_rhs(g, nl, u, v)
    a2, b2 = _mol_rhs(g, nl, u + 0.5 * dt * a1, v + 0.5 * dt * b1)
    a3, b3 = _mol_rhs(g, nl, u + 0.5 * dt * a2, v + 0.5 * dt * b2)
    a4, b4 = _mol_rhs(g, nl, u + dt * a3, v + dt * b3)
    u_new = u + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
    v_new = v + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
    return FieldState(state.t + dt, u_new, v_new, g)


class _Recorder:
    def __init__(self, config: SolverConfig, grid: Grid1D, n_steps: int):
        self.config = config
        self.grid = grid
        dt = config.dt
        self.norm_stride = max(1, round(config.norm_every / dt))
        self.snap_steps = sorted({min(n_steps, round(t / dt)) for t in config.record_times})
        self.snapshots: list[Snapshot] = []
        self.times: list[float] = []
        self.series: dict[tuple[str, float], list[float]] = {
            (tgt, p): [] for tgt in NORM_TARGETS for p in config.p_values
        }
        self.limit = BLOWUP_FACTOR * config.eps

    def wants(self, k: int) -> bool:
        return k % self.norm_stride == 0 or k in self._snap_set

    @cached_property
    def _snap_set(self):
        return set(self.snap_steps)

    def record(self, k: int, u: np.ndarray, v: np.ndarray, ux: np.ndarray) -> None:
        t = k * self.config.dt
        if k % self.norm_stride == 0:
            self.times.append(t)
            dx = self.grid.dx
            for tgt, arr in (("u", u), ("ut", v), ("ux", ux)):
                for p in self.config.p_values:
                    val = lp_norm(arr, dx, p)
                    if not math.isfinite(val) or val > self.limit:
                        raise InstabilityError(
                            f"||{tgt}||_{p:g} = {val:.3g} exceeds {BLOWUP_FACTOR:g} * eps", t
                        )
                    self.series[(tgt, p)].append(val)
        if k in self._snap_set:
            self.snapshots.append(Snapshot(t, u.copy(), v.copy(), ux.copy()))


def run_simulation(config: SolverConfig, nl: CubicNonlinearity, grid: Grid1D) -> RunRecord:
    config.validate(grid)
    n_steps = round(config.T / config.dt)
    rec = _Recorder(config, grid, n_steps)
    state = bump_data(grid, config.B, config.eps, config.shape)
    # overflow on the way to a blow-up is reported by the recorder instead
    with np.errstate(over="ignore", invalid="ignore"):
        return _advance(config, nl, grid, rec, state, n_steps)


def _advance(config, nl, grid, rec, state, n_steps) -> RunRecord:
    dt = config.dt
    n = grid.n_points

    if config.scheme == "strang_split":
        ik = 1j * grid.xi
        mask = grid.dealias
        zero_nl = nl.is_zero()
        uh, vh = np.fft.rfft(state.u), np.fft.rfft(state.v)
        rec.record(0, state.u, state.v, np.fft.irfft(ik * uh, n))
        for k in range(1, n_steps + 1):
            uh, vh = _linear_hat(grid, dt / 2, uh, vh)
            if not zero_nl:
                u = np.fft.irfft(uh, n)
                v = np.fft.irfft(vh, n)
                ux = np.fft.irfft(ik * uh, n)
                vh = vh + mask * np.fft.rfft(_rk4_v(nl, u, v, ux, dt) - v)
            uh, vh = _linear_hat(grid, dt / 2, uh, vh)
            if rec.wants(k):
                rec.record(
                    k, np.fft.irfft(uh, n), np.fft.irfft(vh, n), np.fft.irfft(ik * uh, n)
                )
    else:
        rec.record(0, state.u, state.v, grid.d_dx(state.u))
        for k in range(1, n_steps + 1):
            state = step_rk4_mol(state, nl, dt)
            if rec.wants(k):
                rec.record(k, state.u, state.v, grid.d_dx(state.u))

    return RunRecord(
        config=config,
        grid=grid,
        gamma=nl.gamma,
        snapshots=rec.snapshots,
        norm_times=np.array(rec.times),
        norms={key: np.array(vals) for key, vals in rec.series.items()},
    )


def _fmt(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def save_run(record: RunRecord, directory) -> Path:
    """Write ``run.json``, ``norms.csv`` (t, target, p, norm) and ``snapshots.npz``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    cfg = asdict(record.config)
    cfg["p_values"] = [_fmt(p) for p in record.config.p_values]
    meta = {
        "schema_version": 1,
        "config": cfg,
        "grid": {"half_length": record.grid.half_length, "n_points": record.grid.n_points},
        "gamma": list(record.gamma),
    }
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    with open(out / "norms.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "target", "p", "norm"])
        for (tgt, p), series in sorted(record.norms.items()):
            for t, val in zip(record.norm_times, series):
                w.writerow([_fmt(t), tgt, _fmt(p), _fmt(val)])
    snaps = record.snapshots
    shape = (len(snaps), record.grid.n_points)
    np.savez(
        out / "snapshots.npz",
        t=np.array([s.t for s in snaps], dtype=float),
        x=record.grid.x,
        u=np.array([s.u for s in snaps], dtype=float).reshape(shape),
        v=np.array([s.v for s in snaps], dtype=float).reshape(shape),
        ux=np.array([s.ux for s in snaps], dtype=float).reshape(shape),
    )
    return out


def load_run(directory) -> RunRecord:
    src = Path(directory)
    meta = json.loads((src / "run.json").read_text())
    cfg = dict(meta["config"])
    cfg["p_values"] = tuple(float(p) for p in cfg["p_values"])
    cfg["record_times"] = tuple(cfg["record_times"])
    config = SolverConfig(**cfg)
    grid = Grid1D(**meta["grid"])
    series: dict[tuple[str, float], list[float]] = {}
    times: dict[tuple[str, float], list[float]] = {}
    with open(src / "norms.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["target"], float(row["p"]))
            series.setdefault(key, []).append(float(row["norm"]))
            times.setdefault(key, []).append(float(row["t"]))
    norm_times = np.array(next(iter(times.values()))) if times else np.array([])
    with np.load(src / "snapshots.npz") as z:
        snaps = [
            Snapshot(float(t), z["u"][i], z["v"][i], z["ux"][i]) for i, t in enumerate(z["t"])
        ]
    return RunRecord(
        config=config,
        grid=grid,
        gamma=tuple(meta["gamma"]),
        snapshots=snaps,
        norm_times=norm_times,
        norms={k: np.array(v) for k, v in series.items()},
    )


def write_snapshot_csv(record: RunRecord, index: int, path) -> None:
    """One snapshot as CSV with header t, x, u, v, ux."""
    snap = record.snapshots[index]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "u", "v", "ux"])
        for row in zip(record.grid.x, snap.u, snap.v, snap.ux):
            w.writerow([_fmt(snap.t)] + [_fmt(c) for c in row])
