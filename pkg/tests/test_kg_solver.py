import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgdecay.errors import InstabilityError
from kgdecay.kg_solver import (
    FieldState,
    Grid1D,
    SolverConfig,
    bump_data,
    linear_step,
    load_run,
    nonlinear_step,
    run_simulation,
    save_run,
    step_rk4_mol,
    step_strang,
    write_snapshot_csv,
)
from kgdecay.nonlinearity import PRESETS, CubicNonlinearity

SMALL = Grid1D(64.0, 1024)


def test_grid_geometry():
    g = Grid1D(10.0, 64)
    assert g.dx * g.n_points == 20.0
    assert g.x[0] == -10.0 and g.x[-1] == pytest.approx(10.0 - g.dx)
    with pytest.raises(ValueError):
        Grid1D(10.0, 100)
    with pytest.raises(ValueError):
        Grid1D(0.0, 64)


def test_spectral_derivative_of_trig_polynomial():
    g = Grid1D(math.pi, 64)
    assert np.max(np.abs(g.d_dx(np.sin(3 * g.x)) - 3 * np.cos(3 * g.x))) < 1e-12
    assert np.max(np.abs(g.d2_dx2(np.cos(2 * g.x)) + 4 * np.cos(2 * g.x))) < 1e-12


def test_bump_data_examples():
    g = Grid1D(16.0, 4096)
    st0 = bump_data(g, 4.0, 0.3)
    assert st0.u[np.argmin(np.abs(g.x))] == 0.3
    assert np.all(st0.u[np.abs(g.x) >= 4.0] == 0)
    assert np.all(st0.v == 0)
    i = np.argmin(np.abs(g.x - 4.0 / math.sqrt(2)))
    s = g.x[i] / 4.0
    assert st0.u[i] == pytest.approx(0.3 * math.exp(1 - 1 / (1 - s * s)), rel=1e-14)
    assert 0.3 * math.exp(1 - 2) == pytest.approx(0.3 / math.e)
    pair = bump_data(g, 4.0, 0.3, "bump_pair")
    assert np.array_equal(pair.u, pair.v)
    with pytest.raises(ValueError):
        bump_data(g, 20.0, 0.3)


def test_linear_step_trivial_cases():
    st0 = bump_data(SMALL, 5.0, 0.1)
    same = linear_step(st0, 0.0)
    assert np.max(np.abs(same.u - st0.u)) < 1e-15 and np.max(np.abs(same.v - st0.v)) < 1e-15
    zero = FieldState(0.0, np.zeros(1024), np.zeros(1024), SMALL)
    out = linear_step(zero, 3.0)
    assert not out.u.any() and not out.v.any()


def test_linear_step_full_period_of_single_mode():
    g = Grid1D(math.pi, 64)
    k = 5
    w = math.sqrt(1 + k * k)
    st0 = FieldState(0.0, np.cos(k * g.x), 0.5 * np.sin(k * g.x), g)
    out = linear_step(st0, 2 * math.pi / w)
    assert np.max(np.abs(out.u - st0.u)) < 1e-12
    assert np.max(np.abs(out.v - st0.v)) < 1e-12


def test_linear_step_matches_mode_solution():
    g = Grid1D(math.pi, 32)
    k, t = 3, 0.77
    w = math.sqrt(1 + k * k)
    out = linear_step(FieldState(0.0, np.cos(k * g.x), np.zeros(32), g), t)
    assert np.max(np.abs(out.u - math.cos(w * t) * np.cos(k * g.x))) < 1e-13
    assert np.max(np.abs(out.v + w * math.sin(w * t) * np.cos(k * g.x))) < 1e-13


@settings(max_examples=25, deadline=None)
@given(st.floats(-50, 50), st.floats(2.0, 8.0))
def test_linear_flow_is_reversible_and_conservative(dt, B):
    st0 = bump_data(SMALL, B, 0.2, "bump_pair")
    fwd = linear_step(st0, dt)
    back = linear_step(fwd, -dt)
    assert np.max(np.abs(back.u - st0.u)) < 1e-13
    assert np.max(np.abs(back.v - st0.v)) < 1e-13
    e0 = st0.linear_energy()
    assert abs(fwd.linear_energy() - e0) <= 1e-12 * e0


def test_nonlinear_step_identity_cases():
    st0 = bump_data(SMALL, 5.0, 0.1, "bump_pair")
    assert nonlinear_step(st0, CubicNonlinearity.zero(), 0.1) is st0
    assert nonlinear_step(st0, PRESETS["ut3"], 0.0) is st0
    # nonzero F that vanishes on this state (u = 0 everywhere for u^3)
    z = FieldState(0.0, np.zeros(1024), st0.v, SMALL)
    assert np.array_equal(nonlinear_step(z, PRESETS["u3"], 0.1).v, st0.v)


@pytest.mark.parametrize("dt", [0.1, 0.05])
def test_nonlinear_step_cubic_damping_ode(dt):
    # with u = 0 the substep is v' = -v^3; compare with 1/sqrt(v0^-2 + 2 dt)
    g = Grid1D(math.pi, 16)
    v0 = 0.5
    st0 = FieldState(0.0, np.zeros(16), np.full(16, v0), g)
    out = nonlinear_step(st0, PRESETS["ut3"], dt)
    exact = 1 / math.sqrt(v0**-2 + 2 * dt)
    # local error of classical RK4 is C dt^5 with C of order v0^9 times a modest constant
    assert np.max(np.abs(out.v - exact)) < 0.05 * dt**5


def test_nonlinear_step_error_is_fifth_order():
    g = Grid1D(math.pi, 16)
    st0 = FieldState(0.0, np.zeros(16), np.full(16, 1.0), g)
    errs = []
    for dt in (0.02, 0.01):
        exact = 1 / math.sqrt(1 + 2 * dt)
        errs.append(abs(nonlinear_step(st0, PRESETS["ut3"], dt).v[0] - exact))
    assert 32 * 0.7 < errs[0] / errs[1] < 32 * 1.3


def _short_run_state(step, dt, T=10.0, nl=PRESETS["u2ut"]):
    st0 = bump_data(SMALL, 4.0, 0.5, "bump_pair")
    n = round(T / dt)
    s = st0
    for _ in range(n):
        s = step(s, nl, dt)
    return s


def test_schemes_agree_on_short_run():
    a = _short_run_state(step_strang, 0.0025)
    b = _short_run_state(step_rk4_mol, 0.02)
    na, nb = np.linalg.norm(a.u), np.linalg.norm(b.u)
    assert abs(na - nb) <= 1e-5 * nb
    assert a.t == pytest.approx(10.0) and b.t == pytest.approx(10.0)


def test_convergence_orders():
    ref_s = _short_run_state(step_strang, 0.1 / 8, T=4.0)
    es = [np.max(np.abs(_short_run_state(step_strang, dt, T=4.0).u - ref_s.u)) for dt in (0.2, 0.1)]
    assert 4 * 0.8 < es[0] / es[1] < 4 * 1.2
    # rk4_mol needs dt <= dx/pi ~ 0.04 on this grid
    ref_r = _short_run_state(step_rk4_mol, 0.01 / 8, T=4.0)
    er = [np.max(np.abs(_short_run_state(step_rk4_mol, dt, T=4.0).u - ref_r.u)) for dt in (0.02, 0.01)]
    assert 16 * 0.7 < er[0] / er[1] < 16 * 1.3


def _cfg(**kw):
    base = dict(eps=0.1, B=4.0, dt=0.05, T=40.0, record_times=(0.0, 20.0, 40.0), norm_every=1.0)
    base.update(kw)
    return SolverConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError, match="finite propagation"):
        _cfg(T=60.0).validate(SMALL)
    with pytest.raises(ValueError, match="dx/pi"):
        _cfg(scheme="rk4_mol", dt=0.05).validate(SMALL)
    with pytest.raises(ValueError):
        _cfg(scheme="leapfrog").validate(SMALL)
    with pytest.raises(ValueError):
        _cfg(B=1.0).validate(SMALL)
    _cfg().validate(SMALL)


def test_zero_amplitude_gives_zero_fields():
    rec = run_simulation(_cfg(eps=0.0), PRESETS["ut3"], SMALL)
    assert all(not s.u.any() and not s.v.any() for s in rec.snapshots)
    assert all(not series.any() for series in rec.norms.values())


def test_run_is_deterministic_and_records_requested_times():
    a = run_simulation(_cfg(), PRESETS["utpux3"], SMALL)
    b = run_simulation(_cfg(), PRESETS["utpux3"], SMALL)
    assert [s.t for s in a.snapshots] == [0.0, 20.0, 40.0]
    for sa, sb in zip(a.snapshots, b.snapshots):
        assert np.array_equal(sa.u, sb.u)
    assert len(a.norm_times) == 41
    for key in a.norms:
        assert np.array_equal(a.norms[key], b.norms[key])


def test_fused_loop_matches_step_strang():
    rec = run_simulation(_cfg(T=10.0, record_times=(10.0,)), PRESETS["u2utux"], SMALL)
    s = bump_data(SMALL, 4.0, 0.1)
    for _ in range(200):
        s = step_strang(s, PRESETS["u2utux"], 0.05)
    assert np.max(np.abs(rec.snapshots[0].u - s.u)) < 1e-14
    assert np.max(np.abs(rec.snapshots[0].ux - SMALL.d_dx(s.u))) < 1e-14


def test_norms_bracket_and_log_convexity():
    rec = run_simulation(_cfg(), PRESETS["u2ut"], SMALL)
    for tgt in ("u", "ut", "ux"):
        n2, n4, ninf = (rec.norm_series(tgt, p) for p in (2, 4, math.inf))
        assert np.all(n4 <= np.sqrt(n2 * ninf) * (1 + 1e-12))


def test_instability_reported_with_time():
    # anti-damping pumps energy; with a large amplitude it blows up quickly
    nl = PRESETS["ut3"] * -1.0
    cfg = SolverConfig(eps=3.0, B=4.0, dt=0.05, T=40.0, norm_every=0.05)
    with pytest.raises(InstabilityError) as info:
        run_simulation(cfg, nl, SMALL)
    assert 0 < info.value.t <= 40.0


def test_save_load_roundtrip(tmp_path):
    rec = run_simulation(_cfg(), PRESETS["ux2ut"], SMALL)
    save_run(rec, tmp_path / "run")
    back = load_run(tmp_path / "run")
    assert back.config == rec.config and back.grid == rec.grid and back.gamma == rec.gamma
    assert np.array_equal(back.norm_times, rec.norm_times)
    for key in rec.norms:
        assert np.array_equal(back.norms[key], rec.norms[key])
    for a, b in zip(back.snapshots, rec.snapshots):
        assert a.t == b.t and np.array_equal(a.u, b.u) and np.array_equal(a.ux, b.ux)
    write_snapshot_csv(rec, 1, tmp_path / "snap.csv")
    lines = (tmp_path / "snap.csv").read_text().splitlines()
    assert lines[0] == "t,x,u,v,ux" and len(lines) == 1 + SMALL.n_points
    first = (tmp_path / "run" / "norms.csv").read_bytes()
    save_run(rec, tmp_path / "run")
    assert (tmp_path / "run" / "norms.csv").read_bytes() == first


def test_free_run_energy_and_support():
    g = Grid1D(256.0, 4096)
    B = 12.0
    cfg = SolverConfig(eps=0.1, B=B, dt=0.05, T=200.0, record_times=(0.0, 100.0, 200.0))
    rec = run_simulation(cfg, CubicNonlinearity.zero(), g)
    e0 = FieldState(0.0, rec.snapshots[0].u, rec.snapshots[0].v, g).linear_energy()
    for s in rec.snapshots[1:]:
        e = FieldState(s.t, s.u, s.v, g).linear_energy()
        assert abs(e - e0) <= 1e-10 * e0
        outside = np.abs(g.x) > s.t + B + 5 * g.dx
        assert np.max(np.abs(s.u[outside])) <= 1e-8 * 0.1


@pytest.mark.parametrize("nl_name", ["ut3", "u2ut"])
def test_dissipative_energy_decreases_across_amplitudes(nl_name):
    # for F = -ut^3 or -u^2 ut, dE/dt = int F ut <= 0; relative loss grows with eps
    losses = []
    for eps in (0.05, 0.1, 0.2):
        cfg = SolverConfig(eps=eps, B=4.0, dt=0.02, T=40.0, record_times=tuple(range(0, 41, 2)))
        rec = run_simulation(cfg, PRESETS[nl_name], SMALL)
        e = [FieldState(s.t, s.u, s.v, SMALL).linear_energy() for s in rec.snapshots]
        assert all(b <= a * (1 + 1e-10) for a, b in zip(e, e[1:]))
        losses.append(1 - e[-1] / e[0])
    assert 0 < losses[0] < losses[1] < losses[2]
