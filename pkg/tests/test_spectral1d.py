"""Spectral solver against closed-form and high-order ODE oracles."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from ddlab.flux import make_flux
from ddlab.spectral1d import (Field1D, Grid1D, Profile, Regularization,
                              SolverError, TimeController, exact_linear,
                              integral, l2_norm, sample_initial, select_dt,
                              semidiscrete_rhs, solve, spectral_derivative,
                              step, total_variation)

TWO_PI = 2.0 * np.pi


def _grid(n=256, x_min=0.0, x_max=TWO_PI):
    return Grid1D(x_min, x_max, n)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid1D(0.0, 1.0, 48)  # not a power of two
    with pytest.raises(ValueError):
        Grid1D(0.0, 1.0, 8)
    with pytest.raises(ValueError):
        Regularization(eps=-1.0)


def test_sample_sine_direct():
    grid = _grid(16)
    f = sample_initial(grid, Profile.sine(1.0, 1))
    k = np.arange(16)
    assert np.allclose(f.values, np.sin(2 * np.pi * k / 16), atol=1e-15)


def test_sample_constant():
    grid = _grid(32)
    f = sample_initial(grid, Profile.constant(0.7))
    assert np.all(f.values == 0.7)


def test_sample_smoothed_riemann_hand_values():
    grid = Grid1D(-4.0, 4.0, 64)
    w = 0.5
    f = sample_initial(grid, Profile.smoothed_riemann(1.0, 0.0, w))
    assert np.all(f.values >= 0.0) and np.all(f.values <= 1.0)
    # formula evaluated by hand at three nodes (center 0, back ramp at 3)
    for x in (-4.0, 0.0, 2.0):
        i = int((x - grid.x_min) / grid.dx)
        expect = 0.5 * (1 - np.tanh((x - 0.0) / w)) + 0.5 * (1 + np.tanh((x - 3.0) / w))
        assert f.values[i] == pytest.approx(expect, abs=1e-15)
    # monotone across the central ramp
    sl = f.values[24:40]
    assert np.all(np.diff(sl) <= 1e-12)


def test_sample_smoothed_riemann_needs_resolved_ramp():
    with pytest.raises(ValueError):
        sample_initial(Grid1D(-4.0, 4.0, 16), Profile.smoothed_riemann(1, 0, 0.1))


def test_spectral_derivative_sine():
    grid = _grid(64)
    x = grid.nodes()
    d1 = spectral_derivative(np.sin(3 * x), grid, 1)
    assert np.allclose(d1, 3 * np.cos(3 * x), atol=1e-10)
    d2 = spectral_derivative(np.sin(3 * x), grid, 2)
    assert np.allclose(d2, -9 * np.sin(3 * x), atol=1e-9)


# -- select_dt ---------------------------------------------------------------

def test_select_dt_floor_engages():
    grid = Grid1D(0.0, 2.56, 256)  # dx = 0.01
    f = Field1D(grid, np.zeros(256))
    ctrl = TimeController(t_final=1.0, cfl=0.4, dt_max=0.1)
    dt = select_dt(f, Regularization(0.01), make_flux("burgers"), ctrl)
    assert dt == pytest.approx(0.1)


def test_select_dt_burgers():
    grid = Grid1D(0.0, 2.56, 256)
    vals = np.zeros(256)
    vals[10] = 2.0
    f = Field1D(grid, vals)
    ctrl = TimeController(t_final=1.0, cfl=0.4, dt_max=10.0)
    dt = select_dt(f, Regularization(0.01), make_flux("burgers", radius=3), ctrl)
    assert dt == pytest.approx(0.4 * 0.01 / 2.0)


def test_select_dt_linear():
    grid = Grid1D(0.0, 2.56, 256)
    f = Field1D(grid, np.zeros(256))
    ctrl = TimeController(t_final=1.0, cfl=0.4, dt_max=10.0)
    dt = select_dt(f, Regularization(0.01), make_flux("linear", a=5.0), ctrl)
    assert dt == pytest.approx(8e-4)


# -- step --------------------------------------------------------------------

def test_constant_state_fixed_point():
    grid = _grid(64)
    f = Field1D(grid, np.full(64, 1.3))
    out = step(f, Regularization(0.05, 0.01), make_flux("burgers", radius=4), 0.01)
    assert np.allclose(out.values, 1.3, atol=1e-14)


def test_step_single_mode_matches_exact_linear():
    # fixes the sign convention of the dispersive phase
    grid = _grid(64)
    x = grid.nodes()
    u0 = Field1D(grid, np.sin(2 * x))
    reg = Regularization(0.01, 0.003)
    a = 0.7
    dt = 1e-4
    stepped = step(u0, reg, make_flux("linear", a=a), dt)
    exact = exact_linear(u0, a, reg, dt)
    assert np.max(np.abs(stepped.values - exact.values)) < 1e-12


def test_step_matches_reference_ode_integration():
    # one RK4 step vs DOP853 on the identical dealiased right-hand side
    grid = _grid(64)
    u0 = sample_initial(grid, Profile.sine(1.0, 1))
    reg = Regularization(0.01, 0.0)
    flux = make_flux("burgers", radius=3.0)
    dt = 1e-3

    def rhs(_t, y):
        return semidiscrete_rhs(Field1D(grid, y), reg, flux)

    ref = solve_ivp(rhs, (0.0, dt), u0.values, method="DOP853",
                    rtol=1e-13, atol=1e-15)
    ours = step(u0, reg, flux, dt)
    assert np.max(np.abs(ours.values - ref.y[:, -1])) < 1e-10


def test_step_rejects_blowup():
    grid = _grid(64)
    u0 = sample_initial(grid, Profile.sine(1.0, 1))
    flux = make_flux("burgers", radius=3.0)
    with pytest.raises(SolverError):
        f = u0
        for _ in range(50):  # wildly unstable dt
            f = step(f, Regularization(1e-6), flux, 5.0)


def test_solve_aborts_outside_working_range():
    grid = _grid(64)
    u0 = sample_initial(grid, Profile.sine(1.0, 1))
    flux = make_flux("burgers", radius=0.5)  # data already outside
    with pytest.raises(SolverError):
        solve(u0, Regularization(0.01), flux, TimeController(0.1))


# -- solve -------------------------------------------------------------------

def test_solve_constant_trajectory():
    grid = _grid(64)
    u0 = Field1D(grid, np.full(64, 0.4))
    traj = solve(u0, Regularization(0.02, 1e-4), make_flux("burgers", radius=2),
                 TimeController.uniform(0.5, 5))
    assert np.allclose(traj.states, 0.4, atol=1e-13)
    assert traj.accum_gradsq[-1] == pytest.approx(0.0, abs=1e-20)


def test_solve_matches_exact_linear():
    grid = _grid(256)
    u0 = sample_initial(grid, Profile.sine(1.0, 1))
    reg = Regularization(0.01, 0.001)
    a = 1.0
    traj = solve(u0, reg, make_flux("linear", a=a), TimeController.uniform(1.0, 5))
    for i, t in enumerate(traj.times):
        exact = exact_linear(traj.initial, a, reg, float(t))
        err = l2_norm(traj.states[i] - exact.values, grid) / l2_norm(exact.values, grid)
        assert err < 1e-8


def test_mass_conservation():
    grid = _grid(256)
    u0 = sample_initial(grid, Profile.sine(1.0, 2))
    u0.values += 0.35
    traj = solve(u0, Regularization(0.02, 4e-4), make_flux("burgers", radius=4),
                 TimeController.uniform(1.0, 9))
    means = traj.states.mean(axis=1)
    assert np.max(np.abs(means - means[0])) < 1e-12 * max(1.0, abs(means[0]))


def test_energy_never_grows():
    grid = _grid(512)
    u0 = sample_initial(grid, Profile.sine(1.0, 1))
    traj = solve(u0, Regularization(0.02, 4e-4), make_flux("burgers", radius=3),
                 TimeController.uniform(1.0, 17))
    norms = [l2_norm(s, grid) for s in traj.states]
    assert all(nv <= norms[0] + 1e-8 for nv in norms)


def test_accumulators_nonnegative_nondecreasing():
    grid = _grid(256)
    u0 = sample_initial(grid, Profile.sine(1.0, 1))
    traj = solve(u0, Regularization(0.02, 0.0), make_flux("burgers", radius=3),
                 TimeController.uniform(1.0, 9))
    for acc in (traj.accum_gradsq, traj.accum_hesssq):
        assert acc[0] == 0.0
        assert np.all(np.diff(acc) >= 0.0)


def test_total_variation_diminishes_viscous_burgers():
    grid = _grid(512)
    u0 = sample_initial(grid, Profile.sine(1.0, 1))
    traj = solve(u0, Regularization(0.02, 0.0), make_flux("burgers", radius=3),
                 TimeController.uniform(2.0, 3))
    assert total_variation(traj.states[-1]) <= total_variation(traj.states[0]) + 1e-6


def test_spectral_convergence_order():
    # error vs a 2n self-reference drops faster than dx^4 between n=256 and 512
    reg = Regularization(0.01, 0.0)
    flux = make_flux("burgers", radius=3)
    sols = {}
    for n in (256, 512, 1024):
        grid = _grid(n)
        u0 = sample_initial(grid, Profile.sine(1.0, 1))
        ctrl = TimeController(1.0, dt_max=1e-3, cfl=0.9)
        sols[n] = solve(u0, reg, flux, ctrl).states[-1]
    e256 = np.sqrt(np.mean((sols[256] - sols[512][::2]) ** 2))
    e512 = np.sqrt(np.mean((sols[512] - sols[1024][::2]) ** 2))
    order = np.log2(e256 / e512)
    assert order >= 4.0


def test_time_order_fourth():
    grid = _grid(128)
    reg = Regularization(0.05, 1e-3)
    flux = make_flux("burgers", radius=3)
    u0 = sample_initial(grid, Profile.sine(1.0, 1))
    outs = []
    for dt in (2e-2, 1e-2, 5e-3):
        ctrl = TimeController(0.5, dt_max=dt, cfl=1.0)
        outs.append(solve(u0, reg, flux, ctrl).states[-1])
    e1 = np.sqrt(np.mean((outs[0] - outs[1]) ** 2))
    e2 = np.sqrt(np.mean((outs[1] - outs[2]) ** 2))
    assert np.log2(e1 / e2) >= 3.9


# -- exact_linear ------------------------------------------------------------

def test_exact_linear_identity_at_t0():
    grid = _grid(64)
    u0 = sample_initial(grid, Profile.sine(0.8, 3))
    out = exact_linear(u0, 2.0, Regularization(0.1, 0.01), 0.0)
    assert np.allclose(out.values, u0.values, atol=1e-15)


def test_exact_linear_decay_to_zero():
    grid = _grid(64)
    u0 = sample_initial(grid, Profile.sine(1.0, 1))
    out = exact_linear(u0, 1.0, Regularization(0.5, 0.0), 50.0)
    assert l2_norm(out.values, grid) < 1e-9


def test_exact_linear_amplitude_factor():
    grid = _grid(64)
    x = grid.nodes()
    u0 = Field1D(grid, np.sin(2 * x))
    out = exact_linear(u0, 1.0, Regularization(0.01, 0.001), 1.0)
    amp = np.max(np.abs(np.fft.rfft(out.values))) / np.max(np.abs(np.fft.rfft(u0.values)))
    assert amp == pytest.approx(np.exp(-0.04), rel=1e-12)


def test_integral_and_norm_helpers():
    grid = _grid(128)
    x = grid.nodes()
    assert integral(np.sin(x) ** 2, grid) == pytest.approx(np.pi, abs=1e-12)
    assert l2_norm(np.sin(x), grid) == pytest.approx(np.sqrt(np.pi), abs=1e-12)
