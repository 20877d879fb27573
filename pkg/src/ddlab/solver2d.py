"""Two-dimensional instantiation with diagonal diffusion and dispersion.

u_t + sum_j f_j(u)_{x_j} = eps sum_j d^2_j u + delta sum_j d^3_j u on a
doubly periodic rectangle.  The dispersive operator is the diagonal sum
of per-axis third derivatives, not a mixed-derivative operator.  Same
integrating-factor RK4 construction as the 1D solver; per-axis gradient
and per-pair second-derivative norms are accumulated in time for the
multi-dimensional estimate checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimates import EstimateRecord, EstimateReport, _worst_record
from .flux import FluxModel
from .spectral1d import Regularization, SolverError, TimeController, \
    _TrapezoidAccumulator

PAIRS = ((0, 0), (0, 1), (1, 1))


@dataclass(frozen=True)
class Grid2D:
    x_min: float
    x_max: float
    nx: int
    y_min: float
    y_max: float
    ny: int

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if n < 16 or (n & (n - 1)) != 0:
                raise ValueError(f"grid sizes must be powers of two >= 16, got {n}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("empty domain")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def cell(self) -> float:
        return self.dx * self.dy

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.x_min + self.dx * np.arange(self.nx)
        y = self.y_min + self.dy * np.arange(self.ny)
        return x, y


@dataclass
class Field2D:
    grid: Grid2D
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nx, self.grid.ny):
            raise ValueError("field shape does not match grid")

    def copy(self) -> "Field2D":
        return Field2D(self.grid, self.values.copy(), self.time)


@dataclass(frozen=True)
class FluxVector2D:
    fx: FluxModel
    fy: FluxModel

    def __getitem__(self, axis: int) -> FluxModel:
        return (self.fx, self.fy)[axis]


@dataclass
class Trajectory2D:
    grid: Grid2D
    times: np.ndarray
    states: np.ndarray                       # (m, nx, ny)
    accum_grad: dict[int, np.ndarray]        # axis -> II |d_j u|^2 at snapshots
    accum_hess: dict[tuple[int, int], np.ndarray]
    quad_err_grad: dict[int, np.ndarray]
    quad_err_hess: dict[tuple[int, int], np.ndarray]
    dt_history: np.ndarray = field(default_factory=lambda: np.empty(0))

    def field(self, i: int) -> Field2D:
        return Field2D(self.grid, self.states[i].copy(), float(self.times[i]))

    @property
    def initial(self) -> Field2D:
        return self.field(0)

    @property
    def final(self) -> Field2D:
        return self.field(len(self.times) - 1)


def integral2d(values: np.ndarray, grid: Grid2D) -> float:
    return float(grid.cell * np.sum(values))


def l2_norm2d(values: np.ndarray, grid: Grid2D) -> float:
    return float(np.sqrt(integral2d(values * values, grid)))


def sample_initial2d(grid: Grid2D, name: str, **params) -> Field2D:
    """2D initial data: ``sine2d`` (amplitude, mx, my; my = 0 means
    y-independent), ``constant`` (value)."""
    x, y = grid.nodes()
    X = x[:, None]
    Y = y[None, :]
    if name == "sine2d":
        amp = params.get("amplitude", 1.0)
        mx = params.get("mx", 1)
        my = params.get("my", 0)
        lx = grid.x_max - grid.x_min
        ly = grid.y_max - grid.y_min
        vals = amp * np.sin(mx * 2 * np.pi * (X - grid.x_min) / lx)
        if my:
            vals = vals * np.sin(my * 2 * np.pi * (Y - grid.y_min) / ly)
        else:
            vals = np.broadcast_to(vals, (grid.nx, grid.ny)).copy()
    elif name == "constant":
        vals = np.full((grid.nx, grid.ny), float(params["value"]))
    else:
        raise ValueError(f"unknown 2d profile {name!r}")
    return Field2D(grid, vals, 0.0)


def _wavenumbers2d(grid: Grid2D):
    kx = 2 * np.pi * np.fft.fftfreq(grid.nx, d=grid.dx)
    ky = 2 * np.pi * np.fft.rfftfreq(grid.ny, d=grid.dy)
    kx_odd = kx.copy()
    if grid.nx % 2 == 0:
        kx_odd[grid.nx // 2] = 0.0
    ky_odd = ky.copy()
    if grid.ny % 2 == 0:
        ky_odd[-1] = 0.0
    return kx[:, None], ky[None, :], kx_odd[:, None], ky_odd[None, :]


class Stepper2D:
    """Integrating-factor RK4 on the rfft2 representation."""

    def __init__(self, grid: Grid2D, reg: Regularization, fluxes: FluxVector2D):
        self.grid = grid
        self.reg = reg
        self.fluxes = fluxes
        self.KX, self.KY, self.KXo, self.KYo = _wavenumbers2d(grid)
        self.lam = -reg.eps * (self.KX ** 2 + self.KY ** 2) \
            - 1j * reg.delta * (self.KXo ** 3 + self.KYo ** 3)
        ix = np.abs(np.fft.fftfreq(grid.nx) * grid.nx)
        iy = np.arange(grid.ny // 2 + 1)
        self.keep = (ix[:, None] < grid.nx / 3.0) & (iy[None, :] < grid.ny / 3.0)
        self._factors: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def nonlinear(self, spec: np.ndarray) -> np.ndarray:
        u = np.fft.irfft2(spec, s=(self.grid.nx, self.grid.ny))
        out = -1j * self.KXo * np.fft.rfft2(self.fluxes.fx(u)) \
            - 1j * self.KYo * np.fft.rfft2(self.fluxes.fy(u))
        out[~self.keep] = 0.0
        return out

    def _exp_factors(self, dt: float):
        cached = self._factors.get(dt)
        if cached is None:
            half = np.exp(0.5 * dt * self.lam)
            cached = (half, half * half)
            if len(self._factors) < 64:
                self._factors[dt] = cached
        return cached

    def step_spec(self, spec: np.ndarray, dt: float) -> np.ndarray:
        e_half, e_full = self._exp_factors(dt)
        n1 = self.nonlinear(spec)
        ua = e_half * (spec + 0.5 * dt * n1)
        n2 = self.nonlinear(ua)
        ub = e_half * spec + 0.5 * dt * n2
        n3 = self.nonlinear(ub)
        uc = e_full * spec + dt * e_half * n3
        n4 = self.nonlinear(uc)
        return e_full * spec + (dt / 6.0) * (e_full * n1 + 2.0 * e_half * (n2 + n3) + n4)

    def derivative(self, spec: np.ndarray, jx: int, jy: int) -> np.ndarray:
        opx = (1j * (self.KXo if jx % 2 else self.KX)) ** jx
        opy = (1j * (self.KYo if jy % 2 else self.KY)) ** jy
        return np.fft.irfft2(opx * opy * spec, s=(self.grid.nx, self.grid.ny))


def _check_state2d(u: np.ndarray, fluxes: FluxVector2D, t: float) -> None:
    if not np.all(np.isfinite(u)):
        raise SolverError(f"solution blew up (non-finite values) at t = {t:.6g}")
    for f in (fluxes.fx, fluxes.fy):
        if not f.saturated and not f.contains(u):
            lo, hi = f.working_range
            raise SolverError(
                f"solution left flux working range [{lo:.6g}, {hi:.6g}] at t = {t:.6g}")


def step2d(state: Field2D, reg: Regularization, fluxes: FluxVector2D,
           dt: float) -> Field2D:
    st = Stepper2D(state.grid, reg, fluxes)
    spec = st.step_spec(np.fft.rfft2(state.values), dt)
    u = np.fft.irfft2(spec, s=(state.grid.nx, state.grid.ny))
    _check_state2d(u, fluxes, state.time + dt)
    return Field2D(state.grid, u, state.time + dt)


def select_dt2d(state: Field2D, reg: Regularization, fluxes: FluxVector2D,
                controller: TimeController) -> float:
    speed = max(float(np.max(np.abs(fluxes.fx.deriv(state.values)))),
                float(np.max(np.abs(fluxes.fy.deriv(state.values)))))
    h = min(state.grid.dx, state.grid.dy)
    return min(controller.dt_max, controller.cfl * h / max(speed, 1e-12))


def solve2d(initial: Field2D, reg: Regularization, fluxes: FluxVector2D,
            controller: TimeController) -> Trajectory2D:
    grid = initial.grid
    ts = np.asarray(controller.snapshot_times, dtype=float)
    if ts[0] != 0.0 or np.any(np.diff(ts) <= 0) or ts[-1] > controller.t_final + 1e-12:
        raise ValueError("snapshot times must start at 0, increase, and end by t_final")

    st = Stepper2D(grid, reg, fluxes)
    spec = np.fft.rfft2(initial.values)
    spec[~st.keep] = 0.0
    u = np.fft.irfft2(spec, s=(grid.nx, grid.ny))
    _check_state2d(u, fluxes, 0.0)

    def grad_sq(s, axis):
        d = st.derivative(s, 1 - axis, axis)   # axis 0 -> d/dx, 1 -> d/dy
        return integral2d(d * d, grid)

    def hess_sq(s, pair):
        jx = (pair[0] == 0) + (pair[1] == 0)
        jy = (pair[0] == 1) + (pair[1] == 1)
        d = st.derivative(s, jx, jy)
        return integral2d(d * d, grid)

    acc_g = {a: _TrapezoidAccumulator(grad_sq(spec, a)) for a in (0, 1)}
    acc_h = {p: _TrapezoidAccumulator(hess_sq(spec, p)) for p in PAIRS}

    states = []
    g_vals = {a: [] for a in (0, 1)}
    h_vals = {p: [] for p in PAIRS}
    g_errs = {a: [] for a in (0, 1)}
    h_errs = {p: [] for p in PAIRS}
    dts: list[float] = []
    t = 0.0
    for target in ts:
        while t < target - 1e-12:
            dt = min(select_dt2d(Field2D(grid, u, t), reg, fluxes, controller),
                     target - t)
            spec = st.step_spec(spec, dt)
            u = np.fft.irfft2(spec, s=(grid.nx, grid.ny))
            t += dt
            _check_state2d(u, fluxes, t)
            for a in (0, 1):
                acc_g[a].push(grad_sq(spec, a), dt)
            for p in PAIRS:
                acc_h[p].push(hess_sq(spec, p), dt)
            dts.append(dt)
        t = target
        states.append(u.copy())
        for a in (0, 1):
            g_vals[a].append(acc_g[a].total)
            g_errs[a].append(acc_g[a].err)
        for p in PAIRS:
            h_vals[p].append(acc_h[p].total)
            h_errs[p].append(acc_h[p].err)

    return Trajectory2D(grid, ts.copy(), np.array(states),
                        {a: np.array(v) for a, v in g_vals.items()},
                        {p: np.array(v) for p, v in h_vals.items()},
                        {a: np.array(v) for a, v in g_errs.items()},
                        {p: np.array(v) for p, v in h_errs.items()},
                        np.array(dts))


def exact_linear2d(u0: Field2D, a: tuple[float, float], reg: Regularization,
                   t: float) -> Field2D:
    """Closed form for f_j(u) = a_j u: mode factor
    exp((-i(a1 k1 + a2 k2) - eps |k|^2 - i delta (k1^3 + k2^3)) t)."""
    KX, KY, KXo, KYo = _wavenumbers2d(u0.grid)
    lam = -1j * (a[0] * KXo + a[1] * KYo) - reg.eps * (KX ** 2 + KY ** 2) \
        - 1j * reg.delta * (KXo ** 3 + KYo ** 3)
    spec = np.fft.rfft2(u0.values) * np.exp(lam * t)
    return Field2D(u0.grid, np.fft.irfft2(spec, s=(u0.grid.nx, u0.grid.ny)),
                   u0.time + t)


def verify_apriori_2d(traj: Trajectory2D, reg: Regularization,
                      fluxes: FluxVector2D, u0: Field2D) -> EstimateReport:
    """Multi-dimensional a priori bounds plus the exact energy balance.

    l2-contraction  ||u(t)|| <= ||u0||
    grad-time-l2    sqrt(2 eps) (sum_j II |d_j u|^2)^(1/2) <= ||u0||
    grad-x/y        eps ||d_j u(t)|| <= sqrt(d) M_j ||u0|| + eps ||d_j u0||
    hess-jk         eps^(3/2) (II |d_j d_k u|^2)^(1/2)  <= same right side
    chain-x/y       eps^2 ||d_k u(t)||^2 + eps^3 sum_j II |d_j d_k u|^2
                    <= eps^2 ||d_k u0||^2 + d M_k^2 ||u0||^2
    energy-balance  | ||u(t)||^2 + 2 eps sum_j II |d_j u|^2 - ||u0||^2 |
                    relative residual, tolerance 1e-5.
    """
    grid = traj.grid
    d = 2.0
    eps = reg.eps
    st = Stepper2D(grid, reg, fluxes)
    m = traj.times.size
    l2_t = np.array([l2_norm2d(s, grid) for s in traj.states])
    specs = [np.fft.rfft2(s) for s in traj.states]
    gradnorm = {a: np.array([l2_norm2d(st.derivative(s, 1 - a, a), grid)
                             for s in specs]) for a in (0, 1)}
    l2_0 = l2_norm2d(u0.values, grid)
    spec0 = np.fft.rfft2(u0.values)
    grad0 = {a: l2_norm2d(st.derivative(spec0, 1 - a, a), grid) for a in (0, 1)}
    M = {0: fluxes.fx.lipschitz_bound, 1: fluxes.fy.lipschitz_bound}

    records = [_worst_record("l2-contraction", l2_t, l2_0, traj.times)]

    total_grad = traj.accum_grad[0] + traj.accum_grad[1]
    total_err = traj.quad_err_grad[0] + traj.quad_err_grad[1]
    lhs_b = np.sqrt(2.0 * eps * total_grad)
    budget = np.where(total_grad > 0,
                      np.sqrt(2.0 * eps) * total_err
                      / (2.0 * np.sqrt(np.maximum(total_grad, 1e-300))),
                      np.sqrt(2.0 * eps * total_err))
    records.append(_worst_record("grad-time-l2", lhs_b, l2_0, traj.times, budget))

    axis_name = {0: "x", 1: "y"}
    rhs_axis = {}
    for a in (0, 1):
        rhs_axis[a] = math.sqrt(d) * M[a] * l2_0 + eps * grad0[a]
        records.append(_worst_record(f"grad-{axis_name[a]}", eps * gradnorm[a],
                                     rhs_axis[a], traj.times))
    for p in PAIRS:
        lhs = eps ** 1.5 * np.sqrt(traj.accum_hess[p])
        err = np.where(traj.accum_hess[p] > 0,
                       eps ** 1.5 * traj.quad_err_hess[p]
                       / (2.0 * np.sqrt(np.maximum(traj.accum_hess[p], 1e-300))),
                       eps ** 1.5 * np.sqrt(traj.quad_err_hess[p]))
        label = f"hess-{axis_name[p[0]]}{axis_name[p[1]]}"
        records.append(_worst_record(label, lhs, rhs_axis[p[0]], traj.times, err))

    # chained bound: eps^2 ||d_k u||^2 + eps^3 sum_j II |d_j d_k u|^2
    for k in (0, 1):
        hess_sum = sum(traj.accum_hess[tuple(sorted((j, k)))] for j in (0, 1))
        lhs = eps ** 2 * gradnorm[k] ** 2 + eps ** 3 * hess_sum
        rhs = eps ** 2 * grad0[k] ** 2 + d * M[k] ** 2 * l2_0 ** 2
        err = eps ** 3 * sum(traj.quad_err_hess[tuple(sorted((j, k)))]
                             for j in (0, 1))
        records.append(_worst_record(f"chain-{axis_name[k]}", lhs, rhs,
                                     traj.times, err))

    # exact balance: ||u(t)||^2 + 2 eps sum_j II |d_j u|^2 = ||u0||^2
    resid = np.abs(l2_t ** 2 + 2.0 * eps * total_grad - l2_0 ** 2)
    scale = max(l2_0 ** 2, float(np.max(l2_t ** 2)), 1e-300)
    rel = float(np.max(resid)) / scale
    i_worst = int(np.argmax(resid))
    records.append(EstimateRecord("energy-balance", rel, 1e-5, 1e-5 - rel,
                                  1e-5, rel <= 1e-5, float(traj.times[i_worst])))
    return EstimateReport(records)
