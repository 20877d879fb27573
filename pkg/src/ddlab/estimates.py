"""A priori estimate checks, balance identities, and the entropy-dissipation
decomposition.

Every inequality is reported as an (lhs, rhs, slack) record; an inequality
passes when slack >= -tol with tol = 1e-6 |rhs| plus the accumulated
time-quadrature error budget carried by the trajectory.  The entropy
dissipation U(u)_t + F(u)_x of a regularized solution splits into four
nodal fields (two exact derivatives and two quadratic products); their
pairings against a compactly supported test function and their L1 norms
are what the singular-limit theory controls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scipy.integrate import simpson

from .flux import EntropyPair, FluxModel
from .spectral1d import (Field1D, Regularization, Trajectory, integral,
                         l2_norm, spectral_derivative)

REL_TOL = 1e-6
ZERO_PAIRING = 1e-14

LABEL_L2 = "l2-contraction"
LABEL_GRAD_TIME = "grad-time-l2"
LABEL_GRAD_DISP = "grad-dispersion"
LABEL_HESS_TIME = "hess-time-l2"


@dataclass(frozen=True)
class EstimateRecord:
    label: str
    lhs: float
    rhs: float
    slack: float          # rhs - lhs at the worst snapshot
    tol: float
    passed: bool
    worst_time: float


@dataclass
class EstimateReport:
    records: list[EstimateRecord]

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def min_slack(self) -> float:
        return min(r.slack for r in self.records)

    def record(self, label: str) -> EstimateRecord:
        for r in self.records:
            if r.label == label:
                return r
        raise KeyError(label)

    def rows(self) -> list[tuple]:
        return [(r.label, r.lhs, r.rhs, r.slack, r.passed) for r in self.records]


def _worst_record(label: str, lhs_values, rhs: float, times,
                  budgets=None) -> EstimateRecord:
    lhs_values = np.asarray(lhs_values, dtype=float)
    slacks = rhs - lhs_values
    i = int(np.argmin(slacks))
    budget = float(budgets[i]) if budgets is not None else 0.0
    tol = REL_TOL * abs(rhs) + budget
    return EstimateRecord(label, float(lhs_values[i]), rhs, float(slacks[i]),
                          tol, bool(slacks[i] >= -tol), float(times[i]))


def norms(field: Field1D) -> dict[str, float]:
    """L2 norms of u and its first two spectral derivatives."""
    g = field.grid
    return {
        "l2_u": l2_norm(field.values, g),
        "l2_ux": l2_norm(spectral_derivative(field.values, g, 1), g),
        "l2_uxx": l2_norm(spectral_derivative(field.values, g, 2), g),
    }


def verify_apriori(traj: Trajectory, reg: Regularization, flux: FluxModel,
                   u0: Field1D) -> EstimateReport:
    """Check the four a priori bounds of the regularized equation.

    l2-contraction   ||u(t)||            <= ||u0||
    grad-time-l2     sqrt(2 eps) (int_0^t ||u_x||^2)^(1/2)      <= ||u0||
    grad-dispersion  sqrt(delta) ||u_x(t)||                     <= R
    hess-time-l2     sqrt(eps delta) (int_0^t ||u_xx||^2)^(1/2) <= R
    with R = sqrt(2 M) ||u0|| + sqrt(delta) ||u0_x||, M the Lipschitz
    bound of the flux.  The time-integrated squared norms are read from
    the trajectory accumulators (L2-in-time reading).  When delta = 0 the
    last two degenerate to 0 <= R.
    """
    g = traj.grid
    M = flux.lipschitz_bound
    nrm0 = norms(u0)
    l2_0, l2x_0 = nrm0["l2_u"], nrm0["l2_ux"]
    eps, delta = reg.eps, reg.delta

    l2_t = np.array([l2_norm(s, g) for s in traj.states])
    l2x_t = np.array([l2_norm(spectral_derivative(s, g, 1), g) for s in traj.states])

    lhs_b = np.sqrt(2.0 * eps * traj.accum_gradsq)
    with np.errstate(divide="ignore", invalid="ignore"):
        budget_b = np.where(traj.accum_gradsq > 0,
                            np.sqrt(2.0 * eps) * traj.quad_err_gradsq
                            / (2.0 * np.sqrt(np.maximum(traj.accum_gradsq, 1e-300))),
                            np.sqrt(2.0 * eps * traj.quad_err_gradsq))

    lhs_d = np.sqrt(eps * abs(delta) * traj.accum_hesssq)
    with np.errstate(divide="ignore", invalid="ignore"):
        budget_d = np.where(traj.accum_hesssq > 0,
                            np.sqrt(eps * abs(delta)) * traj.quad_err_hesssq
                            / (2.0 * np.sqrt(np.maximum(traj.accum_hesssq, 1e-300))),
                            np.sqrt(eps * abs(delta) * traj.quad_err_hesssq))

    rhs_cd = np.sqrt(2.0 * M) * l2_0 + np.sqrt(abs(delta)) * l2x_0
    records = [
        _worst_record(LABEL_L2, l2_t, l2_0, traj.times),
        _worst_record(LABEL_GRAD_TIME, lhs_b, l2_0, traj.times, budget_b),
        _worst_record(LABEL_GRAD_DISP, np.sqrt(abs(delta)) * l2x_t, rhs_cd, traj.times),
        _worst_record(LABEL_HESS_TIME, lhs_d, rhs_cd, traj.times, budget_d),
    ]
    return EstimateReport(records)


# ---------------------------------------------------------------------------
# balance identities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BalanceResiduals:
    entropy_residual: float
    energy_residual: float
    gradient_residual: float
    normalization: dict[str, float]

    def relative(self) -> dict[str, float]:
        out = {}
        for key, res in (("entropy", self.entropy_residual),
                         ("energy", self.energy_residual),
                         ("gradient", self.gradient_residual)):
            scale = self.normalization[key]
            out[key] = abs(res) / scale if scale > 0 else abs(res)
        return out


def entropy_production_rate(field: Field1D, reg: Regularization,
                            pair: EntropyPair) -> float:
    """Instantaneous d/dt of the total entropy:
    -eps int U''(u) u_x^2 + (delta/2) int U'''(u) u_x^3."""
    g = field.grid
    ux = spectral_derivative(field.values, g, 1)
    quad = integral(pair.spec.d2U(field.values) * ux * ux, g)
    cub = integral(pair.spec.d3U(field.values) * ux ** 3, g)
    return -reg.eps * quad + 0.5 * reg.delta * cub


def _require_uniform_snapshots(times: np.ndarray, minimum: int = 33) -> None:
    if times.size < minimum:
        raise ValueError(f"balance residuals need >= {minimum} snapshots, got {times.size}")
    dt = np.diff(times)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * max(dt[0], 1e-300):
        raise ValueError("balance residuals need uniform snapshot spacing")


def balance_residuals(traj: Trajectory, reg: Regularization, flux: FluxModel,
                      pair: EntropyPair) -> BalanceResiduals:
    """Residuals of the entropy, energy, and gradient balances.

    entropy : int U(u(T)) - int U(u0) + eps II U'' u_x^2 - (delta/2) II U''' u_x^3
    energy  : ||u(T)||^2 - ||u0||^2 + 2 eps II u_x^2
    gradient: ||u_x(T)||^2 - ||u0_x||^2 + 2 eps II u_xx^2 + II (f'(u))_x u_x^2

    The cubic f''(u) u_x^3 term is evaluated as (f'(u))_x u_x^2 with a
    spectral x-derivative of the f'(u) samples.  All double integrals use
    composite Simpson quadrature over the (uniform, >= 33) snapshots.
    """
    _require_uniform_snapshots(traj.times)
    g = traj.grid
    m = traj.times.size

    ent = np.empty(m)
    quad_u = np.empty(m)
    cube_u = np.empty(m)
    gradsq = np.empty(m)
    hesssq = np.empty(m)
    fcube = np.empty(m)
    l2sq = np.empty(m)
    for i, u in enumerate(traj.states):
        ux = spectral_derivative(u, g, 1)
        uxx = spectral_derivative(u, g, 2)
        ent[i] = integral(pair.spec.U(u), g)
        quad_u[i] = integral(pair.spec.d2U(u) * ux * ux, g)
        cube_u[i] = integral(pair.spec.d3U(u) * ux ** 3, g)
        gradsq[i] = integral(ux * ux, g)
        hesssq[i] = integral(uxx * uxx, g)
        dfux = spectral_derivative(flux.deriv(u), g, 1)
        fcube[i] = integral(dfux * ux * ux, g)
        l2sq[i] = integral(u * u, g)

    t = traj.times
    ii_quad = float(simpson(quad_u, x=t))
    ii_cube = float(simpson(cube_u, x=t))
    ii_grad = float(simpson(gradsq, x=t))
    ii_hess = float(simpson(hesssq, x=t))
    ii_fcub = float(simpson(fcube, x=t))

    eps, delta = reg.eps, reg.delta
    res_entropy = ent[-1] - ent[0] + eps * ii_quad - 0.5 * delta * ii_cube
    res_energy = l2sq[-1] - l2sq[0] + 2.0 * eps * ii_grad
    res_gradient = gradsq[-1] - gradsq[0] + 2.0 * eps * ii_hess + ii_fcub

    def scale(*terms):
        return max(abs(v) for v in terms)

    normalization = {
        "entropy": scale(ent[-1], ent[0], eps * ii_quad, 0.5 * delta * ii_cube),
        "energy": scale(l2sq[-1], l2sq[0], 2.0 * eps * ii_grad),
        "gradient": scale(gradsq[-1], gradsq[0], 2.0 * eps * ii_hess, ii_fcub),
    }
    return BalanceResiduals(res_entropy, res_energy, res_gradient, normalization)


# ---------------------------------------------------------------------------
# entropy-dissipation decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BumpTestFunction:
    """Tensor bump theta(x, t) = psi((x-xc)/rx) psi((t-tc)/rt) with
    psi(r) = exp(1 - 1/(1-r^2)) for |r| < 1 and 0 outside; theta_x is
    available analytically and theta vanishes identically outside the
    support box."""

    x_center: float
    x_halfwidth: float
    t_center: float
    t_halfwidth: float

    @staticmethod
    def _psi(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = np.abs(r) < 1.0
        ri = r[inside]
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - ri * ri))
        return out

    @staticmethod
    def _dpsi(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = np.abs(r) < 1.0
        ri = r[inside]
        one = 1.0 - ri * ri
        out[inside] = np.exp(1.0 - 1.0 / one) * (-2.0 * ri / (one * one))
        return out

    def __call__(self, x, t: float):
        return self._psi((np.asarray(x) - self.x_center) / self.x_halfwidth) \
            * float(self._psi((t - self.t_center) / self.t_halfwidth))

    def dx(self, x, t: float):
        return self._dpsi((np.asarray(x) - self.x_center) / self.x_halfwidth) \
            / self.x_halfwidth \
            * float(self._psi((t - self.t_center) / self.t_halfwidth))

    @property
    def support(self) -> tuple[float, float, float, float]:
        return (self.x_center - self.x_halfwidth, self.x_center + self.x_halfwidth,
                self.t_center - self.t_halfwidth, self.t_center + self.t_halfwidth)


@dataclass
class GammaReport:
    pairings: dict[int, float]       # <Gamma_i, theta>, i = 1..4
    l1_norms: dict[int, float]       # L1 over the theta support box
    theta: BumpTestFunction


def gamma_fields(state: Field1D, reg: Regularization, pair: EntropyPair):
    """The four entropy-dissipation fields at one time.

    g1 = eps (U'(u) u_x)_x       g2 = -eps U''(u) u_x^2
    g3 = delta (U'(u) u_xx)_x    g4 = -delta U''(u) u_x u_xx
    and g1 + g2 + g3 + g4 = U'(u) (eps u_xx + delta u_xxx).
    """
    g = state.grid
    u = state.values
    ux = spectral_derivative(u, g, 1)
    uxx = spectral_derivative(u, g, 2)
    dU = pair.spec.dU(u)
    d2U = pair.spec.d2U(u)
    g1 = reg.eps * spectral_derivative(dU * ux, g, 1)
    g2 = -reg.eps * d2U * ux * ux
    g3 = reg.delta * spectral_derivative(dU * uxx, g, 1)
    g4 = -reg.delta * d2U * ux * uxx
    return g1, g2, g3, g4


def gamma_pairings(traj: Trajectory, reg: Regularization, pair: EntropyPair,
                   theta: BumpTestFunction) -> GammaReport:
    """Space-time pairings <Gamma_i, theta> and L1 norms over the support.

    The exact-derivative terms are paired in integrated-by-parts form,
    <g1, theta> = -eps II U'(u) u_x theta_x and
    <g3, theta> = -delta II U'(u) u_xx theta_x, matching how the
    vanishing rates are actually derived; g2 and g4 are paired directly.
    """
    g = traj.grid
    x0, x1, t0, t1 = theta.support
    if x0 < g.x_min or x1 > g.x_max:
        raise ValueError("test function support exceeds the spatial domain")
    if t0 < traj.times[0] - 1e-12 or t1 > traj.times[-1] + 1e-12:
        raise ValueError("test function support exceeds the trajectory time window")

    x = g.nodes()
    in_box = (x >= x0) & (x <= x1)
    m = traj.times.size
    rows = {i: np.zeros(m) for i in (1, 2, 3, 4)}
    l1rows = {i: np.zeros(m) for i in (1, 2, 3, 4)}
    for k in range(m):
        t = float(traj.times[k])
        state = Field1D(g, traj.states[k], t)
        u = state.values
        ux = spectral_derivative(u, g, 1)
        uxx = spectral_derivative(u, g, 2)
        dU = pair.spec.dU(u)
        th_x = theta.dx(x, t)
        th = theta(x, t)
        g1, g2, g3, g4 = gamma_fields(state, reg, pair)
        rows[1][k] = -reg.eps * integral(dU * ux * th_x, g)
        rows[3][k] = -reg.delta * integral(dU * uxx * th_x, g)
        rows[2][k] = integral(g2 * th, g)
        rows[4][k] = integral(g4 * th, g)
        for i, gi in ((1, g1), (2, g2), (3, g3), (4, g4)):
            l1rows[i][k] = g.dx * float(np.sum(np.abs(gi[in_box])))

    t = traj.times
    in_time = (t >= t0) & (t <= t1)
    pairings = {i: float(np.trapezoid(rows[i], t)) for i in rows}
    l1 = {i: float(np.trapezoid(l1rows[i][in_time], t[in_time])) for i in l1rows}
    return GammaReport(pairings, l1, theta)


@dataclass(frozen=True)
class RateFit:
    slope: float
    residual: float
    defined: bool


def gamma_rate_fit(eps_values, pairing_values) -> RateFit:
    """Least-squares slope of log|pairing| against log(eps).

    Pairings below 1e-14 are treated as exactly zero; the slope is then
    undefined and the fit is flagged.
    """
    eps_values = np.asarray(eps_values, dtype=float)
    vals = np.abs(np.asarray(pairing_values, dtype=float))
    if eps_values.size < 3:
        raise ValueError("rate fit needs at least 3 points")
    if eps_values.max() / eps_values.min() < 4.0:
        raise ValueError("rate fit needs eps values spanning a factor >= 4")
    if np.any(vals < ZERO_PAIRING):
        return RateFit(float("nan"), float("nan"), defined=False)
    lx, ly = np.log(eps_values), np.log(vals)
    coeffs = np.polyfit(lx, ly, 1)
    resid = ly - np.polyval(coeffs, lx)
    return RateFit(float(coeffs[0]), float(np.sqrt(np.mean(resid ** 2))), True)
