"""Singular-limit experiments: delta = K eps^p families.

A sweep solves the regularized equation for each eps in a decreasing
list, measures localized distances to the entropy-solution reference,
verifies the a priori estimates, collects the dissipation pairings, and
classifies the limit as classical / nonclassical / nonconvergent from
reproducible, data-relative thresholds.

A traveling-wave shooting oracle corroborates nonclassical
classifications: profiles of speed s connecting u_left to a downstream
state satisfy kappa u'' = G(u) - u' in the stretched variable
zeta = (x - s t)/eps, with kappa = delta/eps^2 and
G(u) = f(u) - f(u_left) - s (u - u_left), integrated from the saddle at
u_left along its unstable eigendirection.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .estimates import BumpTestFunction, gamma_pairings, gamma_rate_fit, \
    verify_apriori, RateFit
from .flux import FluxModel, default_radius, make_flux, quadratic_entropy, \
    make_entropy_pair, special_entropy
from .hyperbolic import ReferenceSolution, RiemannProblem, godunov_solve, \
    oleinik_fan
from .spectral1d import (Field1D, Grid1D, Profile, Regularization,
                         SolverError, TimeController, sample_initial, solve)

N_MIN = 64
N_MAX_DEFAULT = 2048
GRID_COEFF = 4.0


def grid_size_rule(length: float, eps: float, delta: float,
                   n_max: int = N_MAX_DEFAULT) -> int:
    """Power-of-two node count resolving the eps shock layer and, under
    delta ~ eps^2, the dispersive oscillation wavelength; capped at n_max
    to stay at desk scale."""
    osc = max(1.0, math.sqrt(abs(delta)) / eps)
    raw = GRID_COEFF * length / (math.pi * eps) * osc
    n = 1 << max(0, math.ceil(math.log2(max(raw, 1.0))))
    return int(min(max(n, N_MIN), n_max))


@dataclass(frozen=True)
class SweepPlan:
    """Declarative description of one delta = K eps^p family."""

    eps_list: tuple[float, ...]
    K: float
    p: float
    flux_name: str
    profile: Profile
    x_min: float
    x_max: float
    t_eval: float
    window: tuple[float, float]
    flux_kwargs: dict = field(default_factory=dict)
    qs: tuple[float, ...] = (1.0,)
    reference: str = "fan"            # "fan" | "godunov"
    entropy: str = "quadratic"        # "quadratic" | "special"
    snapshots: int = 65
    cfl: float = 0.4
    n_max: int = N_MAX_DEFAULT
    godunov_ratio: int = 8

    def __post_init__(self):
        eps = np.asarray(self.eps_list, dtype=float)
        if eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
            raise ValueError("eps_list must be strictly decreasing and positive")
        if self.K < 0:
            raise ValueError("K must be >= 0")
        if self.p <= 0:
            raise ValueError("p must be > 0")
        w0, w1 = self.window
        if not (self.x_min <= w0 < w1 <= self.x_max):
            raise ValueError("window must sit inside the domain")
        for q in self.qs:
            if not 1.0 <= q <= 2.0:
                raise ValueError(f"distance exponent q must be in [1, 2], got {q}")

    def delta(self, eps: float) -> float:
        return self.K * eps ** self.p

    def grid_size(self, eps: float) -> int:
        return grid_size_rule(self.x_max - self.x_min, eps, self.delta(eps),
                              self.n_max)

    def build_flux(self, initial_values=None) -> FluxModel:
        kwargs = dict(self.flux_kwargs)
        if "radius" not in kwargs and self.flux_name != "custom-table" \
                and initial_values is not None:
            kwargs["radius"] = default_radius(initial_values)
        return make_flux(self.flux_name, **kwargs)

    def default_theta(self) -> BumpTestFunction:
        w0, w1 = self.window
        return BumpTestFunction(0.5 * (w0 + w1), 0.5 * (w1 - w0),
                                0.5 * self.t_eval, 0.4 * self.t_eval)


@dataclass
class EpsRecord:
    eps: float
    delta: float
    n: int
    distances: dict[float, float] = field(default_factory=dict)
    cauchy_increment: float = float("nan")
    estimates_pass: bool = False
    min_slack: float = float("nan")
    gamma_pairings: dict[int, float] = field(default_factory=dict)
    gamma_l1: dict[int, float] = field(default_factory=dict)
    final_values: np.ndarray | None = None
    failed: bool = False
    message: str = ""


@dataclass
class SweepResult:
    plan: SweepPlan
    records: list[EpsRecord]
    u0_l1_window: float
    distance_slopes: dict[float, RateFit] = field(default_factory=dict)
    gamma_slopes: dict[int, RateFit] = field(default_factory=dict)

    @property
    def succeeded(self) -> list[EpsRecord]:
        return [r for r in self.records if not r.failed]


@dataclass(frozen=True)
class LimitClass:
    kind: str                  # "classical" | "nonclassical" | "nonconvergent"
    evidence: dict


def lploc_distance(a: Field1D, ref: ReferenceSolution, q: float,
                   window: tuple[float, float]) -> float:
    """(int_window |a - ref|^q dx)^(1/q), trapezoid over the nodes inside
    the window (window endpoints snap to the grid)."""
    if not 1.0 <= q <= 2.0:
        raise ValueError(f"q must be in [1, 2], got {q}")
    g = a.grid
    w0, w1 = window
    if w0 < g.x_min or w1 > g.x_max:
        raise ValueError("window outside the domain")
    x = g.nodes()
    sel = (x >= w0) & (x <= w1)
    if np.count_nonzero(sel) < 2:
        raise ValueError("window contains fewer than two nodes")
    err = np.abs(a.values[sel] - ref.values_on(g, a.time)[sel]) ** q
    return float(np.trapezoid(err, x[sel]) ** (1.0 / q))


def _window_l1(values: np.ndarray, grid: Grid1D, window) -> float:
    x = grid.nodes()
    sel = (x >= window[0]) & (x <= window[1])
    return float(np.trapezoid(np.abs(values[sel]), x[sel]))


def build_reference(plan: SweepPlan, flux: FluxModel,
                    n_run: int | None = None) -> ReferenceSolution:
    """Entropy-solution reference for the plan's initial data."""
    if plan.reference == "fan":
        if plan.profile.name != "smoothed-riemann":
            raise ValueError("fan reference needs smoothed-riemann initial data")
        u_l, u_r, _ = plan.profile.params
        fan = oleinik_fan(RiemannProblem(u_l, u_r, flux))
        x0 = 0.5 * (plan.x_min + plan.x_max)
        return ReferenceSolution("fan", fan=fan, x0=x0)
    if plan.reference == "godunov":
        n_ref = (n_run or plan.n_max) * plan.godunov_ratio
        grid = Grid1D(plan.x_min, plan.x_max, n_ref)
        u0 = sample_initial(grid, _run_profile(plan, grid))
        out = godunov_solve(u0, flux, plan.t_eval)
        return ReferenceSolution("godunov", field=out,
                                 meta={"n": n_ref, "ratio": plan.godunov_ratio})
    raise ValueError(f"unknown reference kind {plan.reference!r}")


def _run_profile(plan: SweepPlan, grid: Grid1D) -> Profile:
    # the ramp of the eps-family data may not be sharper than the grid
    # resolves; widening it on coarse runs keeps u0 sampled smooth
    if plan.profile.name == "smoothed-riemann":
        u_l, u_r, w = plan.profile.params
        return Profile.smoothed_riemann(u_l, u_r, max(w, 4.0 * grid.dx))
    return plan.profile


def _run_single(plan: SweepPlan, eps: float) -> EpsRecord:
    delta = plan.delta(eps)
    n = plan.grid_size(eps)
    rec = EpsRecord(eps, delta, n)
    try:
        grid = Grid1D(plan.x_min, plan.x_max, n)
        u0 = sample_initial(grid, _run_profile(plan, grid))
        flux = plan.build_flux(u0.values)
        reg = Regularization(eps, delta)
        ctrl = TimeController.uniform(plan.t_eval, plan.snapshots, cfl=plan.cfl)
        traj = solve(u0, reg, flux, ctrl)

        ref = build_reference(plan, flux, n_run=n)
        final = traj.final
        for q in plan.qs:
            rec.distances[q] = lploc_distance(final, ref, q, plan.window)

        report = verify_apriori(traj, reg, flux, traj.initial)
        rec.estimates_pass = report.all_pass
        rec.min_slack = report.min_slack

        pair = special_entropy(flux) if plan.entropy == "special" \
            else make_entropy_pair(quadratic_entropy(), flux)
        gam = gamma_pairings(traj, reg, pair, plan.default_theta())
        rec.gamma_pairings = gam.pairings
        rec.gamma_l1 = gam.l1_norms
        rec.final_values = final.values
    except (SolverError, ValueError) as exc:
        rec.failed = True
        rec.message = str(exc)
    return rec


def run_sweep(plan: SweepPlan, workers: int = 1) -> SweepResult:
    """Run the family; failed runs are recorded and the sweep continues.

    Records are ordered by the plan's eps_list regardless of execution
    order, so repeated runs produce identical results.
    """
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_single, [plan] * len(plan.eps_list),
                                    plan.eps_list))
    else:
        records = [_run_single(plan, eps) for eps in plan.eps_list]

    # Cauchy increments: L1-window distance between successive-eps
    # solutions, finer grid restricted to the coarser one.
    for prev, cur in zip(records, records[1:]):
        if prev.failed or cur.failed:
            continue
        coarse, fine = (prev, cur) if prev.n <= cur.n else (cur, prev)
        ratio = fine.n // coarse.n
        grid_c = Grid1D(plan.x_min, plan.x_max, coarse.n)
        diff = coarse.final_values - fine.final_values[::ratio]
        cur.cauchy_increment = _window_l1(diff, grid_c, plan.window)

    grid0 = Grid1D(plan.x_min, plan.x_max, plan.grid_size(plan.eps_list[0]))
    u0 = sample_initial(grid0, _run_profile(plan, grid0))
    result = SweepResult(plan, records, _window_l1(u0.values, grid0, plan.window))

    ok = result.succeeded
    if len(ok) >= 3:
        eps = [r.eps for r in ok]
        for q in plan.qs:
            try:
                result.distance_slopes[q] = gamma_rate_fit(
                    eps, [r.distances[q] for r in ok])
            except ValueError:
                pass
        for i in (1, 2, 3, 4):
            try:
                result.gamma_slopes[i] = gamma_rate_fit(
                    eps, [r.gamma_pairings[i] for r in ok])
            except ValueError:
                pass
    return result


def classify(result: SweepResult, tol_conv: float | None = None,
             tol_dist: float | None = None) -> LimitClass:
    """Classify the limit from the sweep evidence.

    Rule: if the last Cauchy increment exceeds tol_conv the family is not
    converging; otherwise it converges, and the final reference distance
    decides classical (below tol_dist) versus nonclassical.  Defaults:
    tol_conv = 0.02 and tol_dist = 0.05 of the initial-data L1 mass on
    the window.
    """
    ok = result.succeeded
    if len(ok) < 3:
        raise ValueError("classification needs at least 3 successful records")
    mass = result.u0_l1_window
    tol_conv = 0.02 * mass if tol_conv is None else tol_conv
    tol_dist = 0.05 * mass if tol_dist is None else tol_dist
    q = result.plan.qs[0]
    incs = [r.cauchy_increment for r in ok[1:] if np.isfinite(r.cauchy_increment)]
    c_last = incs[-1] if incs else float("inf")
    d_last = ok[-1].distances[q]
    evidence = {"cauchy_last": c_last, "distance_last": d_last,
                "tol_conv": tol_conv, "tol_dist": tol_dist, "q": q,
                "increments": incs,
                "distances": [r.distances[q] for r in ok]}
    if c_last > tol_conv:
        return LimitClass("nonconvergent", evidence)
    if d_last < tol_dist:
        return LimitClass("classical", evidence)
    return LimitClass("nonclassical", evidence)


# ---------------------------------------------------------------------------
# traveling-wave shooting oracle
# ---------------------------------------------------------------------------

def _profile_equilibria(flux: FluxModel, s: float, u_left: float,
                        lo: float, hi: float) -> list[float]:
    f_l = float(flux(u_left))

    def G(u):
        return float(flux(u)) - f_l - s * (u - u_left)

    u = np.linspace(lo, hi, 2001)
    vals = np.asarray(flux(u), dtype=float) - f_l - s * (u - u_left)
    roots = [float(v) for v in u[vals == 0.0]]
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(float(brentq(G, u[i], u[i + 1], xtol=1e-14)))
    roots = sorted(roots)
    merged: list[float] = []
    for r in roots:
        if not merged or abs(r - merged[-1]) > 1e-9:
            merged.append(r)
    return merged


@dataclass(frozen=True)
class ShootOutcome:
    status: str                  # "settled" | "diverged" | "budget"
    attained: float | None
    dwell: float                 # longest stay near the attained state


def _shoot(flux: FluxModel, eps: float, delta: float, s: float, u_left: float,
           search: tuple[float, float], zeta_budget: float,
           settle_tol: float, seed: float) -> ShootOutcome:
    if eps <= 0 or delta <= 0:
        raise ValueError("shooting needs eps > 0 and delta > 0")
    kappa = delta / (eps * eps)
    f_l = float(flux(u_left))

    def G(u):
        return float(flux(u)) - f_l - s * (u - u_left)

    dG = float(flux.deriv(u_left)) - s
    if dG <= 0:
        # u_left is not a saddle: no unstable direction to shoot along
        return ShootOutcome("diverged", None, 0.0)
    mu = (-1.0 / kappa + math.sqrt(1.0 / kappa ** 2 + 4.0 * dG / kappa)) / 2.0
    y0 = [u_left - seed, -seed * mu]
    lo, hi = search

    def rhs(_z, y):
        return [y[1], (G(y[0]) - y[1]) / kappa]

    def escape(_z, y):
        return (y[0] - lo) * (hi - y[0])

    escape.terminal = True
    escape.direction = -1
    sol = solve_ivp(rhs, (0.0, zeta_budget), y0, method="Radau",
                    rtol=1e-10, atol=1e-12, dense_output=True, events=escape)

    zs = np.linspace(0.0, sol.t[-1], max(2, int(sol.t[-1] / 0.05) + 1))
    dz = zs[1] - zs[0]
    uu, ww = sol.sol(zs)
    eqs = _profile_equilibria(flux, s, u_left, lo, hi)
    best_eq, best_dwell = None, 0.0
    for ue in eqs:
        if abs(ue - u_left) < 1e-9:
            continue
        near = (np.abs(uu - ue) < settle_tol) & (np.abs(ww) < settle_tol)
        if not near.any():
            continue
        # longest contiguous dwell, in zeta units
        runs = np.diff(np.flatnonzero(np.diff(np.concatenate(
            ([0], near.astype(int), [0])))).reshape(-1, 2), axis=1)
        dwell = float(runs.max()) * dz if runs.size else 0.0
        if dwell > best_dwell:
            best_eq, best_dwell = ue, dwell

    if sol.status == 1:   # left the search box
        if best_dwell >= 5.0:
            return ShootOutcome("diverged", best_eq, best_dwell)
        return ShootOutcome("diverged", None, best_dwell)
    # ran to the budget: settled if the final stretch sits at an equilibrium
    tail = zs >= zs[-1] - 10.0
    for ue in eqs:
        if abs(ue - u_left) < 1e-9:
            continue
        if np.all(np.abs(uu[tail] - ue) < settle_tol) \
                and np.all(np.abs(ww[tail]) < settle_tol):
            return ShootOutcome("settled", ue, best_dwell)
    if best_dwell >= 5.0:
        return ShootOutcome("budget", best_eq, best_dwell)
    return ShootOutcome("budget", None, best_dwell)


def traveling_wave_shoot(flux: FluxModel, eps: float, delta: float, s: float,
                         u_left: float, search: tuple[float, float] | None = None,
                         zeta_budget: float = 800.0,
                         settle_tol: float = 1e-3,
                         seed: float = 1e-6) -> float | None:
    """Attained downstream state of the profile orbit, or None.

    The orbit leaves the saddle at u_left along its unstable
    eigendirection (seed offset 1e-6) and is integrated over the
    stretched variable; it either settles at a downstream equilibrium
    (the attained state), lingers at one long enough to count as a
    saddle-to-saddle connection, or escapes the search interval (None).
    """
    if search is None:
        search = flux.working_range
    out = _shoot(flux, eps, delta, s, u_left, search, zeta_budget,
                 settle_tol, seed)
    return out.attained


def find_kinetic_speed(flux: FluxModel, eps: float, delta: float, u_left: float,
                       s_lo: float, s_hi: float, iters: int = 60,
                       search: tuple[float, float] | None = None
                       ) -> tuple[float, float | None]:
    """Bisect the speed at which the profile orbit stops escaping.

    Returns (s_star, attained state at the connection).  Requires the two
    bracket speeds to produce different outcomes (escape vs settle).
    """
    if search is None:
        search = flux.working_range

    def escapes(s):
        out = _shoot(flux, eps, delta, s, u_left, search, 800.0, 1e-3, 1e-6)
        return out.status == "diverged", out

    lo_esc, _ = escapes(s_lo)
    hi_esc, _ = escapes(s_hi)
    if lo_esc == hi_esc:
        raise ValueError("bracket speeds give the same outcome; widen the bracket")
    for _ in range(iters):
        mid = 0.5 * (s_lo + s_hi)
        mid_esc, _ = escapes(mid)
        if mid_esc == lo_esc:
            s_lo = mid
        else:
            s_hi = mid
    s_star = 0.5 * (s_lo + s_hi)
    # at the bisected speed the orbit tracks the connection and dwells at
    # the far saddle long enough to be reported
    for s_probe in (s_lo, s_star, s_hi):
        out = _shoot(flux, eps, delta, s_probe, u_left, search, 800.0, 1e-3, 1e-6)
        if out.attained is not None and out.dwell >= 5.0:
            return s_star, out.attained
    return s_star, None
