"""Entropy-solution references for the hyperbolic limit u_t + f(u)_x = 0.

Two independent oracles cross-validate each other: a first-order Godunov
finite-volume scheme (monotone, hence convergent to the entropy solution)
for arbitrary data, and self-similar Riemann constructions - the textbook
shock/rarefaction solution for convex flux, and the flux-envelope
construction (lower convex envelope for rising jumps, upper concave
envelope for falling jumps) for general smooth flux.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .flux import FluxModel
from .spectral1d import Field1D, Grid1D

RH_TOL = 1e-12
STATE_GRID = 16385


@dataclass(frozen=True)
class RiemannProblem:
    u_left: float
    u_right: float
    flux: FluxModel

    def __post_init__(self):
        lo, hi = self.flux.working_range
        for u in (self.u_left, self.u_right):
            if not lo <= u <= hi:
                raise ValueError(f"state {u} outside flux working range [{lo}, {hi}]")


@dataclass(frozen=True)
class Wave:
    kind: str                    # "shock" | "rarefaction"
    u_left: float
    u_right: float
    speed_left: float
    speed_right: float           # == speed_left for shocks

    @property
    def speed(self) -> float:
        return self.speed_left


@dataclass
class WaveFan:
    """Self-similar solution u(x/t) as an ordered list of waves."""

    u_left: float
    u_right: float
    flux: FluxModel
    waves: list[Wave] = field(default_factory=list)

    def validate(self, samples: int = 1024) -> None:
        speeds = [s for w in self.waves for s in (w.speed_left, w.speed_right)]
        if any(b < a - 1e-12 for a, b in zip(speeds, speeds[1:])):
            raise ValueError("wave speeds not nondecreasing")
        for w in self.waves:
            if w.kind == "shock":
                jump = w.u_right - w.u_left
                rh = (self.flux(w.u_right) - self.flux(w.u_left)) - w.speed * jump
                if abs(rh) > RH_TOL * max(1.0, abs(jump)):
                    raise ValueError(f"shock violates the jump condition: residual {rh}")
                v = np.linspace(w.u_left, w.u_right, samples + 2)[1:-1]
                chord = self.flux(w.u_left) + w.speed * (v - w.u_left)
                gap = self.flux(v) - chord
                # falling shocks: graph below chord; rising shocks: above
                if w.u_left > w.u_right:
                    ok = np.all(gap <= 1e-10)
                else:
                    ok = np.all(gap >= -1e-10)
                if not ok:
                    raise ValueError("shock violates the chord admissibility condition")

    def evaluate(self, xi) -> np.ndarray:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.full(xi.shape, self.u_left)
        for w in self.waves:
            if w.kind == "shock":
                out[xi >= w.speed] = w.u_right
            else:
                inside = (xi > w.speed_left) & (xi < w.speed_right)
                for idx in np.nonzero(inside)[0]:
                    out[idx] = self._invert_speed(w, float(xi[idx]))
                out[xi >= w.speed_right] = w.u_right
        return out

    def _invert_speed(self, w: Wave, xi: float) -> float:
        a, b = w.u_left, w.u_right

        def h(u):
            return float(self.flux.deriv(u)) - xi

        lo, hi = (a, b) if a <= b else (b, a)
        ha, hb = h(lo), h(hi)
        if ha == 0.0:
            return lo
        if hb == 0.0:
            return hi
        if ha * hb > 0:      # xi marginally outside due to round-off
            return a if abs(h(a)) < abs(h(b)) else b
        return float(brentq(h, lo, hi, xtol=1e-14))


@dataclass
class ReferenceSolution:
    """Entropy-solution reference: a self-similar fan around a jump at x0,
    or a fine-grid Godunov field at the requested time."""

    kind: str                          # "fan" | "godunov"
    fan: WaveFan | None = None
    x0: float = 0.0
    field: Field1D | None = None
    meta: dict = None

    def values_on(self, grid: Grid1D, t: float) -> np.ndarray:
        x = grid.nodes()
        if self.kind == "fan":
            if t <= 0:
                return np.where(x < self.x0, self.fan.u_left, self.fan.u_right)
            return self.fan.evaluate((x - self.x0) / t)
        ref = self.field
        ratio = ref.grid.n // grid.n
        if ref.grid.n != ratio * grid.n or ratio < 1:
            raise ValueError("reference resolution must be an integer multiple")
        if abs(ref.time - t) > 1e-9:
            raise ValueError(f"reference stored at t={ref.time}, requested {t}")
        # conservative restriction: average the fine cells covering each
        # coarse cell centered at a coarse node (boundary cells straddle
        # the coarse edges, so they enter with weight 1/2 for even ratios)
        nf = ref.grid.n
        if ratio % 2 == 0:
            w = np.full(ratio + 1, 1.0)
            w[0] = w[-1] = 0.5
            base = (np.arange(grid.n) * ratio - ratio // 2) % nf
            idx = (base[:, None] + np.arange(ratio + 1)[None, :]) % nf
        else:
            w = np.full(ratio, 1.0)
            base = (np.arange(grid.n) * ratio - (ratio - 1) // 2) % nf
            idx = (base[:, None] + np.arange(ratio)[None, :]) % nf
        return (ref.values[idx] * w).sum(axis=1) / ratio


# ---------------------------------------------------------------------------
# Godunov finite-volume oracle
# ---------------------------------------------------------------------------

def critical_points(flux: FluxModel, lo: float, hi: float,
                    scan: int = 4097) -> np.ndarray:
    """Interior zeros of f' (scan grid plus bisection refinement)."""
    u = np.linspace(lo, hi, scan)
    df = np.asarray(flux.deriv(u))
    out = [float(v) for v in u[1:-1][df[1:-1] == 0.0]]
    for i in np.nonzero(np.sign(df[:-1]) * np.sign(df[1:]) < 0)[0]:
        out.append(float(brentq(lambda v: float(flux.deriv(v)), u[i], u[i + 1],
                                xtol=1e-14)))
    return np.unique(np.asarray(out, dtype=float))


def godunov_flux(flux: FluxModel, a: np.ndarray, b: np.ndarray,
                 crits: np.ndarray) -> np.ndarray:
    """Exact scalar Godunov flux: min of f on [a,b] if a <= b, else max on [b,a]."""
    fa, fb = flux(a), flux(b)
    gmin = np.minimum(fa, fb)
    gmax = np.maximum(fa, fb)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    for c in crits:
        inside = (lo < c) & (c < hi)
        if np.any(inside):
            fc = float(flux(c))
            gmin = np.where(inside, np.minimum(gmin, fc), gmin)
            gmax = np.where(inside, np.maximum(gmax, fc), gmax)
    return np.where(a <= b, gmin, gmax)


def godunov_solve(u0: Field1D, flux: FluxModel, t_final: float,
                  cfl: float = 0.45) -> Field1D:
    """First-order Godunov update on the periodic grid to t_final.

    Monotone under cfl <= 0.5, so the numerical solution converges to the
    entropy solution; the discrete mean is conserved to round-off.
    """
    if cfl > 0.5:
        raise ValueError(f"Godunov needs cfl <= 0.5, got {cfl}")
    u = u0.values.copy()
    dx = u0.grid.dx
    umin, umax = float(u.min()), float(u.max())
    crits = critical_points(flux, umin, umax) if umax > umin else np.empty(0)
    scan = np.linspace(umin, umax, 1025) if umax > umin else np.array([umin])
    smax = float(np.max(np.abs(flux.deriv(scan))))
    dt_cfl = cfl * dx / max(smax, 1e-12)
    t = 0.0
    while t < t_final - 1e-14:
        dt = min(dt_cfl, t_final - t)
        g = godunov_flux(flux, u, np.roll(u, -1), crits)
        u = u - (dt / dx) * (g - np.roll(g, 1))
        t += dt
    return Field1D(u0.grid, u, t_final)


# ---------------------------------------------------------------------------
# self-similar Riemann constructions
# ---------------------------------------------------------------------------

def riemann_convex(prob: RiemannProblem, xi) -> np.ndarray:
    """Riemann solution for strictly convex flux: single shock or rarefaction."""
    a, b = prob.u_left, prob.u_right
    f = prob.flux
    lo, hi = min(a, b), max(a, b)
    if hi > lo:
        v = np.linspace(lo, hi, 512)
        if np.any(np.diff(f.deriv(v)) <= 0):
            raise ValueError("flux is not convex on the state interval")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if a == b:
        return np.full(xi.shape, a)
    if a > b:
        s = (float(f(a)) - float(f(b))) / (a - b)
        return np.where(xi < s, a, b)
    sl, sr = float(f.deriv(a)), float(f.deriv(b))
    out = np.empty(xi.shape)
    for i, z in enumerate(xi):
        if z <= sl:
            out[i] = a
        elif z >= sr:
            out[i] = b
        else:
            out[i] = float(brentq(lambda u: float(f.deriv(u)) - z, a, b, xtol=1e-14))
    return out


def lower_convex_envelope(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Values of the lower convex envelope of the sampled graph."""
    idx = _hull_indices(x, y, lower=True)
    return np.interp(x, x[idx], y[idx])


def _hull_indices(x: np.ndarray, y: np.ndarray, lower: bool) -> list[int]:
    idx: list[int] = []
    for i in range(x.size):
        while len(idx) >= 2:
            i1, i2 = idx[-2], idx[-1]
            s12 = (y[i2] - y[i1]) / (x[i2] - x[i1])
            s2n = (y[i] - y[i2]) / (x[i] - x[i2])
            if (s12 >= s2n) if lower else (s12 <= s2n):
                idx.pop()
            else:
                break
        idx.append(i)
    return idx


def _refine_tangency(f: FluxModel, u_fixed: float, guess: float, h: float,
                     lo: float, hi: float) -> float:
    """Solve f'(u) (u - u_fixed) - (f(u) - f(u_fixed)) = 0 near the guess."""

    def phi(u):
        return float(f.deriv(u)) * (u - u_fixed) - (float(f(u)) - float(f(u_fixed)))

    a = max(lo, guess - 2.0 * h)
    b = min(hi, guess + 2.0 * h)
    pa, pb = phi(a), phi(b)
    if pa == 0.0:
        return a
    if pb == 0.0:
        return b
    if pa * pb > 0:
        return guess
    return float(brentq(phi, a, b, xtol=1e-15))


def oleinik_fan(prob: RiemannProblem, n_state: int = STATE_GRID) -> WaveFan:
    """Riemann solution via the flux envelope on the state interval.

    For u_left < u_right the lower convex envelope of f on the interval,
    for u_left > u_right the upper concave envelope; chord segments become
    shocks, graph segments become rarefactions, and chord-graph contact
    points are sharpened by bisection on the tangency condition.
    """
    a, b = prob.u_left, prob.u_right
    f = prob.flux
    fan = WaveFan(a, b, f)
    if a == b:
        return fan
    rising = a < b
    lo, hi = (a, b) if rising else (b, a)
    v = np.linspace(lo, hi, n_state)
    h = v[1] - v[0]
    y = np.asarray(f(v), dtype=float)
    idx = _hull_indices(v, y, lower=rising)

    # group hull vertices into graph runs (consecutive indices) and chords
    segments: list[tuple[str, float, float]] = []
    run_start = idx[0]
    for k in range(len(idx) - 1):
        i, j = idx[k], idx[k + 1]
        if j == i + 1:
            continue
        if i > run_start:
            segments.append(("graph", v[run_start], v[i]))
        segments.append(("chord", v[i], v[j]))
        run_start = j
    if idx[-1] > run_start:
        segments.append(("graph", v[run_start], v[idx[-1]]))

    # sharpen chord endpoints that touch the graph tangentially
    refined: list[tuple[str, float, float]] = []
    for k, (kind, p, q) in enumerate(segments):
        if kind != "chord":
            refined.append((kind, p, q))
            continue
        p_free = p not in (lo, hi)
        q_free = q not in (lo, hi)
        for _ in range(64 if (p_free and q_free) else 1):
            p_old, q_old = p, q
            if p_free:
                p = _refine_tangency(f, q, p, h, lo, hi)
            if q_free:
                q = _refine_tangency(f, p, q, h, lo, hi)
            if abs(p - p_old) < 1e-15 and abs(q - q_old) < 1e-15:
                break
        refined.append(("chord", p, q))
    # propagate sharpened contacts into the neighbouring graph runs
    for k, (kind, p, q) in enumerate(refined):
        if kind == "graph":
            if k > 0 and refined[k - 1][0] == "chord":
                p = refined[k - 1][2]
            if k + 1 < len(refined) and refined[k + 1][0] == "chord":
                q = refined[k + 1][1]
            refined[k] = (kind, p, q)

    # traverse from u_left to u_right (descending for falling jumps)
    ordered = refined if rising else [(kind, q, p) for kind, p, q in reversed(refined)]
    min_width = 4.0 * h
    for kind, p, q in ordered:
        if kind == "chord":
            s = (float(f(q)) - float(f(p))) / (q - p)
            fan.waves.append(Wave("shock", p, q, s, s))
        else:
            if abs(q - p) < min_width:
                continue
            fan.waves.append(Wave("rarefaction", p, q,
                                  float(f.deriv(p)), float(f.deriv(q))))
    fan.validate()
    return fan
