"""Flux models and entropy/entropy-flux pairs.

A flux model bundles f, f' and a Lipschitz bound valid on a declared
working range.  Polynomial fluxes are not globally Lipschitz, so each
model carries a symmetric range [-B, B] and can optionally be saturated:
outside the range f continues linearly with slope f'(+-B), which keeps f
globally C^1 with the same Lipschitz constant.

Entropy pairs (U, F) satisfy F' = U' f'.  F (and, for the built-in
energy-like entropy, U itself) is tabulated by a cumulative 4th-order
composite quadrature anchored at 0 and interpolated with a cubic spline.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline


class FluxError(ValueError):
    """Invalid flux construction or use outside the declared contract."""


DEFAULT_QUADRATURE_NODES = 4097


# ---------------------------------------------------------------------------
# raw flux families (module level so models stay picklable)
# ---------------------------------------------------------------------------

def _linear_f(a, u):
    return a * np.asarray(u, dtype=float)


def _linear_df(a, u):
    return np.full_like(np.asarray(u, dtype=float), a)


def _linear_d2f(_a, u):
    return np.zeros_like(np.asarray(u, dtype=float))


def _burgers_f(u):
    u = np.asarray(u, dtype=float)
    return 0.5 * u * u


def _burgers_df(u):
    return np.asarray(u, dtype=float)


def _burgers_d2f(u):
    return np.ones_like(np.asarray(u, dtype=float))


def _cubic_f(u):
    u = np.asarray(u, dtype=float)
    return u * u * u


def _cubic_df(u):
    u = np.asarray(u, dtype=float)
    return 3.0 * u * u


def _cubic_d2f(u):
    return 6.0 * np.asarray(u, dtype=float)


def _odd_power_f(p, u):
    u = np.asarray(u, dtype=float)
    return u ** (2 * p + 1) / (2 * p + 1)


def _odd_power_df(p, u):
    u = np.asarray(u, dtype=float)
    return u ** (2 * p)


def _odd_power_d2f(p, u):
    u = np.asarray(u, dtype=float)
    return 2 * p * u ** (2 * p - 1)


def _table_f(spline, u):
    return spline(np.asarray(u, dtype=float))


def _table_df(spline_d, u):
    return spline_d(np.asarray(u, dtype=float))


@dataclass(frozen=True)
class FluxModel:
    """Scalar flux f with derivative and Lipschitz bound on a working range.

    ``saturated`` models replace f outside [lo, hi] by its tangent line at
    the nearest endpoint, so |f'| <= lipschitz_bound holds globally.
    Unsaturated polynomial models are only valid inside the range;
    solvers abort when a solution escapes it.
    """

    name: str
    f_raw: Callable
    df_raw: Callable
    d2f_raw: Callable
    lipschitz_bound: float
    working_range: tuple[float, float]
    saturated: bool = False
    params: tuple = ()

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if not self.saturated:
            return self.f_raw(u)
        lo, hi = self.working_range
        uc = np.clip(u, lo, hi)
        # tangent-line continuation keeps f globally C^1
        return self.f_raw(uc) + self.df_raw(uc) * (u - uc)

    def deriv(self, u):
        u = np.asarray(u, dtype=float)
        if not self.saturated:
            return self.df_raw(u)
        lo, hi = self.working_range
        return self.df_raw(np.clip(u, lo, hi))

    def second_deriv(self, u):
        u = np.asarray(u, dtype=float)
        if not self.saturated:
            return self.d2f_raw(u)
        lo, hi = self.working_range
        out = np.asarray(self.d2f_raw(np.clip(u, lo, hi)), dtype=float).copy()
        outside = (u < lo) | (u > hi)
        if np.ndim(out) == 0:
            return 0.0 if outside else float(out)
        out[outside] = 0.0
        return out

    def contains(self, u) -> bool:
        lo, hi = self.working_range
        u = np.asarray(u)
        return bool(np.all(u >= lo) and np.all(u <= hi))


def make_flux(name: str, *, a: float = 1.0, p: int = 1, radius: float = 2.0,
              saturated: bool = False, table: tuple | None = None) -> FluxModel:
    """Build one of the named flux models.

    Parameters
    ----------
    name : one of ``linear``, ``burgers``, ``odd_power``, ``cubic``,
        ``custom-table``.
    a : slope of the linear flux.
    p : exponent index of ``odd_power`` (flux u^(2p+1)/(2p+1)), p >= 1.
    radius : half-width B of the working range [-B, B].
    saturated : continue f linearly outside the working range.
    table : (u, f) arrays for ``custom-table``; u strictly increasing.
    """
    if radius <= 0:
        raise FluxError(f"working-range radius must be positive, got {radius}")
    rng = (-float(radius), float(radius))
    if name == "linear":
        return FluxModel("linear", functools.partial(_linear_f, a),
                         functools.partial(_linear_df, a),
                         functools.partial(_linear_d2f, a),
                         abs(a), rng, saturated=False, params=(a,))
    if name == "burgers":
        return FluxModel("burgers", _burgers_f, _burgers_df, _burgers_d2f,
                         float(radius), rng, saturated=saturated)
    if name == "cubic":
        return FluxModel("cubic", _cubic_f, _cubic_df, _cubic_d2f,
                         3.0 * radius ** 2, rng, saturated=saturated)
    if name == "odd_power":
        if p < 1:
            raise FluxError(f"odd_power needs p >= 1, got {p}")
        return FluxModel(f"odd_power({p})",
                         functools.partial(_odd_power_f, p),
                         functools.partial(_odd_power_df, p),
                         functools.partial(_odd_power_d2f, p),
                         float(radius) ** (2 * p), rng,
                         saturated=saturated, params=(p,))
    if name == "custom-table":
        if table is None:
            raise FluxError("custom-table flux needs a (u, f) table")
        u_tab = np.asarray(table[0], dtype=float)
        f_tab = np.asarray(table[1], dtype=float)
        if u_tab.ndim != 1 or u_tab.size < 4 or np.any(np.diff(u_tab) <= 0):
            raise FluxError("flux table needs >= 4 strictly increasing u values")
        spline = CubicSpline(u_tab, f_tab)
        d1 = spline.derivative(1)
        d2 = spline.derivative(2)
        sample = np.linspace(u_tab[0], u_tab[-1], 10001)
        bound = float(np.max(np.abs(d1(sample))))
        return FluxModel("custom-table",
                         functools.partial(_table_f, spline),
                         functools.partial(_table_df, d1),
                         functools.partial(_table_df, d2),
                         bound, (float(u_tab[0]), float(u_tab[-1])),
                         saturated=saturated)
    raise FluxError(f"unknown flux name {name!r}")


def default_radius(initial_values) -> float:
    """Working-range half-width used by the solvers: 2 max|u0| + 1."""
    return 2.0 * float(np.max(np.abs(initial_values))) + 1.0


# ---------------------------------------------------------------------------
# entropies
# ---------------------------------------------------------------------------

def _poly_eval(coeffs, u):
    return np.polyval(coeffs, np.asarray(u, dtype=float))


@dataclass(frozen=True)
class EntropySpec:
    """U with its first three derivatives; ``convex`` means U'' >= 0."""

    U: Callable
    dU: Callable
    d2U: Callable
    d3U: Callable
    convex: bool
    name: str = "entropy"


def quadratic_entropy() -> EntropySpec:
    """U(u) = u^2, the energy entropy."""
    return EntropySpec(functools.partial(_poly_eval, (1.0, 0.0, 0.0)),
                       functools.partial(_poly_eval, (2.0, 0.0)),
                       functools.partial(_poly_eval, (2.0,)),
                       functools.partial(_poly_eval, (0.0,)),
                       convex=True, name="quadratic")


def _grid_through_zero(lo: float, hi: float, n_nodes: int) -> np.ndarray:
    """Quadrature grid over [lo, hi] guaranteed to contain 0.0 exactly."""
    if not lo <= 0.0 <= hi:
        raise FluxError(f"entropy quadrature range [{lo}, {hi}] must contain 0")
    if lo == 0.0 or hi == 0.0:
        return np.linspace(lo, hi, n_nodes)
    n_lo = max(2, int(round(n_nodes * (-lo) / (hi - lo))))
    n_lo = min(n_lo, n_nodes - 1)
    left = np.linspace(lo, 0.0, n_lo)
    right = np.linspace(0.0, hi, n_nodes - n_lo + 1)
    return np.concatenate([left, right[1:]])


def _cumulative_quadrature(g: Callable, x: np.ndarray) -> np.ndarray:
    """Antiderivative values of g at the nodes x, zero at x[0].

    Composite Simpson per interval (node, midpoint, node): 4th order.
    """
    mid = 0.5 * (x[:-1] + x[1:])
    h = np.diff(x)
    seg = (h / 6.0) * (g(x[:-1]) + 4.0 * g(mid) + g(x[1:]))
    out = np.empty(x.size)
    out[0] = 0.0
    np.cumsum(seg, out=out[1:])
    return out


def _tabulated_antiderivative(g: Callable, lo: float, hi: float,
                              n_nodes: int) -> CubicSpline:
    x = _grid_through_zero(lo, hi, n_nodes)
    vals = _cumulative_quadrature(g, x)
    i0 = int(np.flatnonzero(x == 0.0)[0])
    vals = vals - vals[i0]
    return CubicSpline(x, vals)


def _spline_call(spline, u):
    return spline(np.asarray(u, dtype=float))


@dataclass(frozen=True)
class EntropyPair:
    """Entropy U together with its flux F, F' = U' f', F(0) = 0."""

    spec: EntropySpec
    flux: FluxModel
    F: Callable
    quadrature_nodes: int = DEFAULT_QUADRATURE_NODES


def _check_spec_consistency(spec: EntropySpec, lo: float, hi: float) -> None:
    u = np.linspace(lo, hi, 513)
    h = 1e-5 * max(1.0, hi - lo)
    scale = max(1.0, float(np.max(np.abs(spec.dU(u)))))
    fd1 = (spec.U(u + h) - spec.U(u - h)) / (2 * h)
    if np.max(np.abs(fd1 - spec.dU(u))) > 1e-6 * scale:
        raise FluxError("entropy spec inconsistent: U' does not match U")
    scale2 = max(1.0, float(np.max(np.abs(spec.d2U(u)))))
    fd2 = (spec.dU(u + h) - spec.dU(u - h)) / (2 * h)
    if np.max(np.abs(fd2 - spec.d2U(u))) > 1e-6 * scale2:
        raise FluxError("entropy spec inconsistent: U'' does not match U'")


def make_entropy_pair(spec: EntropySpec, flux: FluxModel,
                      n_nodes: int = DEFAULT_QUADRATURE_NODES) -> EntropyPair:
    """Tabulate F with F' = U' f' and F(0) = 0 on the flux working range."""
    lo, hi = flux.working_range
    _check_spec_consistency(spec, lo, hi)

    def integrand(u):
        return spec.dU(u) * flux.deriv(u)

    F = _tabulated_antiderivative(integrand, lo, hi, n_nodes)
    return EntropyPair(spec, flux, functools.partial(_spline_call, F), n_nodes)


def _neg2_shifted_flux(flux, f0, u):
    return -2.0 * (flux(u) - f0)


def _neg2_deriv(flux, u):
    return -2.0 * flux.deriv(u)


def _neg2_second(flux, u):
    return -2.0 * flux.second_deriv(u)


def special_entropy(flux: FluxModel,
                    n_nodes: int = DEFAULT_QUADRATURE_NODES) -> EntropyPair:
    """Entropy adapted to the flux: U' = -2 (f - f(0)), so U'' = -2 f'.

    For this choice the cubic-gradient terms of the entropy and gradient
    balances cancel against each other, which is what makes the dispersive
    gradient bound close.  U itself is tabulated by quadrature; U', U'',
    U''' are stored analytically.  |U| <= lipschitz_bound * u^2 on the
    working range.
    """
    lo, hi = flux.working_range
    f0 = float(flux(0.0))
    dU = functools.partial(_neg2_shifted_flux, flux, f0)
    U = _tabulated_antiderivative(dU, lo, hi, n_nodes)
    sample = np.linspace(lo, hi, 4097)
    convex = bool(np.all(flux.deriv(sample) <= 0.0))
    spec = EntropySpec(functools.partial(_spline_call, U), dU,
                       functools.partial(_neg2_deriv, flux),
                       functools.partial(_neg2_second, flux),
                       convex=convex, name="flux-adapted")

    def integrand(u):
        return dU(u) * flux.deriv(u)

    F = _tabulated_antiderivative(integrand, lo, hi, n_nodes)
    return EntropyPair(spec, flux, functools.partial(_spline_call, F), n_nodes)
