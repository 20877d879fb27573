"""Command-line entry point.

One TOML configuration file per invocation; subcommands pick the mode.
All outputs land in the chosen directory together with a manifest
(configuration hash, output hashes, versions) so repeated runs can be
compared byte for byte.  Exit codes: 0 success, 1 a verification check
failed beyond tolerance, 2 runtime abort or invalid configuration.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli

from . import reporting
from .estimates import (BumpTestFunction, balance_residuals, gamma_pairings,
                        gamma_rate_fit, verify_apriori)
from .flux import (FluxError, make_entropy_pair, make_flux, quadratic_entropy,
                   special_entropy)
from .hyperbolic import RiemannProblem, oleinik_fan
from .solver2d import (FluxVector2D, Grid2D, sample_initial2d, solve2d,
                       verify_apriori_2d)
from .spectral1d import (Grid1D, Profile, Regularization, SolverError,
                         TimeController, sample_initial, solve)
from .sweep import SweepPlan, classify, grid_size_rule, run_sweep

MODES = ("simulate", "sweep", "verify-estimates", "riemann", "gamma")
TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Rejected configuration: syntax, unknown key, or failed constraint."""


@dataclass
class RunConfig:
    mode: str
    values: dict
    text: str

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------

def _reject_unknown(data: dict, allowed: set[str], context: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {context}: {', '.join(sorted(unknown))}")


def _need(data: dict, key: str, kind, context: str):
    if key not in data:
        raise ConfigError(f"missing required key {key!r} in {context}")
    return _typed(data, key, kind, context)


def _typed(data: dict, key: str, kind, context: str, default=None):
    if key not in data:
        return default
    val = data[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        raise ConfigError(f"{context}.{key} must be {kind.__name__}, got {val!r}")
    return val


_FLUX_PARAM_KEYS = {"a", "p", "radius", "saturated", "table"}


def _build_flux(values: dict, prefix: str = "flux"):
    name = values[prefix]
    params = dict(values.get(f"{prefix}_params", {}))
    table_path = params.pop("table", None)
    if table_path is not None:
        data = np.loadtxt(table_path, delimiter=",", skiprows=1)
        params["table"] = (data[:, 0], data[:, 1])
    try:
        return make_flux(name, **params)
    except FluxError as exc:
        raise ConfigError(f"{prefix}: {exc}") from exc


def _profile_from_config(values: dict) -> Profile:
    name = values["profile"]
    p = values.get("profile_params", {})
    if name == "sine":
        return Profile.sine(p.get("amplitude", 1.0), p.get("modes", 1))
    if name == "constant":
        return Profile.constant(p.get("value", 0.0))
    if name == "smoothed-riemann":
        for key in ("u_left", "u_right", "width"):
            if key not in p:
                raise ConfigError(f"profile_params needs {key!r} for smoothed-riemann")
        return Profile.smoothed_riemann(p["u_left"], p["u_right"], p["width"])
    if name == "gaussian":
        return Profile.gaussian(p.get("amplitude", 1.0), p.get("sigma"))
    if name == "custom-table":
        path = p.get("path")
        if path is None:
            raise ConfigError("profile_params needs 'path' for custom-table")
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        return Profile.from_table(data[:, 0], data[:, 1])
    raise ConfigError(f"unknown profile {name!r}")


def _check_positive(values: dict, key: str, strict=True):
    if key in values:
        v = values[key]
        if strict and not v > 0:
            raise ConfigError(f"constraint violation: {key} must be > 0, got {v}")


_COMMON_SOLVE_KEYS = {
    "flux", "flux_params", "x_min", "x_max", "n", "profile", "profile_params",
    "t_final", "snapshots", "cfl", "dt_max", "out",
}
_MODE_KEYS = {
    "simulate": _COMMON_SOLVE_KEYS | {
        "eps", "delta", "dimension", "flux_y", "flux_y_params", "y_min",
        "y_max", "ny", "binary_dump"},
    "verify-estimates": _COMMON_SOLVE_KEYS | {
        "eps", "delta", "entropy", "dimension", "flux_y", "flux_y_params",
        "y_min", "y_max", "ny"},
    "sweep": {
        "flux", "flux_params", "x_min", "x_max", "profile", "profile_params",
        "eps_list", "delta", "t_eval", "window", "qs", "reference", "entropy",
        "snapshots", "cfl", "n_max", "workers", "out"},
    "riemann": {"flux", "flux_params", "u_left", "u_right", "samples",
                "xi_margin", "out"},
    "gamma": {
        "flux", "flux_params", "x_min", "x_max", "profile", "profile_params",
        "eps_list", "delta", "t_final", "theta", "entropy", "snapshots",
        "cfl", "n_max", "out"},
}


def parse_config(text: str, mode: str) -> RunConfig:
    """Parse and validate a TOML configuration for the given mode.

    Unknown keys are rejected; numeric constraints are checked up front
    and reported with the name of the violated module precondition.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc

    _reject_unknown(data, _MODE_KEYS[mode], f"{mode} config")
    if "flux" not in data:
        raise ConfigError(f"missing required key 'flux' in {mode} config")
    if "flux_params" in data:
        _reject_unknown(data["flux_params"], _FLUX_PARAM_KEYS, "flux_params")
        table = data["flux_params"].get("table")
        if table is not None and not Path(table).exists():
            raise ConfigError(f"flux table file does not exist: {table}")
    if data.get("profile") == "custom-table":
        path = data.get("profile_params", {}).get("path", "")
        if not Path(path).exists():
            raise ConfigError(f"profile table file does not exist: {path}")

    if mode in ("simulate", "verify-estimates"):
        eps = _need(data, "eps", float, mode)
        if not eps > 0:
            raise ConfigError(
                f"constraint violation: Regularization.eps must be > 0, got {eps}")
        _typed(data, "delta", float, mode, 0.0)
        n = data.get("n", 512)
        if n < 16 or n & (n - 1):
            raise ConfigError(
                f"constraint violation: Grid1D.n must be a power of two >= 16, got {n}")
        cfl = data.get("cfl", 0.4)
        if not 0 < cfl <= 1:
            raise ConfigError(
                f"constraint violation: TimeController.cfl must be in (0, 1], got {cfl}")
        _check_positive(data, "t_final")
        if data.get("dimension", 1) not in (1, 2):
            raise ConfigError("dimension must be 1 or 2")
    elif mode == "sweep":
        eps_list = _need(data, "eps_list", list, mode)
        if any(not isinstance(e, (int, float)) or e <= 0 for e in eps_list) \
                or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
            raise ConfigError("constraint violation: SweepPlan.eps_list must be "
                              "positive and strictly decreasing")
        delta = _need(data, "delta", dict, mode)
        _reject_unknown(delta, {"K", "p"}, "delta relation")
        if delta.get("K", 0.0) < 0 or delta.get("p", 1.0) <= 0:
            raise ConfigError("constraint violation: SweepPlan needs K >= 0 and p > 0")
        _need(data, "window", list, mode)
        _need(data, "t_eval", float, mode)
    elif mode == "riemann":
        for key in ("u_left", "u_right"):
            _need(data, key, float, mode)
    elif mode == "gamma":
        _need(data, "eps_list", list, mode)
        _need(data, "delta", dict, mode)
        _need(data, "t_final", float, mode)
        if "theta" in data:
            _reject_unknown(data["theta"], {"x_center", "x_halfwidth",
                                            "t_center", "t_halfwidth"}, "theta")
    return RunConfig(mode, data, text)


# ---------------------------------------------------------------------------
# mode runners
# ---------------------------------------------------------------------------

def _controller(values: dict, t_key: str = "t_final") -> TimeController:
    return TimeController.uniform(values.get(t_key, 1.0),
                                  values.get("snapshots", 33),
                                  cfl=values.get("cfl", 0.4),
                                  dt_max=values.get("dt_max", np.inf))


def _run_simulate(cfg: RunConfig, out: Path) -> tuple[int, list[Path], dict]:
    t0 = time.perf_counter()
    reg = Regularization(cfg["eps"], cfg.get("delta", 0.0))
    outputs: list[Path] = []
    meta: dict = {"mode": "simulate", "eps": reg.eps, "delta": reg.delta,
                  "t_final": cfg.get("t_final", 1.0),
                  "cfl": cfg.get("cfl", 0.4),
                  "dt_max": cfg.get("dt_max", float("inf")),
                  "snapshots": cfg.get("snapshots", 33)}
    if cfg.get("dimension", 1) == 2:
        grid = Grid2D(cfg.get("x_min", 0.0), cfg.get("x_max", TWO_PI),
                      cfg.get("n", 128),
                      cfg.get("y_min", 0.0), cfg.get("y_max", TWO_PI),
                      cfg.get("ny", cfg.get("n", 128)))
        fluxes = FluxVector2D(_build_flux(cfg.values),
                              _build_flux(cfg.values, "flux_y")
                              if "flux_y" in cfg.values else _build_flux(cfg.values))
        params = cfg.get("profile_params", {})
        u0 = sample_initial2d(grid, cfg.get("profile", "sine2d"), **params)
        traj = solve2d(u0, reg, fluxes, _controller(cfg.values))
        x, y = grid.nodes()
        for i, t in enumerate(traj.times):
            outputs.append(reporting.write_field2d_csv(
                out / f"snap2d_{i:04d}.csv", x, y, traj.states[i]))
            if cfg.get("binary_dump", False):
                outputs.append(reporting.write_field2d_binary(
                    out / f"snap2d_{i:04d}.bin", traj.states[i],
                    (grid.x_min, grid.x_max, grid.y_min, grid.y_max), float(t)))
        meta.update(grid=f"{grid.nx}x{grid.ny}", flux=fluxes.fx.name,
                    flux_y=fluxes.fy.name)
    else:
        grid = Grid1D(cfg.get("x_min", 0.0), cfg.get("x_max", TWO_PI),
                      cfg.get("n", 512))
        flux = _build_flux(cfg.values)
        u0 = sample_initial(grid, _profile_from_config(cfg.values))
        traj = solve(u0, reg, flux, _controller(cfg.values))
        x = grid.nodes()
        for i, t in enumerate(traj.times):
            outputs.append(reporting.write_snapshot_csv(
                out / f"snap_{i:04d}.csv", x, traj.states[i]))
        outputs.append(reporting.write_csv(
            out / "snapshots.csv", ["index", "time", "file"],
            [(i, float(t), f"snap_{i:04d}.csv") for i, t in enumerate(traj.times)]))
        meta.update(grid=str(grid.n), flux=flux.name, steps=len(traj.dt_history))
    meta["wall_time_s"] = time.perf_counter() - t0
    return 0, outputs, meta


def _run_verify(cfg: RunConfig, out: Path) -> tuple[int, list[Path], dict]:
    t0 = time.perf_counter()
    reg = Regularization(cfg["eps"], cfg.get("delta", 0.0))
    outputs: list[Path] = []
    if cfg.get("dimension", 1) == 2:
        grid = Grid2D(cfg.get("x_min", 0.0), cfg.get("x_max", TWO_PI),
                      cfg.get("n", 128),
                      cfg.get("y_min", 0.0), cfg.get("y_max", TWO_PI),
                      cfg.get("ny", cfg.get("n", 128)))
        fluxes = FluxVector2D(_build_flux(cfg.values),
                              _build_flux(cfg.values, "flux_y")
                              if "flux_y" in cfg.values else _build_flux(cfg.values))
        u0 = sample_initial2d(grid, cfg.get("profile", "sine2d"),
                              **cfg.get("profile_params", {}))
        traj = solve2d(u0, reg, fluxes, _controller(cfg.values))
        report = verify_apriori_2d(traj, reg, fluxes, u0)
        rows = report.rows()
    else:
        grid = Grid1D(cfg.get("x_min", 0.0), cfg.get("x_max", TWO_PI),
                      cfg.get("n", 512))
        flux = _build_flux(cfg.values)
        u0 = sample_initial(grid, _profile_from_config(cfg.values))
        traj = solve(u0, reg, flux, _controller(cfg.values))
        report = verify_apriori(traj, reg, flux, traj.initial)
        rows = report.rows()
        pair = make_entropy_pair(quadratic_entropy(), flux) \
            if cfg.get("entropy", "special") == "quadratic" else special_entropy(flux)
        res = balance_residuals(traj, reg, flux, pair)
        rel = res.relative()
        outputs.append(reporting.write_csv(
            out / "residuals.csv",
            ["label", "residual", "normalization", "relative"],
            [(k, r, res.normalization[k], rel[k]) for k, r in
             (("entropy", res.entropy_residual), ("energy", res.energy_residual),
              ("gradient", res.gradient_residual))]))
    outputs.append(reporting.write_csv(
        out / "estimates.csv", ["label", "lhs", "rhs", "slack", "pass"], rows))
    meta = {"mode": "verify-estimates", "eps": reg.eps, "delta": reg.delta,
            "all_pass": report.all_pass,
            "wall_time_s": time.perf_counter() - t0}
    return (0 if report.all_pass else 1), outputs, meta


def _sweep_plan_from_config(cfg: RunConfig) -> SweepPlan:
    delta = cfg["delta"]
    return SweepPlan(
        eps_list=tuple(float(e) for e in cfg["eps_list"]),
        K=float(delta.get("K", 0.0)), p=float(delta.get("p", 2.0)),
        flux_name=cfg["flux"],
        flux_kwargs=dict(cfg.get("flux_params", {})),
        profile=_profile_from_config(cfg.values),
        x_min=cfg.get("x_min", -4.0), x_max=cfg.get("x_max", 4.0),
        t_eval=cfg["t_eval"],
        window=tuple(cfg["window"]),
        qs=tuple(cfg.get("qs", [1.0])),
        reference=cfg.get("reference", "fan"),
        entropy=cfg.get("entropy", "quadratic"),
        snapshots=cfg.get("snapshots", 65),
        cfl=cfg.get("cfl", 0.4),
        n_max=cfg.get("n_max", 2048),
    )


def _run_sweep_mode(cfg: RunConfig, out: Path, workers: int) -> tuple[int, list[Path], dict]:
    t0 = time.perf_counter()
    try:
        plan = _sweep_plan_from_config(cfg)
    except ValueError as exc:
        raise ConfigError(f"constraint violation: {exc}") from exc
    result = run_sweep(plan, workers=workers)

    rows = []
    for rec in result.records:
        for q in plan.qs:
            rows.append((rec.eps, rec.delta, rec.n, q,
                         rec.distances.get(q, float("nan")),
                         rec.cauchy_increment, rec.min_slack,
                         rec.estimates_pass, rec.failed))
    outputs = [reporting.write_csv(
        out / "sweep.csv",
        ["eps", "delta", "n", "q", "distance", "cauchy_increment",
         "min_slack", "estimates_pass", "failed"], rows)]

    gamma_rows = []
    for rec in result.records:
        for i in (1, 2, 3, 4):
            gamma_rows.append(("gamma", i, rec.eps, rec.delta,
                               rec.gamma_pairings.get(i, float("nan")),
                               rec.gamma_l1.get(i, float("nan"))))
    outputs.append(reporting.write_csv(
        out / "gamma.csv", ["gamma", "i", "eps", "delta", "pairing", "l1norm"],
        gamma_rows))

    verdict = None
    if len(result.succeeded) >= 3:
        verdict = classify(result)
        lines = {"classification": verdict.kind}
        for k, v in verdict.evidence.items():
            if isinstance(v, list):
                v = " ".join(reporting.fmt(x) for x in v)
            lines[k] = v
        outputs.append(reporting.write_metadata(out / "classification.txt", lines))

    any_failed = any(r.failed for r in result.records)
    all_failed = all(r.failed for r in result.records)
    estimates_ok = all(r.estimates_pass for r in result.succeeded)
    meta = {"mode": "sweep", "records": len(result.records),
            "failed_records": sum(r.failed for r in result.records),
            "classification": verdict.kind if verdict else "n/a",
            "wall_time_s": time.perf_counter() - t0}
    code = 2 if all_failed else (1 if (not estimates_ok or any_failed) else 0)
    return code, outputs, meta


def _run_riemann(cfg: RunConfig, out: Path) -> tuple[int, list[Path], dict]:
    t0 = time.perf_counter()
    flux = _build_flux(cfg.values)
    try:
        prob = RiemannProblem(cfg["u_left"], cfg["u_right"], flux)
    except ValueError as exc:
        raise ConfigError(f"constraint violation: {exc}") from exc
    fan = oleinik_fan(prob)
    lines = [f"riemann fan: u_left = {reporting.fmt(prob.u_left)}, "
             f"u_right = {reporting.fmt(prob.u_right)}, flux = {flux.name}"]
    for w in fan.waves:
        if w.kind == "shock":
            lines.append(f"shock: {reporting.fmt(w.u_left)} -> "
                         f"{reporting.fmt(w.u_right)} at speed {reporting.fmt(w.speed)}")
        else:
            lines.append(f"rarefaction: {reporting.fmt(w.u_left)} -> "
                         f"{reporting.fmt(w.u_right)} over speeds "
                         f"[{reporting.fmt(w.speed_left)}, {reporting.fmt(w.speed_right)}]")
    fan_txt = out / "fan.txt"
    fan_txt.write_text("\n".join(lines) + "\n")

    margin = cfg.get("xi_margin", 0.5)
    speeds = [s for w in fan.waves for s in (w.speed_left, w.speed_right)] or [0.0]
    xi = np.linspace(min(speeds) - margin, max(speeds) + margin,
                     cfg.get("samples", 401))
    samples = reporting.write_csv(out / "fan_samples.csv", ["xi", "u"],
                                  zip(xi, fan.evaluate(xi)))
    meta = {"mode": "riemann", "waves": len(fan.waves),
            "wall_time_s": time.perf_counter() - t0}
    return 0, [fan_txt, samples], meta


def _run_gamma(cfg: RunConfig, out: Path) -> tuple[int, list[Path], dict]:
    t0 = time.perf_counter()
    delta_rel = cfg["delta"]
    K, p = float(delta_rel.get("K", 0.0)), float(delta_rel.get("p", 2.0))
    x_min, x_max = cfg.get("x_min", -4.0), cfg.get("x_max", 4.0)
    t_final = cfg["t_final"]
    th = cfg.get("theta", {})
    theta = BumpTestFunction(
        th.get("x_center", 0.5 * (x_min + x_max)),
        th.get("x_halfwidth", 0.25 * (x_max - x_min)),
        th.get("t_center", 0.5 * t_final),
        th.get("t_halfwidth", 0.4 * t_final))
    profile = _profile_from_config(cfg.values)
    rows, eps_used, pair_vals = [], [], {i: [] for i in (1, 2, 3, 4)}
    for eps in cfg["eps_list"]:
        delta = K * eps ** p
        n = grid_size_rule(x_max - x_min, eps, delta, cfg.get("n_max", 2048))
        grid = Grid1D(x_min, x_max, n)
        if profile.name == "smoothed-riemann":
            u_l, u_r, w = profile.params
            run_profile = Profile.smoothed_riemann(u_l, u_r, max(w, 4 * grid.dx))
        else:
            run_profile = profile
        u0 = sample_initial(grid, run_profile)
        flux = _build_flux(cfg.values)
        reg = Regularization(eps, delta)
        traj = solve(u0, reg, flux, _controller(cfg.values))
        pair = make_entropy_pair(quadratic_entropy(), flux) \
            if cfg.get("entropy", "quadratic") == "quadratic" else special_entropy(flux)
        rep = gamma_pairings(traj, reg, pair, theta)
        eps_used.append(eps)
        for i in (1, 2, 3, 4):
            rows.append(("gamma", i, eps, delta, rep.pairings[i], rep.l1_norms[i]))
            pair_vals[i].append(rep.pairings[i])
    outputs = [reporting.write_csv(
        out / "gamma.csv", ["gamma", "i", "eps", "delta", "pairing", "l1norm"], rows)]

    rate_rows = []
    for i in (1, 2, 3, 4):
        try:
            fit = gamma_rate_fit(eps_used, pair_vals[i])
            rate_rows.append((i, fit.slope, fit.residual, fit.defined))
        except ValueError:
            rate_rows.append((i, float("nan"), float("nan"), False))
    outputs.append(reporting.write_csv(
        out / "rates.csv", ["i", "slope", "residual", "defined"], rate_rows))
    meta = {"mode": "gamma", "runs": len(eps_used),
            "wall_time_s": time.perf_counter() - t0}
    return 0, outputs, meta


def run(config: RunConfig, out_dir: Path, workers: int = 1) -> int:
    """Execute a parsed configuration; write outputs and the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if config.mode == "simulate":
            code, outputs, meta = _run_simulate(config, out)
        elif config.mode == "verify-estimates":
            code, outputs, meta = _run_verify(config, out)
        elif config.mode == "sweep":
            code, outputs, meta = _run_sweep_mode(config, out, workers)
        elif config.mode == "riemann":
            code, outputs, meta = _run_riemann(config, out)
        elif config.mode == "gamma":
            code, outputs, meta = _run_gamma(config, out)
        else:  # pragma: no cover - parse_config rejects unknown modes
            raise ConfigError(f"unknown mode {config.mode!r}")
    except SolverError as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return 2
    metadata = reporting.write_metadata(out / "run_metadata.txt", meta)
    reporting.write_manifest(out, config.text, outputs, volatile=[metadata])
    return code


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ddlab",
        description="diffusive-dispersive conservation-law laboratory")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        sp = sub.add_parser(mode)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", type=Path, default=None)
        sp.add_argument("--workers", type=int, default=1)
    args = parser.parse_args(argv)
    try:
        text = args.config.read_text()
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text, args.mode)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out if args.out is not None else Path(config.get("out", "out"))
    return run(config, out_dir, workers=args.workers)


if __name__ == "__main__":
    sys.exit(main())
