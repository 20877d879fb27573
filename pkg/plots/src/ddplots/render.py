"""Render figures from the laboratory's CSV outputs.

Invoked as ``render --spec figure.toml``.  The spec names the figure
kind, the input CSVs, and the output image; rendering is deterministic
(pinned Agg backend, fixed metadata), so re-rendering a spec reproduces
the image bytes.

Figure kinds and their inputs:

- ``snapshot``        one or more ``x,u`` CSVs, drawn as lines
- ``sweep``           a sweep CSV; log-log distance vs eps with the
                      fitted slope annotated
- ``gamma-rates``     a gamma CSV; per-term |pairing| vs eps, fitted
                      slopes annotated, reference slope lines overlaid
                      (1/2 for the first exact-derivative term; the
                      dispersive terms' references derive from the
                      delta(eps) relation present in the file)
- ``riemann-overlay`` a snapshot CSV plus fan samples (``xi,u``) mapped
                      to x = x0 + xi t
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import tomli  # noqa: E402

from .slopes import fit_loglog_slope  # noqa: E402

KINDS = ("snapshot", "sweep", "gamma-rates", "riemann-overlay")
PNG_METADATA = {"Software": "ddlab-plots"}
FIGSIZE = (6.4, 4.2)
DPI = 130


class SpecError(ValueError):
    """Figure spec invalid or inconsistent with its inputs."""


@dataclass
class FigureSpec:
    kind: str
    inputs: list[Path]
    output: Path
    options: dict = field(default_factory=dict)

    @staticmethod
    def from_file(path: Path) -> "FigureSpec":
        try:
            data = tomli.loads(Path(path).read_text())
        except tomli.TOMLDecodeError as exc:
            raise SpecError(f"spec syntax error: {exc}") from exc
        known = {"kind", "inputs", "output", "title", "xlabel", "ylabel",
                 "labels", "q", "t", "x0", "logy"}
        unknown = set(data) - known
        if unknown:
            raise SpecError(f"unknown spec key(s): {', '.join(sorted(unknown))}")
        kind = data.get("kind")
        if kind not in KINDS:
            raise SpecError(f"kind must be one of {KINDS}, got {kind!r}")
        inputs = [Path(p) for p in data.get("inputs", [])]
        if not inputs:
            raise SpecError("spec needs at least one input CSV")
        for p in inputs:
            if not p.exists():
                raise SpecError(f"input does not exist: {p}")
        if "output" not in data:
            raise SpecError("spec needs an output image path")
        opts = {k: v for k, v in data.items()
                if k not in ("kind", "inputs", "output")}
        return FigureSpec(kind, inputs, Path(data["output"]), opts)


@dataclass
class RenderResult:
    path: Path
    annotations: dict


def _read_csv(path: Path) -> tuple[list[str], dict[str, list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SpecError(f"empty CSV: {path}")
    header = rows[0]
    cols = {name: [r[i] for r in rows[1:]] for i, name in enumerate(header)}
    return header, cols


def _require_columns(header: list[str], needed: set[str], path: Path) -> None:
    missing = needed - set(header)
    if missing:
        raise SpecError(f"{path} is missing column(s): {', '.join(sorted(missing))}")


def _floats(cols: dict, name: str) -> np.ndarray:
    return np.array([float(v) for v in cols[name]])


def _new_axes(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    if "title" in spec.options:
        ax.set_title(spec.options["title"])
    return fig, ax


def _finish(fig, ax, spec: FigureSpec, annotations: dict) -> RenderResult:
    ax.set_xlabel(spec.options.get("xlabel", ax.get_xlabel()))
    ax.set_ylabel(spec.options.get("ylabel", ax.get_ylabel()))
    fig.tight_layout()
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output, metadata=PNG_METADATA)
    plt.close(fig)
    return RenderResult(spec.output, annotations)


def _render_snapshot(spec: FigureSpec) -> RenderResult:
    fig, ax = _new_axes(spec)
    labels = spec.options.get("labels", [p.stem for p in spec.inputs])
    for path, label in zip(spec.inputs, labels):
        header, cols = _read_csv(path)
        _require_columns(header, {"x", "u"}, path)
        ax.plot(_floats(cols, "x"), _floats(cols, "u"), lw=1.0, label=str(label))
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    if len(spec.inputs) > 1:
        ax.legend(fontsize=8)
    return _finish(fig, ax, spec, {})


def _render_sweep(spec: FigureSpec) -> RenderResult:
    header, cols = _read_csv(spec.inputs[0])
    _require_columns(header, {"eps", "q", "distance"}, spec.inputs[0])
    eps = _floats(cols, "eps")
    qs = _floats(cols, "q")
    dist = _floats(cols, "distance")
    q = float(spec.options.get("q", qs[0]))
    sel = qs == q
    if not sel.any():
        raise SpecError(f"no rows with q = {q} in {spec.inputs[0]}")
    eps, dist = eps[sel], dist[sel]
    order = np.argsort(eps)
    eps, dist = eps[order], dist[order]
    slope, resid = fit_loglog_slope(eps, dist)

    fig, ax = _new_axes(spec)
    ax.loglog(eps, dist, "o-", lw=1.0)
    if np.isfinite(slope):
        ax.annotate(f"slope {slope:+.2f}", xy=(0.05, 0.92),
                    xycoords="axes fraction", fontsize=9)
    ax.set_xlabel("eps")
    ax.set_ylabel(f"L{q:g} window distance")
    return _finish(fig, ax, spec, {"slope_distance": slope,
                                   "slope_residual": resid, "q": q})


def _render_gamma(spec: FigureSpec) -> RenderResult:
    header, cols = _read_csv(spec.inputs[0])
    _require_columns(header, {"i", "eps", "delta", "pairing"}, spec.inputs[0])
    idx = np.array([int(v) for v in cols["i"]])
    eps = _floats(cols, "eps")
    delta = _floats(cols, "delta")
    pairing = _floats(cols, "pairing")

    # reference exponents: 1/2 for the first term; the dispersive terms
    # follow sqrt(delta/eps) and sqrt(delta)/eps, with p from the file
    p_hat, _ = fit_loglog_slope(eps[delta > 0], delta[delta > 0]) \
        if np.any(delta > 0) else (float("nan"), float("nan"))
    reference = {1: 0.5}
    if np.isfinite(p_hat):
        reference[3] = 0.5 * (p_hat - 1.0)
        reference[4] = 0.5 * p_hat - 1.0

    fig, ax = _new_axes(spec)
    annotations: dict = {"p_hat": p_hat}
    y_annot = 0.92
    for i in sorted(set(idx)):
        sel = idx == i
        e, v = eps[sel], np.abs(pairing[sel])
        order = np.argsort(e)
        e, v = e[order], v[order]
        slope, _ = fit_loglog_slope(e, v)
        annotations[f"slope_{i}"] = slope
        if np.all(v > 0):
            ax.loglog(e, v, "o-", lw=1.0, label=f"term {i}")
            if np.isfinite(slope):
                ax.annotate(f"term {i}: slope {slope:+.2f}", xy=(0.05, y_annot),
                            xycoords="axes fraction", fontsize=8)
                y_annot -= 0.06
            ref = reference.get(i)
            if ref is not None and ref > 0:
                anchor = v[-1] * (e / e[-1]) ** ref
                ax.loglog(e, anchor, "--", lw=0.8, color="gray")
    ax.set_xlabel("eps")
    ax.set_ylabel("|pairing|")
    ax.legend(fontsize=8)
    return _finish(fig, ax, spec, annotations)


def _render_riemann_overlay(spec: FigureSpec) -> RenderResult:
    if len(spec.inputs) < 2:
        raise SpecError("riemann-overlay needs a snapshot CSV and fan samples")
    snap_header, snap = _read_csv(spec.inputs[0])
    _require_columns(snap_header, {"x", "u"}, spec.inputs[0])
    fan_header, fan = _read_csv(spec.inputs[1])
    _require_columns(fan_header, {"xi", "u"}, spec.inputs[1])
    t = float(spec.options.get("t", 1.0))
    x0 = float(spec.options.get("x0", 0.0))

    fig, ax = _new_axes(spec)
    ax.plot(_floats(snap, "x"), _floats(snap, "u"), lw=1.0, label="regularized")
    ax.plot(x0 + t * _floats(fan, "xi"), _floats(fan, "u"), "k--", lw=1.0,
            label="entropy solution")
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.legend(fontsize=8)
    return _finish(fig, ax, spec, {"t": t, "x0": x0})


_RENDERERS = {
    "snapshot": _render_snapshot,
    "sweep": _render_sweep,
    "gamma-rates": _render_gamma,
    "riemann-overlay": _render_riemann_overlay,
}


def render(spec: FigureSpec | Path | str) -> RenderResult:
    """Render one figure spec to its output image."""
    if not isinstance(spec, FigureSpec):
        spec = FigureSpec.from_file(Path(spec))
    return _RENDERERS[spec.kind](spec)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="render",
                                     description="render ddlab CSVs to figures")
    parser.add_argument("--spec", required=True, type=Path)
    args = parser.parse_args(argv)
    try:
        result = render(args.spec)
    except SpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 2
    print(result.path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
