"""Figure specs, renderers, determinism."""

import numpy as np
import pytest

from ddplots.render import FigureSpec, SpecError, main, render
from ddplots.slopes import fit_loglog_slope


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, float) else str(v)
                              for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _snapshot_csv(path, const=None):
    x = np.linspace(0.0, 6.0, 101)
    u = np.full_like(x, 0.7) if const is not None else np.sin(x)
    return _write_csv(path, ["x", "u"], zip(x, u))


def _sweep_csv(path, eps, dist, q=1.0):
    rows = [(e, 1.0 * e ** 3, 256, q, d, 0.01, 0.5, "true", "false")
            for e, d in zip(eps, dist)]
    return _write_csv(path, ["eps", "delta", "n", "q", "distance",
                             "cauchy_increment", "min_slack",
                             "estimates_pass", "failed"], rows)


def _gamma_csv(path, eps, scale=3.0, exponent=0.5, p=3.0):
    rows = []
    for e in eps:
        for i in (1, 2, 3, 4):
            rows.append(("gamma", i, e, e ** p, scale * e ** exponent, 0.1))
    return _write_csv(path, ["gamma", "i", "eps", "delta", "pairing", "l1norm"],
                      rows)


def _spec_file(path, **fields):
    lines = []
    for k, v in fields.items():
        if isinstance(v, str):
            lines.append(f'{k} = "{v}"')
        elif isinstance(v, list):
            inner = ", ".join(f'"{p}"' for p in v)
            lines.append(f"{k} = [{inner}]")
        else:
            lines.append(f"{k} = {v}")
    path.write_text("\n".join(lines) + "\n")
    return path


def test_spec_validation(tmp_path):
    snap = _snapshot_csv(tmp_path / "s.csv")
    with pytest.raises(SpecError, match="kind"):
        FigureSpec.from_file(_spec_file(tmp_path / "a.toml", kind="nope",
                                        inputs=[str(snap)], output="o.png"))
    with pytest.raises(SpecError, match="does not exist"):
        FigureSpec.from_file(_spec_file(tmp_path / "b.toml", kind="snapshot",
                                        inputs=["/nope.csv"], output="o.png"))
    with pytest.raises(SpecError, match="unknown"):
        FigureSpec.from_file(_spec_file(tmp_path / "c.toml", kind="snapshot",
                                        inputs=[str(snap)], output="o.png",
                                        bogus=1))
    with pytest.raises(SpecError, match="output"):
        FigureSpec.from_file(_spec_file(tmp_path / "d.toml", kind="snapshot",
                                        inputs=[str(snap)]))


def test_snapshot_render_constant(tmp_path):
    snap = _snapshot_csv(tmp_path / "s.csv", const=0.7)
    spec = _spec_file(tmp_path / "fig.toml", kind="snapshot",
                      inputs=[str(snap)], output=str(tmp_path / "fig.png"))
    result = render(spec)
    assert result.path.exists()
    assert result.path.stat().st_size > 0


def test_sweep_render_monotone(tmp_path):
    eps = [0.04, 0.02, 0.01, 0.005]
    dist = [0.1, 0.05, 0.025, 0.0125]  # exact first-order decay
    csv_path = _sweep_csv(tmp_path / "sweep.csv", eps, dist)
    spec = _spec_file(tmp_path / "fig.toml", kind="sweep",
                      inputs=[str(csv_path)], output=str(tmp_path / "sweep.png"))
    result = render(spec)
    assert result.annotations["slope_distance"] == pytest.approx(1.0, abs=1e-12)


def test_gamma_render_annotates_half_slope(tmp_path):
    csv_path = _gamma_csv(tmp_path / "gamma.csv", [0.04, 0.02, 0.01, 0.005])
    spec = _spec_file(tmp_path / "fig.toml", kind="gamma-rates",
                      inputs=[str(csv_path)], output=str(tmp_path / "g.png"))
    result = render(spec)
    for i in (1, 2, 3, 4):
        assert result.annotations[f"slope_{i}"] == pytest.approx(0.5, abs=1e-10)
    assert result.annotations["p_hat"] == pytest.approx(3.0, abs=1e-10)


def test_riemann_overlay(tmp_path):
    snap = _snapshot_csv(tmp_path / "s.csv")
    xi = np.linspace(-1.0, 1.5, 51)
    fan = _write_csv(tmp_path / "fan.csv", ["xi", "u"],
                     zip(xi, np.where(xi < 0.5, 1.0, 0.0)))
    spec = _spec_file(tmp_path / "fig.toml", kind="riemann-overlay",
                      inputs=[str(snap), str(fan)],
                      output=str(tmp_path / "o.png"), t=1.0, x0=0.0)
    result = render(spec)
    assert result.path.exists()


def test_render_deterministic_bytes(tmp_path):
    csv_path = _sweep_csv(tmp_path / "sweep.csv", [0.04, 0.02, 0.01],
                          [0.1, 0.05, 0.025])
    out_a = tmp_path / "a.png"
    out_b = tmp_path / "b.png"
    for out in (out_a, out_b):
        spec = _spec_file(tmp_path / f"{out.stem}.toml", kind="sweep",
                          inputs=[str(csv_path)], output=str(out))
        render(spec)
    assert out_a.read_bytes() == out_b.read_bytes()


def test_render_does_not_mutate_inputs(tmp_path):
    csv_path = _sweep_csv(tmp_path / "sweep.csv", [0.04, 0.02, 0.01],
                          [0.1, 0.05, 0.025])
    before = csv_path.read_bytes()
    spec = _spec_file(tmp_path / "fig.toml", kind="sweep",
                      inputs=[str(csv_path)], output=str(tmp_path / "f.png"))
    render(spec)
    assert csv_path.read_bytes() == before


def test_schema_mismatch_rejected(tmp_path):
    bad = _write_csv(tmp_path / "bad.csv", ["a", "b"], [(1.0, 2.0)])
    spec = _spec_file(tmp_path / "fig.toml", kind="sweep",
                      inputs=[str(bad)], output=str(tmp_path / "f.png"))
    with pytest.raises(SpecError, match="missing column"):
        render(spec)


def test_main_cli(tmp_path, capsys):
    snap = _snapshot_csv(tmp_path / "s.csv")
    spec = _spec_file(tmp_path / "fig.toml", kind="snapshot",
                      inputs=[str(snap)], output=str(tmp_path / "fig.png"))
    assert main(["--spec", str(spec)]) == 0
    assert "fig.png" in capsys.readouterr().out
    bad = _spec_file(tmp_path / "bad.toml", kind="nope", inputs=[str(snap)],
                     output="x.png")
    assert main(["--spec", str(bad)]) == 2


def test_fit_loglog_slope():
    eps = np.array([0.04, 0.02, 0.01])
    slope, resid = fit_loglog_slope(eps, 2.0 * eps ** 1.5)
    assert slope == pytest.approx(1.5, abs=1e-12)
    assert resid == pytest.approx(0.0, abs=1e-12)
    slope, _ = fit_loglog_slope(eps, np.zeros(3))
    assert np.isnan(slope)
