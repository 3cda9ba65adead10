"""Figure rendering: loading, building, saving, CLI plumbing."""

import math

import numpy as np
import pytest

import simplots
from simplots import EmptyLog, MissingColumn, PlotSpec, cli
from simplots.figures import REQUIRED_COLUMNS


def _columns():
    cols = ["t"]
    cols += [f"qd{i}_{k}" for i in (1, 2) for k in range(4)]
    cols += ["vo_x", "vo_y", "vo_z", "wo_x", "wo_y", "wo_z"]
    cols += ["f1", "f2", "V", "W", "parallelism", "df1", "df2",
             "dN1", "dN2", "beta_phi", "beta_psi", "phase"]
    return cols


def _write_log(path, n=50, force=4.0, drop=()):
    cols = [c for c in _columns() if c not in drop]
    rng = np.random.default_rng(0)
    lines = [",".join(cols)]
    for i in range(n):
        t = 0.01 * i
        row = []
        for c in cols:
            if c == "t":
                row.append(f"{t:.6f}")
            elif c == "phase":
                row.append("grasping")
            elif c in ("f1", "f2"):
                row.append(f"{force * (1 - math.exp(-5 * t)):.6f}")
            elif c == "V":
                row.append(f"{0.5 * math.exp(-3 * t):.6f}")
            else:
                row.append(f"{1e-3 * rng.standard_normal():.6e}")
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def log(tmp_path):
    return _write_log(tmp_path / "cube.csv")


def test_load_log(log):
    run = simplots.load_log(str(log))
    assert run.label == "cube"
    assert run["t"].shape == (50,)
    assert run["f1"].dtype == float
    assert run["phase"][0] == "grasping"


def test_load_empty_file(tmp_path):
    path = tmp_path / "none.csv"
    path.write_text("")
    with pytest.raises(EmptyLog):
        simplots.load_log(str(path))


def test_load_header_only(tmp_path):
    path = tmp_path / "bare.csv"
    path.write_text(",".join(_columns()) + "\n")
    with pytest.raises(EmptyLog):
        simplots.load_log(str(path))


def test_missing_column(tmp_path):
    path = _write_log(tmp_path / "broken.csv", drop=("f2",))
    run = simplots.load_log(str(path))
    with pytest.raises(MissingColumn) as exc:
        simplots.build_figure("force", [run])
    assert "f2" in str(exc.value)


def test_render_all_kinds(log, tmp_path):
    spec = PlotSpec(inputs=[str(log)], kinds=list(simplots.KINDS),
                    out_dir=str(tmp_path / "figs"))
    written = simplots.render(spec)
    assert [p.split("/")[-1] for p in written] == [
        "velocities.png", "force.png", "energy.png", "residuals.png"]
    for p in written:
        assert open(p, "rb").read(8).startswith(b"\x89PNG")


def test_render_deterministic(log, tmp_path):
    raw = []
    for tag in ("a", "b"):
        spec = PlotSpec(inputs=[str(log)], kinds=["force", "energy"],
                        out_dir=str(tmp_path / tag))
        for p in simplots.render(spec):
            raw.append(open(p, "rb").read())
    assert raw[0] == raw[2] and raw[1] == raw[3]


def test_render_pdf(log, tmp_path):
    spec = PlotSpec(inputs=[str(log)], kinds=["force"],
                    out_dir=str(tmp_path), fmt="pdf")
    (path,) = simplots.render(spec)
    assert open(path, "rb").read(5) == b"%PDF-"


def test_force_figure_reference_line(log):
    run = simplots.load_log(str(log))
    fig = simplots.build_figure("force", [run], f_d=4.0)
    ax = fig.axes[0]
    flat = [ln for ln in ax.lines
            if np.allclose(ln.get_ydata(), 4.0) and len(ln.get_ydata()) == 2]
    assert flat, "no horizontal reference line at f_d"
    assert ax.get_ylabel() == "contact force (N)"
    assert ax.get_xlabel() == "time (s)"


def test_axis_units_labeled(log):
    run = simplots.load_log(str(log))
    for kind in simplots.KINDS:
        fig = simplots.build_figure(kind, [run])
        labels = [ax.get_xlabel() for ax in fig.axes]
        labels += [ax.get_ylabel() for ax in fig.axes]
        assert any("(s)" in t for t in labels)
        assert any("(" in t and t.endswith(")") for t in labels)


def test_overlay_two_logs(tmp_path):
    a = _write_log(tmp_path / "plain.csv")
    b = _write_log(tmp_path / "biased.csv", force=4.2)
    run_a = simplots.load_log(str(a))
    run_b = simplots.load_log(str(b))
    fig = simplots.build_figure("force", [run_a, run_b])
    labels = [ln.get_label() for ln in fig.axes[0].lines]
    assert "f1 [plain]" in labels and "f1 [biased]" in labels


def test_spec_validation(tmp_path):
    with pytest.raises(simplots.PlotError):
        simplots.render(PlotSpec(inputs=[], kinds=["force"],
                                 out_dir=str(tmp_path)))
    with pytest.raises(simplots.PlotError):
        simplots.render(PlotSpec(inputs=["x.csv"], kinds=["sparklines"],
                                 out_dir=str(tmp_path)))
    with pytest.raises(simplots.PlotError):
        simplots.render(PlotSpec(inputs=["x.csv"], kinds=["force"],
                                 out_dir=str(tmp_path), fmt="svg"))


def test_cli_happy_path(log, tmp_path, capsys):
    out = tmp_path / "figs"
    code = cli.main(["--in", str(log), "--kinds", "velocities,force,energy",
                     "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out.splitlines()
    assert len(printed) == 3
    assert (out / "force.png").exists()


def test_cli_reports_errors(tmp_path, capsys):
    code = cli.main(["--in", str(tmp_path / "missing.csv"),
                     "--out", str(tmp_path)])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_required_columns_cover_kinds():
    assert set(REQUIRED_COLUMNS) == set(simplots.KINDS)
    for names in REQUIRED_COLUMNS.values():
        assert "t" in names
