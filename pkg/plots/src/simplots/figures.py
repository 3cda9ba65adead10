"""Figure construction from run logs.

Each figure kind maps a set of log columns onto one matplotlib figure.  With
several input logs the same series are overlaid and the legend carries the
log labels, which is how a biased run is compared against its baseline.
"""

import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .errors import PlotError
from .loader import load_log

KINDS = ("velocities", "force", "energy", "residuals")

_JOINT_VEL = [f"qd{i}_{k}" for i in (1, 2) for k in range(4)]
_OBJECT_VEL = ["vo_x", "vo_y", "vo_z", "wo_x", "wo_y", "wo_z"]

REQUIRED_COLUMNS = {
    "velocities": ["t"] + _JOINT_VEL + _OBJECT_VEL,
    "force": ["t", "f1", "f2"],
    "energy": ["t", "V", "W"],
    "residuals": ["t", "parallelism", "df1", "df2", "dN1", "dN2",
                  "beta_phi", "beta_psi"],
}

# Fixed cycles so re-rendering is deterministic and overlays stay readable.
_RUN_STYLES = ("-", "--", ":", "-.")


@dataclass
class PlotSpec:
    """What to render: input logs, figure kinds, destination and format."""

    inputs: list
    kinds: list
    out_dir: str
    fmt: str = "png"
    f_d: float = 4.0

    def validate(self):
        if not self.inputs:
            raise PlotError("no input CSV files given")
        if self.fmt not in ("png", "pdf"):
            raise PlotError(f"unsupported format {self.fmt!r}")
        bad = [k for k in self.kinds if k not in KINDS]
        if bad:
            raise PlotError(
                f"unknown figure kind(s) {', '.join(bad)}; "
                f"choose from {', '.join(KINDS)}")
        if self.f_d <= 0:
            raise PlotError("f_d must be positive")


def _series_label(name, run, many):
    return f"{name} [{run.label}]" if many else name


def _overlay(ax, runs, names, ycol=None):
    many = len(runs) > 1
    for run, style in zip(runs, _RUN_STYLES):
        for name in names:
            ax.plot(run["t"], run[name], style,
                    label=_series_label(name, run, many), linewidth=1.0)


def _velocities_figure(runs):
    fig, (ax_j, ax_o) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    _overlay(ax_j, runs, _JOINT_VEL)
    ax_j.set_ylabel("joint velocity (rad/s)")
    ax_j.legend(fontsize=6, ncol=2, loc="upper right")
    _overlay(ax_o, runs, _OBJECT_VEL)
    ax_o.set_ylabel("object velocity (m/s, rad/s)")
    ax_o.set_xlabel("time (s)")
    ax_o.legend(fontsize=6, ncol=2, loc="upper right")
    fig.suptitle("Joint and object velocities")
    return fig


def _force_figure(runs, f_d):
    fig, ax = plt.subplots(figsize=(7, 4))
    _overlay(ax, runs, ["f1", "f2"])
    ax.axhspan(0.98 * f_d, 1.02 * f_d, color="0.85", zorder=0,
               label="2% band")
    ax.axhline(f_d, color="k", linestyle="--", linewidth=1.0,
               label=f"f_d = {f_d:g} N")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("contact force (N)")
    ax.legend(fontsize=8, loc="lower right")
    fig.suptitle("Grasping force convergence")
    return fig


def _energy_figure(runs):
    fig, (ax_v, ax_w) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    _overlay(ax_v, runs, ["V"])
    ax_v.set_ylabel("storage function V (J)")
    ax_v.legend(fontsize=8)
    _overlay(ax_w, runs, ["W"])
    ax_w.set_ylabel("dissipation W (W)")
    ax_w.set_xlabel("time (s)")
    ax_w.legend(fontsize=8)
    fig.suptitle("Energy storage and dissipation")
    return fig


def _residuals_figure(runs):
    fig, ax = plt.subplots(figsize=(7, 4))
    many = len(runs) > 1
    names = REQUIRED_COLUMNS["residuals"][1:]
    for run, style in zip(runs, _RUN_STYLES):
        for name in names:
            ax.semilogy(run["t"], abs(run[name]) + 1e-18, style,
                        label=_series_label(name, run, many), linewidth=1.0)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("|residual| (mixed units: N, N·m, m², –)")
    ax.legend(fontsize=6, ncol=2, loc="upper right")
    fig.suptitle("Equilibrium residual decay")
    return fig


def build_figure(kind, runs, f_d=4.0):
    """Build (but do not save) the figure for one kind."""
    for run in runs:
        run.require(REQUIRED_COLUMNS[kind])
    if kind == "velocities":
        return _velocities_figure(runs)
    if kind == "force":
        return _force_figure(runs, f_d)
    if kind == "energy":
        return _energy_figure(runs)
    if kind == "residuals":
        return _residuals_figure(runs)
    raise PlotError(f"unknown figure kind {kind!r}")


def _save(fig, path, fmt):
    # strip volatile metadata so re-rendering is byte-identical
    metadata = {"Software": "simplots"}
    if fmt == "pdf":
        metadata = {"Creator": "simplots", "Producer": "simplots",
                    "CreationDate": None}
    fig.savefig(path, format=fmt, dpi=120, metadata=metadata)
    plt.close(fig)


def render(spec):
    """Render every requested figure kind; returns the written file paths."""
    spec.validate()
    runs = [load_log(p) for p in spec.inputs]
    if len(runs) > len(_RUN_STYLES):
        raise PlotError(f"at most {len(_RUN_STYLES)} logs can be overlaid")
    os.makedirs(spec.out_dir, exist_ok=True)
    written = []
    for kind in spec.kinds:
        fig = build_figure(kind, runs, spec.f_d)
        path = os.path.join(spec.out_dir, f"{kind}.{spec.fmt}")
        _save(fig, path, spec.fmt)
        written.append(path)
    return written
