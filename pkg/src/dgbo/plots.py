"""Static figures for run directories (matplotlib, Agg backend)."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .diagnostics import load_diagnostics  # noqa: E402
from .solver import load_trajectory  # noqa: E402

__all__ = ["emit_plots", "plot_comparison"]


def _require(run_dir: Path, names):
    missing = [str(run_dir / n) for n in names if not (run_dir / n).exists()]
    if missing:
        raise FileNotFoundError("missing inputs: " + ", ".join(missing))


def _waterfall(traj, path: Path, rows: int = 12):
    x = traj.grid.x
    idx = np.unique(np.linspace(0, len(traj.snapshots) - 1, min(rows, len(traj.snapshots))).astype(int))
    scale = max(float(np.max(np.abs(traj.snapshots[0].samples))), 1e-300)
    fig, ax = plt.subplots(figsize=(7, 5))
    for n, i in enumerate(idx):
        ax.plot(x, traj.snapshots[i].samples / scale * 0.8 + n, lw=0.8, color="k")
    ax.set_yticks(range(len(idx)), [f"{traj.times[i]:.3g}" for i in idx])
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _drift(traj, path: Path):
    s = np.array(traj.series)
    t = s[:, 0]
    cfg = traj.config
    fig, ax = plt.subplots(figsize=(7, 4))
    for col, name, tol, rel in ((1, "I", cfg.integral_tol, False), (2, "M", cfg.mass_tol, True),
                                (3, "H", cfg.hamiltonian_tol, True)):
        d = np.abs(s[:, col] - s[0, col])
        if rel and s[0, col] != 0:
            d = d / abs(s[0, col])
        line, = ax.semilogy(t, np.maximum(d, 1e-18), label=f"{name} drift")
        ax.axhline(tol, ls="--", lw=0.8, color=line.get_color())
    ax.set_xlabel("t")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _diag_curves(d: dict, out: Path) -> list[Path]:
    made = []
    t = d["t"]
    ws = [c for c in d if c.startswith("W_")]
    if ws:
        fig, ax = plt.subplots(figsize=(7, 4))
        for c in ws:
            ax.plot(t, d[c], label=c)
        ax.set_xlabel("t")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / "weighted_energy.png", dpi=120)
        plt.close(fig)
        made.append(out / "weighted_energy.png")
    fs = [c for c in d if c.startswith("F_")]
    if fs:
        fig, ax = plt.subplots(figsize=(7, 4))
        for c in fs:
            ax.plot(t[1:], t[1:] * d[c][1:], label=f"t*{c}")
        ax.set_xlabel("t")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / "decay.png", dpi=120)
        plt.close(fig)
        made.append(out / "decay.png")
    return made


def emit_plots(run_dir) -> list[Path]:
    """Waterfall and drift plots, plus diagnostics curves when present."""
    run_dir = Path(run_dir)
    _require(run_dir, ["config.json", "series.csv"])
    traj = load_trajectory(run_dir)
    made = []
    if traj.snapshots:
        _waterfall(traj, run_dir / "waterfall.png")
        made.append(run_dir / "waterfall.png")
    _drift(traj, run_dir / "drift.png")
    made.append(run_dir / "drift.png")
    if (run_dir / "diagnostics.csv").exists():
        made += _diag_curves(load_diagnostics(run_dir), run_dir)
    return made


def plot_comparison(run_dirs: dict, column: str, path) -> Path:
    """One curve of ``column`` per labelled run directory."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, d in run_dirs.items():
        d = Path(d)
        _require(d, ["diagnostics.csv"])
        data = load_diagnostics(d)
        ax.semilogy(data["t"], data[column], label=label)
    ax.set_xlabel("t")
    ax.set_ylabel(column)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def load_summary(run_dir) -> dict:
    return json.loads((Path(run_dir) / "summary.json").read_text())
