"""Weighted energies, local smoothing integrals and decay functionals.

Derivative operators are global multipliers applied to the whole field;
the spatial weight is applied afterwards to the squared result.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cutoffs import CutoffFamily, bump_cdf, shifted_sample
from .spectral import Field, Multiplier
from .solver import SimConfig, SimState, Trajectory, conserved

__all__ = [
    "weighted_energy",
    "sharp_weighted_energy",
    "smoothing_densities",
    "halfstep_energy",
    "halfstep_smoothing_densities",
    "kato_densities",
    "kato_window",
    "decay_functional",
    "local_sobolev",
    "DiagnosticsRecord",
    "Recorder",
    "WEIGHT_TOL",
    "load_diagnostics",
]

WEIGHT_TOL = 1e-12


def _multiplier(f: Field, s: float = 0.0, j: int = 0, hilbert: bool = False) -> Field:
    """``D^s d^j`` (optionally preceded by the Hilbert transform)."""

    def sym(k):
        out = (1j * k) ** j * (np.abs(k) ** s if s else 1.0)
        return out * (-1j * np.sign(k)) if hilbert else out

    return Multiplier(f.grid, sym)(f)


def _weighted(weight: np.ndarray, g: Field) -> float:
    if np.min(weight) < -WEIGHT_TOL:
        raise AssertionError(f"negative weight {np.min(weight):.3e}")
    val = float(np.sum(weight * g.samples**2) * g.grid.dx)
    if val < -WEIGHT_TOL:
        raise AssertionError(f"negative weighted integral {val:.3e}")
    return val


def weighted_energy(u: Field, family: CutoffFamily, v: float, t: float, j: int) -> float:
    """``int chi^2(x + v t) (d^j u)^2 dx``."""
    w = shifted_sample(family, u.grid, v, t, "chi2").samples
    return _weighted(w, _multiplier(u, j=j))


def sharp_weighted_energy(u: Field, family: CutoffFamily, v: float, t: float, j: int,
                          x0: float = 0.0) -> float:
    """Indicator version: ``int_{x0 + eps - v t}^{L} (d^j u)^2 dx``."""
    w = (u.grid.x >= x0 + family.eps - v * t).astype(float)
    return _weighted(w, _multiplier(u, j=j))


def smoothing_densities(u: Field, family: CutoffFamily, v: float, t: float, j: int,
                        alpha: float) -> tuple[float, float]:
    """``int eta^2 (D^{(alpha+1)/2} d^j u)^2`` and the same with the Hilbert transform."""
    w = shifted_sample(family, u.grid, v, t, "eta2").samples
    s = (alpha + 1) / 2
    return _weighted(w, _multiplier(u, s, j)), _weighted(w, _multiplier(u, s, j, hilbert=True))


def halfstep_energy(u: Field, family: CutoffFamily, v: float, t: float, m: int, alpha: float) -> float:
    """``int chi^2 (D^{(1-alpha)/2} d^m u)^2``."""
    w = shifted_sample(family, u.grid, v, t, "chi2").samples
    return _weighted(w, _multiplier(u, (1 - alpha) / 2, m))


def halfstep_smoothing_densities(u: Field, family: CutoffFamily, v: float, t: float,
                                 m: int) -> tuple[float, float]:
    """``int eta^2 (d^{m+1} u)^2`` and ``int eta^2 (H d^{m+1} u)^2``."""
    w = shifted_sample(family, u.grid, v, t, "eta2").samples
    return _weighted(w, _multiplier(u, 0, m + 1)), _weighted(w, _multiplier(u, 0, m + 1, hilbert=True))


# windowed smoothing ------------------------------------------------------

def _window(grid, R: float, width: float):
    x = grid.x
    smooth = bump_cdf((x + R) / width) - bump_cdf((x - R) / width)
    sharp = (np.abs(x) <= R).astype(float)
    return smooth, sharp


def _check_kato(grid, R, r, alpha, width):
    margin = 0.05 * grid.half_length
    if R + width > grid.half_length - margin:
        raise ValueError(f"window radius {R} too large for box half-length {grid.half_length}")
    if not r > (9 - 3 * alpha) / 8:
        raise ValueError(f"r = {r} must exceed {(9 - 3 * alpha) / 8:.4g}")


def kato_densities(u: Field, R: float, r: float, alpha: float, width: float = 0.5) -> tuple[float, float]:
    """Smooth- and sharp-window values of ``int (d D^{r+mu} u)^2 + (H d D^{r+mu} u)^2``."""
    _check_kato(u.grid, R, r, alpha, width)
    smooth, sharp = _window(u.grid, R, width)
    s = r + (alpha + 1) / 2
    g, gh = _multiplier(u, s, 1), _multiplier(u, s, 1, hilbert=True)
    return (_weighted(smooth, g) + _weighted(smooth, gh), _weighted(sharp, g) + _weighted(sharp, gh))


def _trapezoid(times, values) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    out = np.zeros_like(y)
    if len(y) > 1:
        out[1:] = np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))
    return out


def kato_window(trajectory: Trajectory, R: float, r: float, alpha: float, width: float = 0.5) -> dict:
    """Time-trapezoid of the windowed Kato integrand over the stored snapshots."""
    if len(trajectory.snapshots) != len(trajectory.times):
        raise ValueError("trajectory was run without keeping all snapshots")
    dens = np.array([kato_densities(u, R, r, alpha, width) for u in trajectory.snapshots]).reshape(-1, 2)
    return {
        "smooth": float(_trapezoid(trajectory.times, dens[:, 0])[-1]),
        "sharp": float(_trapezoid(trajectory.times, dens[:, 1])[-1]),
        "R": R, "r": r, "alpha": alpha, "width": width,
    }


# decay and localized norms ----------------------------------------------

def decay_functional(u: Field, j: int, delta: float) -> float:
    """``int (1 + x_-^2)^{-(j+delta)/2} (d^j u)^2`` with ``x_- = max(0, -x)``."""
    xm = np.maximum(0.0, -u.grid.x)
    w = (1.0 + xm * xm) ** (-(j + delta) / 2)
    return _weighted(w, _multiplier(u, j=j))


def local_sobolev(u: Field, x0: float, s_loc: float, family: CutoffFamily,
                  restrict_first: bool = False) -> dict:
    """``|| chi(. - x0 + eps) J^s u ||`` (or ``|| J^s (chi u) ||`` if ``restrict_first``)."""
    chi = family.chi(u.grid.x - x0 + family.eps)
    bessel = lambda k: (1.0 + k * k) ** (s_loc / 2)
    if restrict_first:
        val = Multiplier(u.grid, bessel)(u * chi).norm()
    else:
        val = (Multiplier(u.grid, bessel)(u) * chi).norm()
    return {"value": val, "x0": x0, "s": s_loc, "eps": family.eps, "b": family.b,
            "restrict_first": restrict_first}


# run-time record ---------------------------------------------------------

@dataclass
class DiagnosticsRecord:
    """Per-time diagnostics of one run plus time-accumulated smoothing integrals."""

    run_id: str
    family: CutoffFamily
    v: float
    alpha: float
    js: tuple = (1, 2, 3)
    ms: tuple = (2,)
    delta: float = 1.0
    decay_js: tuple = (2,)
    R: float | None = None
    r: float = 1.0
    times: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def columns(self) -> list[str]:
        cols = ["t"]
        for j in self.js:
            cols += [f"W_{j}", f"Wsharp_{j}", f"dS_{j}", f"dSH_{j}"]
        for m in self.ms:
            cols += [f"Wp_{m}", f"dSp_{m}", f"dSpH_{m}"]
        cols += [f"F_{j}" for j in self.decay_js]
        if self.R is not None:
            cols += ["dK", "dKsharp"]
        return cols + ["I", "M", "H"]

    def update(self, u: Field, t: float):
        row = [t]
        for j in self.js:
            row.append(weighted_energy(u, self.family, self.v, t, j))
            row.append(sharp_weighted_energy(u, self.family, self.v, t, j))
            row.extend(smoothing_densities(u, self.family, self.v, t, j, self.alpha))
        for m in self.ms:
            row.append(halfstep_energy(u, self.family, self.v, t, m, self.alpha))
            row.extend(halfstep_smoothing_densities(u, self.family, self.v, t, m))
        row.extend(decay_functional(u, j, self.delta) for j in self.decay_js)
        if self.R is not None:
            row.extend(kato_densities(u, self.R, self.r, self.alpha))
        row.extend(conserved(u, self.alpha))
        self.times.append(t)
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        i = self.columns().index(name)
        return np.array([row[i] for row in self.rows])

    def accumulated(self, name: str) -> np.ndarray:
        """Trapezoidal running integral of a density column (``dS_2`` -> ``S_2``)."""
        return _trapezoid(self.times, self.column(name))

    def accumulated_columns(self) -> dict[str, np.ndarray]:
        return {c[1:]: self.accumulated(c) for c in self.columns() if c.startswith("d")}

    def summary(self) -> dict:
        acc = {k: float(v[-1]) for k, v in self.accumulated_columns().items()} if self.rows else {}
        peaks = {c: float(np.max(self.column(c))) for c in self.columns() if c.startswith("W")} if self.rows else {}
        return {
            "run_id": self.run_id,
            "parameters": {"eps": self.family.eps, "b": self.family.b, "v": self.v, "alpha": self.alpha,
                           "js": list(self.js), "ms": list(self.ms), "delta": self.delta,
                           "decay_js": list(self.decay_js), "R": self.R, "r": self.r},
            "accumulated": acc,
            "max": peaks,
            "samples": len(self.rows),
        }

    def write(self, out_dir: str | os.PathLike, extra: dict | None = None):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        acc = self.accumulated_columns()
        cols = self.columns()
        with open(out / "diagnostics.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols + list(acc))
            for i, row in enumerate(self.rows):
                w.writerow([f"{v:.17g}" for v in row] + [f"{acc[k][i]:.17g}" for k in acc])
        summary = self.summary()
        if extra:
            summary.update(extra)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


class Recorder:
    """Solver hook feeding a :class:`DiagnosticsRecord`."""

    def __init__(self, record: DiagnosticsRecord):
        self.record = record

    def __call__(self, state: SimState, cfg: SimConfig):
        self.record.update(state.u, state.t)


def load_diagnostics(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(Path(path) / "diagnostics.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    return {h: body[:, i] for i, h in enumerate(head)}
