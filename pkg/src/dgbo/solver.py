"""Integrating-factor RK4 for ``u_t = D^{alpha+1} u_x - u u_x`` on a periodic box.

The dispersive part is diagonal in Fourier space with the purely imaginary
symbol ``i k |k|^{alpha+1}`` and is applied exactly through the free group
``S(dt)``; the quadratic term is evaluated in conservative form
``-(1/2) (u^2)_x`` with 2/3-rule truncation before and after the product.
At ``alpha = 1`` the equation is KdV, ``u_t + u_xxx + u u_x = 0``.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import spectral as sp
from .spectral import Field, Grid

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

__all__ = [
    "SimConfig",
    "SimState",
    "Trajectory",
    "BlowUpError",
    "make_initial_data",
    "nonlinear_rhs",
    "conserved",
    "reflect",
    "Stepper",
    "step",
    "run",
    "load_trajectory",
    "soliton_error",
    "richardson_order",
    "reversal_error",
    "initial_field",
    "make_stepper",
]


class BlowUpError(RuntimeError):
    def __init__(self, step_index: int, t: float, snapshot_path: str | None = None,
                 reason: str = "non-finite solution"):
        self.step_index = step_index
        self.t = t
        self.snapshot_path = snapshot_path
        self.reason = reason
        super().__init__(self._message())

    def _message(self):
        msg = f"{self.reason} at step {self.step_index} (t = {self.t:.6g})"
        if self.snapshot_path:
            msg += f"; last good snapshot at {self.snapshot_path}"
        return msg

    def __str__(self):
        return self._message()


@dataclass
class SimConfig:
    alpha: float = 0.5
    L: float = 30.0
    N: int = 1024
    dt: float = 1e-3
    T: float = 1.0
    initial: dict = field(default_factory=lambda: {"kind": "gaussian", "A": 1.0, "x_c": 0.0, "w": 1.0})
    stride: int = 10
    dealias: bool = True
    nonlinear: bool = True
    power: int = 1
    safety: float = 0.5
    # optional damping layer -absorb * sigma(x) u on |x| in [start, start + width] * L
    absorb: float = 0.0
    absorb_start: float = 0.8
    absorb_width: float = 0.1
    mass_tol: float = 1e-8
    hamiltonian_tol: float = 1e-6
    integral_tol: float = 1e-10
    schema: int = SCHEMA_VERSION

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.T < 0:
            raise ValueError(f"T must be non-negative, got {self.T}")
        if 0 < self.T < self.dt:
            raise ValueError(f"need T >= dt, got T={self.T}, dt={self.dt}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.power < 1:
            raise ValueError("power must be >= 1")
        if self.absorb < 0:
            raise ValueError("absorb must be non-negative")
        if self.absorb and not 0 < self.absorb_start < self.absorb_start + self.absorb_width <= 1:
            raise ValueError("absorbing layer must sit inside the box")
        if self.schema != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema {self.schema}")
        Grid(self.L, self.N)

    @property
    def grid(self) -> Grid:
        return Grid(self.L, self.N)

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)


# initial data -------------------------------------------------------------

def _gaussian(x, A=1.0, x_c=0.0, w=1.0):
    return A * np.exp(-(((x - x_c) / w) ** 2))


def _kdv_soliton(x, c=1.0, x_c=0.0):
    return 3 * c / np.cosh(np.sqrt(c) * (x - x_c) / 2) ** 2


def _bo_soliton(x, c=1.0, x_c=0.0):
    return 4 * c / (1 + c**2 * (x - x_c) ** 2)


def _one_sided(x, m=2, x0=0.0, gamma=None, A=1.0, x_c=0.0):
    if gamma is None:
        gamma = m + 0.4
    if gamma <= m:
        raise ValueError(f"gamma = {gamma} <= m = {m}: profile too smooth")
    y = np.maximum(x - x0, 0.0)
    return A * np.exp(-((x - x_c) ** 2)) + A * y**gamma * np.exp(-((x - x0) ** 2))


_PROFILES = {
    "gaussian": _gaussian,
    "kdv_soliton": _kdv_soliton,
    "bo_soliton": _bo_soliton,
    "one_sided": _one_sided,
}


def make_initial_data(kind: str, params: dict | None, grid: Grid, *, reflected: bool = False,
                      decay_tol: float = 1e-12, check_decay: bool = True) -> Field:
    """Sample a named profile; ``reflected`` returns ``u0(-x)``."""
    try:
        func = _PROFILES[kind]
    except KeyError:
        raise ValueError(f"unknown initial data kind {kind!r}; choose from {sorted(_PROFILES)}") from None
    params = dict(params or {})
    x = -grid.x if reflected else grid.x
    u = func(x, **params)
    if check_decay:
        # relative to the peak so amplitude scaling does not matter
        edge = max(abs(u[0]), abs(u[-1])) / max(np.max(np.abs(u)), 1e-300)
        if edge > decay_tol:
            raise ValueError(f"{kind} profile is {edge:.3e} of its peak at the box boundary (> {decay_tol:g})")
    return Field(grid, u)


def initial_field(cfg: SimConfig) -> Field:
    spec = dict(cfg.initial)
    kind = spec.pop("kind")
    reflected = bool(spec.pop("reflected", False))
    check = bool(spec.pop("check_decay", True))
    return make_initial_data(kind, spec, cfg.grid, reflected=reflected, check_decay=check)


def reflect(u: Field) -> Field:
    """``u(-x)`` on the symmetric grid (index j -> N - j mod N)."""
    s = u.samples
    return Field(u.grid, np.roll(s[::-1], 1))


# right-hand side and invariants -------------------------------------------

class Stepper:
    """Precomputed symbols for one (grid, alpha, dt)."""

    def __init__(self, grid: Grid, alpha: float, dt: float, dealias: bool = True,
                 nonlinear: bool = True, power: int = 1, damping: np.ndarray | None = None):
        self.grid = grid
        self.damping = damping
        self.alpha = alpha
        self.dt = dt
        self.nonlinear = nonlinear
        self.power = power
        self.e_half = sp.Multiplier(grid, sp.group_symbol(dt / 2, alpha), "S(dt/2)").symbol
        self.e_full = sp.Multiplier(grid, sp.group_symbol(dt, alpha), "S(dt)").symbol
        self.ik = sp.Multiplier(grid, sp.derivative_symbol(1), "d").symbol
        self.mask = grid.dealias_mask.astype(float) if dealias else np.ones(grid.n // 2 + 1)
        self.last_max = 0.0

    def rhs_hat(self, uh: np.ndarray) -> np.ndarray:
        n = self.grid.n
        out = np.zeros_like(uh)
        if self.nonlinear:
            u = np.fft.irfft(uh * self.mask, n=n)
            self.last_max = float(np.max(np.abs(u)))
            p = self.power
            w = u * u if p == 1 else u ** (p + 1)
            out = -(1.0 / (p + 1)) * self.ik * np.fft.rfft(w) * self.mask
        if self.damping is not None:
            out = out - np.fft.rfft(self.damping * np.fft.irfft(uh, n=n))
        return out

    def step_hat(self, uh: np.ndarray) -> np.ndarray:
        if not self.nonlinear and self.damping is None:
            return self.e_full * uh
        dt, E, E2 = self.dt, self.e_half, self.e_full
        a = self.rhs_hat(uh)
        b = self.rhs_hat(E * (uh + 0.5 * dt * a))
        c = self.rhs_hat(E * uh + 0.5 * dt * b)
        d = self.rhs_hat(E2 * uh + dt * E * c)
        return E2 * uh + (dt / 6) * (E2 * a + 2 * E * (b + c) + d)


def damping_profile(cfg: SimConfig) -> np.ndarray | None:
    """Smooth absorbing layer near the seam, or None when disabled.

    Left-going dispersive radiation otherwise wraps around the periodic box
    and re-enters from the right, which the real line never does.
    """
    if not cfg.absorb:
        return None
    from .cutoffs import bump_cdf

    g = cfg.grid
    L = g.half_length
    half = 0.5 * cfg.absorb_width * L
    return cfg.absorb * bump_cdf((np.abs(g.x) - cfg.absorb_start * L - half) / half)


def make_stepper(cfg: SimConfig) -> "Stepper":
    return Stepper(cfg.grid, cfg.alpha, cfg.dt, cfg.dealias, cfg.nonlinear, cfg.power, damping_profile(cfg))


def nonlinear_rhs(u: Field, power: int = 1, dealias: bool = True) -> Field:
    """``-u^p u_x`` in conservative form ``-(u^{p+1})_x / (p+1)``, dealiased."""
    st = Stepper(u.grid, 0.0, 1.0, dealias=dealias, power=power)
    return Field.from_spectrum(u.grid, st.rhs_hat(u.spectrum))


def conserved(u: Field, alpha: float) -> tuple[float, float, float]:
    """``(int u, int u^2, (1/2) int |D^{(1+alpha)/2} u|^2 - (1/6) int u^3)``."""
    d = sp.fractional_derivative(u, (1 + alpha) / 2)
    s = u.samples
    dx = u.grid.dx
    I = float(np.sum(s) * dx)
    M = float(np.sum(s * s) * dx)
    H = float(0.5 * np.sum(d.samples**2) * dx - np.sum(s**3) * dx / 6)
    return I, M, H


# time stepping ------------------------------------------------------------

@dataclass
class SimState:
    t: float
    u: Field
    step_index: int = 0
    conserved0: tuple | None = None


def _cfl_limit(grid: Grid, umax: float, safety: float) -> float:
    return safety * grid.dx / max(1.0, umax)


def step(state: SimState, cfg: SimConfig, stepper: Stepper | None = None) -> SimState:
    """Advance one step of size ``cfg.dt``."""
    if stepper is None:
        stepper = make_stepper(cfg)
    umax = float(np.max(np.abs(state.u.samples)))
    if cfg.nonlinear and cfg.dt > _cfl_limit(state.u.grid, umax, cfg.safety):
        msg = f"dt = {cfg.dt:g} violates the advective CFL limit {_cfl_limit(state.u.grid, umax, cfg.safety):.3g}"
        if state.step_index == 0:
            raise ValueError(msg)
        # the solution grew past what the step size can resolve
        raise BlowUpError(state.step_index, state.t, reason=msg)
    uh = stepper.step_hat(state.u.spectrum)
    k = state.step_index + 1
    if not np.all(np.isfinite(uh)):
        raise BlowUpError(k, k * cfg.dt)
    u = Field.from_spectrum(state.u.grid, uh)
    if not np.all(np.isfinite(u.samples)):
        raise BlowUpError(k, k * cfg.dt)
    return SimState(k * cfg.dt, u, k, state.conserved0)


@dataclass
class Trajectory:
    config: SimConfig
    times: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    snapshots: list = field(default_factory=list, repr=False)
    series: list = field(default_factory=list, repr=False)
    drift_flags: dict = field(default_factory=dict)
    path: Path | None = None

    @property
    def grid(self) -> Grid:
        return self.config.grid

    @property
    def final(self) -> Field:
        return self.snapshots[-1]

    def drift(self) -> dict:
        I0, M0, H0 = self.series[0][1:4]
        I, M, H = (np.array([r[i] for r in self.series]) for i in (1, 2, 3))
        scale = np.sum(np.abs(self.snapshots[0].samples)) * self.grid.dx
        return {
            "I": float(np.max(np.abs(I - I0)) / (abs(I0) if I0 != 0 else max(scale, 1e-300))),
            "M": float(np.max(np.abs(M - M0)) / M0) if M0 else 0.0,
            "H": float(np.max(np.abs(H - H0)) / abs(H0)) if H0 else float(np.max(np.abs(H - H0))),
        }


SERIES_COLUMNS = ("t", "I", "M", "H", "max_abs_u", "boundary")


def _series_row(t, u: Field, alpha):
    I, M, H = conserved(u, alpha)
    return (t, I, M, H, float(np.max(np.abs(u.samples))), u.boundary_magnitude())


def run(cfg: SimConfig, hooks: Sequence[Callable] = (), out_dir: str | os.PathLike | None = None,
        u0: Field | None = None, keep_snapshots: bool = True) -> Trajectory:
    """Integrate to ``cfg.T`` calling each hook as ``hook(state, cfg)`` on schedule.

    Scheduled times are every ``cfg.stride`` steps plus the final step.
    """
    grid = cfg.grid
    u = initial_field(cfg) if u0 is None else u0
    stepper = make_stepper(cfg)
    state = SimState(0.0, u, 0, conserved(u, cfg.alpha))
    traj = Trajectory(cfg)
    if out_dir is not None:
        traj.path = Path(out_dir)
        (traj.path / "snapshots").mkdir(parents=True, exist_ok=True)
        (traj.path / "config.json").write_text(cfg.to_json() + "\n")

    def record(st: SimState):
        traj.times.append(st.t)
        traj.steps.append(st.step_index)
        traj.series.append(_series_row(st.t, st.u, cfg.alpha))
        if keep_snapshots or len(traj.snapshots) < 2:
            traj.snapshots.append(st.u)
        else:
            traj.snapshots[-1] = st.u
        if traj.path is not None:
            _write_snapshot(traj.path, st)
        for hook in hooks:
            hook(st, cfg)

    record(state)
    nsteps = cfg.steps
    for i in range(nsteps):
        try:
            state = step(state, cfg, stepper)
        except BlowUpError as err:
            if traj.path is not None:
                err.snapshot_path = str(_snapshot_name(traj.path, traj.steps[-1]))
            _finish(traj, cfg)
            raise
        if state.step_index % cfg.stride == 0 or state.step_index == nsteps:
            record(state)
    _finish(traj, cfg)
    return traj


def _finish(traj: Trajectory, cfg: SimConfig):
    d = traj.drift()
    traj.drift_flags = {
        "M": d["M"] > cfg.mass_tol,
        # H is only invariant under the full nonlinear flow
        "H": cfg.nonlinear and d["H"] > cfg.hamiltonian_tol,
        "I": d["I"] > cfg.integral_tol,
    }
    # a damping layer removes mass by design
    emit = log.info if cfg.absorb > 0 else log.warning
    for name, flagged in traj.drift_flags.items():
        if flagged:
            emit("conserved quantity %s drifted by %.3e", name, d[name])
    if traj.path is not None:
        with open(traj.path / "series.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SERIES_COLUMNS)
            for row in traj.series:
                w.writerow([f"{v:.17g}" for v in row])


def _snapshot_name(path: Path, step_index: int) -> Path:
    return path / "snapshots" / f"{step_index:08d}.bin"


def _write_snapshot(path: Path, st: SimState):
    st.u.samples.astype("<f8").tofile(_snapshot_name(path, st.step_index))


def load_trajectory(path: str | os.PathLike) -> Trajectory:
    path = Path(path)
    cfg = SimConfig.from_dict(json.loads((path / "config.json").read_text()))
    traj = Trajectory(cfg, path=path)
    grid = cfg.grid
    for snap in sorted((path / "snapshots").glob("*.bin")):
        k = int(snap.stem)
        traj.steps.append(k)
        traj.times.append(k * cfg.dt)
        traj.snapshots.append(Field(grid, np.fromfile(snap, dtype="<f8")))
    with open(path / "series.csv") as fh:
        rows = list(csv.reader(fh))
    traj.series = [tuple(float(v) for v in r) for r in rows[1:]]
    return traj


# anchors -------------------------------------------------------------------

def soliton_error(N: int = 512, L: float = 30.0, dt: float = 1e-3, T: float = 1.0, c: float = 1.0) -> float:
    """L2 distance after time T between the evolved KdV soliton and its exact translate."""
    cfg = SimConfig(alpha=1.0, L=L, N=N, dt=dt, T=T, initial={"kind": "kdv_soliton", "c": c}, stride=10**9)
    final = run(cfg, keep_snapshots=False).final
    exact = make_initial_data("kdv_soliton", {"c": c, "x_c": c * T}, cfg.grid, check_decay=False)
    return (final - exact).norm()


def richardson_order(cfg: SimConfig, dts: Sequence[float]) -> list[float]:
    """Observed orders ``log2(|u_h - u_{h/2}| / |u_{h/2} - u_{h/4}|)`` for halving steps."""
    finals = [run(cfg.with_(dt=dt, stride=10**9), keep_snapshots=False).final for dt in dts]
    diffs = [(a - b).norm() for a, b in zip(finals, finals[1:])]
    return [float(np.log2(d0 / d1) / np.log2(h0 / h1))
            for d0, d1, h0, h1 in zip(diffs, diffs[1:], dts, dts[1:])]


def reversal_error(cfg: SimConfig) -> float:
    """Evolve to T, reflect, evolve again, reflect back; L2 distance to the data.

    ``v(x, t) = u(-x, -t)`` solves the same equation, so this runs time backwards.
    """
    u0 = initial_field(cfg)
    quiet = cfg.with_(stride=10**9)
    uT = run(quiet, u0=u0, keep_snapshots=False).final
    back = run(quiet, u0=reflect(uT), keep_snapshots=False).final
    return (reflect(back) - u0).norm()
