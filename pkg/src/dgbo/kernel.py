"""Dyadic oscillatory kernel of the free group and its pointwise majorant.

``I_k(x, t) = int exp(i (t xi |xi|^{alpha+1} + x xi)) psi_k(xi) d xi`` with
``psi_k`` a bump on ``[2^{k-1}, 2^{k+1}]`` is compared with the piecewise
majorant ``H_k(x)``: ``2^k`` for ``|x| <= 1``, ``2^{k/2} |x|^{-1/2}`` up to
``c 2^{k(alpha+1)}`` and ``(1 + x^2)^{-1}`` beyond.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cutoffs import bump

__all__ = [
    "dyadic_bump",
    "kernel_integral",
    "majorant",
    "default_c",
    "lattice_sum",
    "KernelReport",
    "oscillatory_kernel_check",
    "lattice_sum_check",
]

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(12)


def dyadic_bump(xi, k: int):
    """Bump supported in ``[2^{k-1}, 2^{k+1}]`` with mass ``0.75 * 2^k``."""
    c, r = 1.25 * 2.0**k, 0.75 * 2.0**k
    return bump((np.asarray(xi, dtype=float) - c) / r)


def default_c(alpha: float) -> float:
    """Threshold constant beyond which no stationary point exists for |t| <= 2."""
    return (alpha + 2) * 2.0 ** (alpha + 3)


def kernel_integral(x: float, t: float, k: int, alpha: float, chunk: int = 200_000) -> complex:
    """Composite Gauss-Legendre with panels no longer than a quarter of the
    shortest local period of the phase."""
    if abs(t) > 2:
        raise ValueError(f"|t| = {abs(t)} > 2")
    lo, hi = 2.0 ** (k - 1), 2.0 ** (k + 1)
    fastest = abs(t) * (alpha + 2) * hi ** (alpha + 1) + abs(x)
    h_max = np.pi / (2 * max(fastest, 1.0))
    panels = max(int(np.ceil((hi - lo) / h_max)), 64)
    edges = np.linspace(lo, hi, panels + 1)
    total = 0.0 + 0.0j
    for s in range(0, panels, chunk):
        e = min(s + chunk, panels)
        a = edges[s:e][:, None]
        b = edges[s + 1 : e + 1][:, None]
        xi = 0.5 * (a + b) + 0.5 * (b - a) * _NODES
        phase = t * xi ** (alpha + 2) + x * xi
        vals = np.exp(1j * phase) * dyadic_bump(xi, k)
        total += np.sum(0.5 * (b - a) * (vals @ _WEIGHTS[:, None]))
    return complex(total)


def majorant(x, k: int, alpha: float, c: float | None = None):
    if c is None:
        c = default_c(alpha)
    ax = np.abs(np.asarray(x, dtype=float))
    cut = c * 2.0 ** (k * (alpha + 1))
    with np.errstate(divide="ignore"):
        mid = 2.0 ** (k / 2) / np.sqrt(ax)
    return np.where(ax <= 1, 2.0**k, np.where(ax <= cut, mid, 1.0 / (1.0 + ax * ax)))


def lattice_sum(k: int, alpha: float, c: float | None = None) -> float:
    """``sum_{l in Z} H_k(|l|)``; the ``(1+l^2)^{-1}`` tail is summed in closed form."""
    if c is None:
        c = default_c(alpha)
    cut = int(np.floor(c * 2.0 ** (k * (alpha + 1))))
    l = np.arange(1, cut + 1, dtype=float)
    head = float(np.sum(majorant(l, k, alpha, c)))
    full_tail = (np.pi / np.tanh(np.pi) - 1) / 2
    tail = full_tail - float(np.sum(1.0 / (1.0 + l * l)))
    return 2.0**k + 2 * (head + tail)


@dataclass
class KernelReport:
    alpha: float
    c: float
    constants: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict, repr=False)

    @property
    def spread(self) -> float:
        v = list(self.constants.values())
        return max(v) / min(v)

    def stable(self, factor: float = 2.0) -> bool:
        return self.spread <= factor

    def to_json(self, **kw) -> str:
        return json.dumps(
            {"alpha": self.alpha, "c": self.c,
             "fitted_C": {str(k): v for k, v in self.constants.items()},
             "spread": self.spread, "stable_within_2": self.stable()},
            **kw,
        )


def sample_points(k: int, alpha: float, count: int, seed: int = 0, c: float | None = None):
    """``count`` (x, t) pairs: t uniform on [-2, 2], |x| log-uniform up to 4 c 2^{k(alpha+1)}."""
    if c is None:
        c = default_c(alpha)
    rng = np.random.default_rng([seed, k, int(round(alpha * 1000))])
    t = rng.uniform(-2, 2, count)
    top = np.log10(4 * c * 2.0 ** (k * (alpha + 1)))
    x = 10 ** rng.uniform(-1, top, count) * rng.choice([-1.0, 1.0], count)
    return x, t


def oscillatory_kernel_check(ks=(3, 4, 5), alpha: float = 0.5, count: int = 50, seed: int = 0,
                             c: float | None = None, x_samples=None, t_samples=None) -> KernelReport:
    """Smallest C with ``|I_k| <= C H_k`` over the sample set, per k."""
    if c is None:
        c = default_c(alpha)
    rep = KernelReport(alpha, c)
    for k in ks:
        if x_samples is None:
            xs, ts = sample_points(k, alpha, count, seed, c)
        else:
            xs, ts = np.asarray(x_samples, float), np.asarray(t_samples, float)
        vals = np.array([abs(kernel_integral(x, t, k, alpha)) for x, t in zip(xs, ts)])
        ratios = vals / majorant(xs, k, alpha, c)
        rep.constants[k] = float(np.max(ratios))
        rep.samples[k] = (xs, ts, vals)
    return rep


def lattice_sum_check(ks=(3, 4, 5, 6), alpha: float = 0.5, c: float | None = None) -> dict:
    """Ratios ``sum_l H_k(|l|) / 2^{k(alpha+1)/2}`` and their fitted growth rate in k."""
    ratios = {k: lattice_sum(k, alpha, c) / 2.0 ** (k * (alpha + 1) / 2) for k in ks}
    kk = np.array(list(ratios), dtype=float)
    slope = float(np.polyfit(kk, np.log2(list(ratios.values())), 1)[0]) if len(kk) > 1 else 0.0
    spread = max(ratios.values()) / min(ratios.values())
    return {"alpha": alpha, "ratios": ratios, "log2_growth_per_k": slope, "spread": spread,
            "bounded_within_2": spread <= 2.0}
