"""Mollified cutoff families chi, phi, phi_tilde, psi, eta.

``chi_{eps,b} = rho_eps * nu_{eps,b}`` where ``nu`` is the piecewise-linear
ramp from 0 at ``2 eps`` to 1 at ``b - eps`` and ``rho`` is the unit-mass bump
``C exp(-1/(1-x^2))``.  Writing ``nu`` as a difference of two shifted
positive parts reduces the convolution to the first two antiderivatives of
the bump, which are evaluated with Gauss-Legendre quadrature on ``[-1, t]``
(``t <= 0``; the other half follows from evenness of ``rho``).
Derivatives of order two and higher are closed-form shifts of bump
derivatives.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
import sympy as sp

from .spectral import Field, Grid

__all__ = [
    "bump",
    "bump_derivative",
    "bump_cdf",
    "bump_ramp",
    "chi",
    "chi_derivative",
    "build_chi",
    "CutoffFamily",
    "build_family",
    "verify_properties",
    "shifted_sample",
    "MEMBERS",
    "DEFAULT_MAX_ORDER",
]

DEFAULT_MAX_ORDER = 9
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(100)


def _raw_bump(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


def _raw_left_mass():
    nodes = -1.0 + 0.5 * (_GL_NODES + 1.0)
    return 0.5 * float(np.sum(_GL_WEIGHTS * _raw_bump(nodes)))


_BUMP_MASS = 2.0 * _raw_left_mass()


def bump(x):
    """Even, unit-mass bump supported in (-1, 1)."""
    return _raw_bump(x) / _BUMP_MASS


@lru_cache(maxsize=None)
def _bump_derivative_fn(m: int):
    s = sp.Symbol("s", real=True)
    expr = sp.diff(sp.exp(-1 / (1 - s**2)), s, m)
    return sp.lambdify(s, expr, "numpy")


def bump_derivative(x, m: int):
    """m-th derivative of the normalized bump."""
    if m == 0:
        return bump(x)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    if np.any(inside):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            val = _bump_derivative_fn(m)(x[inside])
        # exp underflow near the support edge leaves 0 * inf
        out[inside] = np.nan_to_num(val, nan=0.0, posinf=0.0, neginf=0.0)
    return out / _BUMP_MASS


def _left_moments(t):
    """(int_{-1}^t rho, int_{-1}^t s rho(s) ds) for t in [-1, 0]."""
    half = (t + 1.0) / 2.0
    nodes = -1.0 + half[..., None] * (_GL_NODES + 1.0)
    vals = bump(nodes)
    m0 = half * np.sum(_GL_WEIGHTS * vals, axis=-1)
    m1 = half * np.sum(_GL_WEIGHTS * vals * nodes, axis=-1)
    return m0, m1


def _moments(t):
    t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    neg = t <= 0
    m0 = np.empty_like(t)
    m1 = np.empty_like(t)
    a0, a1 = _left_moments(np.where(neg, t, -t))
    # evenness of rho: F(t) = 1 - F(-t), M1(t) = M1(-t)
    m0[...] = np.where(neg, a0, 1.0 - a0)
    m1[...] = a1
    return m0, m1


def bump_cdf(t):
    """int_{-inf}^t rho."""
    return _moments(t)[0]


def bump_ramp(t):
    """(rho * max(., 0))(t) = int (t - s)_+ rho(s) ds."""
    t = np.asarray(t, dtype=float)
    m0, m1 = _moments(t)
    out = t * m0 - m1
    return np.where(t >= 1.0, t, np.where(t <= -1.0, 0.0, out))


def _check_params(eps, b):
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if b < 5 * eps * (1 - 1e-12):
        raise ValueError(f"need b >= 5 eps, got eps={eps}, b={b}")


def _ramp_chi(x, eps, b):
    x = np.asarray(x, dtype=float)
    slope = 1.0 / (b - 3 * eps)
    val = slope * eps * (bump_ramp((x - 2 * eps) / eps) - bump_ramp((x - b + eps) / eps))
    # exact plateaus; rounding can otherwise leave 1 +- ulp past b
    return np.where(x >= b, 1.0, np.where(x <= eps, 0.0, np.clip(val, 0.0, 1.0)))


def _ramp_chi_derivative(x, eps, b, j):
    x = np.asarray(x, dtype=float)
    slope = 1.0 / (b - 3 * eps)
    if j == 0:
        return _ramp_chi(x, eps, b)
    if j == 1:
        return slope * (bump_cdf((x - 2 * eps) / eps) - bump_cdf((x - b + eps) / eps))
    m = j - 2
    scale = eps ** (-1 - m)
    return slope * scale * (bump_derivative((x - 2 * eps) / eps, m) - bump_derivative((x - b + eps) / eps, m))


def chi(x, eps, b):
    _check_params(eps, b)
    return _ramp_chi(x, eps, b)


def chi_derivative(x, eps, b, j, max_order=DEFAULT_MAX_ORDER):
    _check_params(eps, b)
    if j < 0 or j > max_order:
        raise ValueError(f"derivative order {j} outside [0, {max_order}]")
    return _ramp_chi_derivative(x, eps, b, j)


def build_chi(eps, b):
    """Evaluator for chi_{eps,b}."""
    _check_params(eps, b)
    return lambda x: _ramp_chi(x, eps, b)


def _step(x, center, radius):
    """Mollified Heaviside rising from 0 to 1 on [center-radius, center+radius]."""
    return bump_cdf((np.asarray(x, dtype=float) - center) / radius)


MEMBERS = ("chi", "chi2", "dchi", "phi", "phi_tilde", "psi", "eta", "eta2")


@dataclass(frozen=True)
class CutoffFamily:
    eps: float
    b: float
    max_order: int = DEFAULT_MAX_ORDER
    smoothness: str = field(default="C-infinity (exp(-1/(1-x^2)) bump)", compare=False)

    def __post_init__(self):
        _check_params(self.eps, self.b)

    def chi(self, x):
        return _ramp_chi(x, self.eps, self.b)

    def dchi(self, x, j=1):
        if j < 0 or j > self.max_order:
            raise ValueError(f"derivative order {j} outside [0, {self.max_order}]")
        return _ramp_chi_derivative(x, self.eps, self.b, j)

    def chi2_derivative(self, x, j):
        """j-th derivative of chi^2 by the Leibniz rule."""
        if j > self.max_order:
            raise ValueError(f"derivative order {j} outside [0, {self.max_order}]")
        x = np.asarray(x, dtype=float)
        derivs = [self.dchi(x, i) for i in range(j + 1)]
        return sum(comb(j, i) * derivs[i] * derivs[j - i] for i in range(j + 1))

    def psi(self, x):
        # 1 on (-inf, eps/4], 0 on [eps/2, inf)
        return 1.0 - _step(x, 3 * self.eps / 8, self.eps / 8)

    def phi(self, x):
        return 1.0 - self.chi(x) - self.psi(x)

    def phi_tilde(self, x):
        r = 1.0 - self.chi(x) ** 2 - self.psi(x)
        if np.min(r) < -1e-12:
            raise ArithmeticError(f"1 - chi^2 - psi = {np.min(r):.3e} < 0: inconsistent construction")
        return np.sqrt(np.maximum(r, 0.0))

    def eta(self, x):
        return np.sqrt(np.maximum(self.chi(x) * self.dchi(x, 1), 0.0))

    def evaluate(self, which: str, x):
        if which == "chi":
            return self.chi(x)
        if which == "chi2":
            return self.chi(x) ** 2
        if which == "dchi":
            return self.dchi(x, 1)
        if which == "eta2":
            return self.chi(x) * self.dchi(x, 1)
        if which in ("phi", "phi_tilde", "psi", "eta"):
            return getattr(self, which)(x)
        raise ValueError(f"unknown family member {which!r}; expected one of {MEMBERS}")

    def sample(self, grid: Grid, which: str = "chi") -> Field:
        return Field(grid, self.evaluate(which, grid.x))


def build_family(eps, b, max_order=DEFAULT_MAX_ORDER) -> CutoffFamily:
    fam = CutoffFamily(eps, b, max_order)
    # fail fast if the partition identities cannot hold
    x = np.linspace(-eps, b + eps, 2001)
    fam.phi_tilde(x)
    return fam


def shifted_sample(family: CutoffFamily, grid: Grid, v: float, t: float, which: str = "chi2",
                   margin: float | None = None) -> Field:
    """Member evaluated at ``x + v t`` on the grid.

    The moving ramp must stay clear of the periodic seam: its left edge
    ``eps - v t`` has to sit above ``-L + margin`` and the saturation point
    ``b - v t`` below ``L - margin``.
    """
    L = grid.half_length
    if margin is None:
        margin = 0.05 * L
    shift = v * t
    left = (family.eps / 4 if which in ("phi", "phi_tilde") else family.eps) - shift
    right = family.b - shift
    if left < -L + margin or right > L - margin:
        raise ValueError(
            f"shifted support [{left:.3g}, {right:.3g}] leaves the box [-{L}+{margin:.3g}, {L}-{margin:.3g}]"
        )
    return Field(grid, family.evaluate(which, grid.x + shift))


# property verification --------------------------------------------------

@dataclass
class PropertyCheck:
    id: str
    bound: str
    margin: float
    passed: bool
    constant: float | None = None

    def as_dict(self):
        d = {"property": self.id, "bound": self.bound, "worst_margin": float(self.margin), "pass": bool(self.passed)}
        if self.constant is not None:
            d["constant"] = float(self.constant)
        return d


@dataclass
class PropertyReport:
    eps: float
    b: float
    samples: int
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(bool(c.passed) for c in self.checks)

    def __getitem__(self, key):
        for c in self.checks:
            if c.id == key:
                return c
        raise KeyError(key)

    def to_json(self, **kw) -> str:
        return json.dumps(
            {"eps": self.eps, "b": self.b, "samples": self.samples, "pass": self.passed,
             "checks": [c.as_dict() for c in self.checks]},
            **kw,
        )


def _fit_ratio(num, den, support):
    """Smallest c with num <= c den on the support, padded by 5%."""
    sel = support & (den > 0)
    if not np.any(sel):
        return 0.0
    return 1.05 * float(np.max(num[sel] / den[sel]))


def verify_properties(family: CutoffFamily, samples: int = 10_000, tol: float = 1e-10,
                      orders=range(1, DEFAULT_MAX_ORDER + 1)) -> PropertyReport:
    """Dense-sample check of the listed cutoff properties.

    Margins are signed: non-negative means the property holds with that much
    room (up to ``tol``).
    """
    eps, b = family.eps, family.b
    x = np.linspace(-2 * eps, b + 3 * eps, samples)
    c = family.chi(x)
    d1 = family.dchi(x, 1)
    wide = CutoffFamily(eps / 3, b + eps)
    cw = wide.chi(x)
    dw = wide.dchi(x, 1)
    psi = family.psi(x)
    phi = family.phi(x)
    pt = family.phi_tilde(x)
    eta = family.eta(x)
    rep = PropertyReport(eps, b, samples)

    def add(pid, bound, margin, constant=None):
        rep.checks.append(PropertyCheck(pid, bound, float(margin), bool(margin >= -tol), constant))

    add("1", "chi' >= 0", np.min(d1))
    left, right = x <= eps, x >= b
    add("2", "chi = 0 on x <= eps, chi = 1 on x >= b",
        -max(np.max(np.abs(c[left])), np.max(np.abs(c[right] - 1))))
    add("3", "supp chi in [eps, inf)", -np.max(np.abs(c[x < eps])))
    mid = (x >= 2 * eps) & (x <= b - 2 * eps)
    add("4", "chi' >= 1/(10(b-eps)) on [2eps, b-2eps]", np.min(d1[mid]) - 1.0 / (10 * (b - eps)))
    add("5", "supp chi' in [eps, b]", -np.max(np.abs(d1[(x < eps) | (x > b)])))
    supp = (x > eps) & (x < b)
    for j in orders:
        dj = np.abs(family.dchi(x, j))
        cj = _fit_ratio(dj, dw, supp)
        outside = np.max(dj[~supp], initial=0.0)
        add(f"6.{j}", f"|chi^({j})| <= c_{j} chi'_(eps/3, b+eps)",
            np.min(cj * dw - dj) if np.isfinite(cj) else -np.inf, cj)
        rep.checks[-1].margin = min(rep.checks[-1].margin, -outside)
        rep.checks[-1].passed = rep.checks[-1].margin >= -tol and np.isfinite(cj)
    right_of = x > 3 * eps
    add("7", "chi >= eps/(2(b-3eps)) on (3eps, inf)", np.min(c[right_of]) - 0.5 * eps / (b - 3 * eps))
    add("8", "chi'_(eps/3, b+eps) <= eps/(b-3eps)", eps / (b - 3 * eps) - np.max(dw))
    prod = dw * cw
    c1 = _fit_ratio(d1, prod, supp)
    add("9a", "chi' <= c1 chi'_(eps/3,b+eps) chi_(eps/3,b+eps)", np.min(c1 * prod - d1), c1)
    small = CutoffFamily(eps / 5, eps).chi(x)
    c2 = _fit_ratio(d1, small, supp)
    add("9b", "chi' <= c2 chi_(eps/5, eps)", np.min(c2 * small - d1), c2)
    add("10", "eta^2 = chi chi' >= 0", min(np.min(c * d1), -np.max(np.abs(eta**2 - c * d1))))
    outside11 = (x < eps / 4) | (x > b)
    add("11", "supp phi, phi_tilde in [eps/4, b]",
        -max(np.max(np.abs(phi[outside11])), np.max(np.abs(pt[outside11]))))
    band = (x >= eps / 2) & (x <= eps)
    add("12", "phi = phi_tilde = 1 on [eps/2, eps]",
        -max(np.max(np.abs(phi[band] - 1)), np.max(np.abs(pt[band] - 1))))
    add("13", "supp psi in (-inf, eps/2]", -np.max(np.abs(psi[x > eps / 2])))
    add("14a", "chi + phi + psi = 1", -np.max(np.abs(c + phi + psi - 1)))
    add("14b", "chi^2 + phi_tilde^2 + psi = 1", -np.max(np.abs(c**2 + pt**2 + psi - 1)))
    # squared-psi reading of the second identity, reported only
    alt = 1.0 - c**2 - psi**2
    add("14b-alt", "chi^2 + phi_alt^2 + psi^2 = 1 with phi_alt = sqrt(1-chi^2-psi^2) >= 0", np.min(alt))
    add("phi>=0", "phi, phi_tilde >= 0", min(np.min(phi), np.min(pt)))
    add("eta2<=chi*max(chi')", "eta^2 <= chi * max chi'", np.min(c * np.max(d1) - eta**2))
    return rep
