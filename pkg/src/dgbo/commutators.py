"""Commutator expansion of ``[H D^a; h]`` into a local part plus an L^2-bounded remainder.

With ``a = 2 mu + 1`` and ``H = -hilbert`` (symbol ``i sgn k``)::

    P_n(a) = a sum_{j<=n} c_{2j+1} (-1)^j 4^{-j} D^{mu-j} (h^{(2j+1)} D^{mu-j} .)
    R_n(a) = [H D^a; h] - (P_n(a) - H P_n(a) H) / 2

Note ``H D^a`` has symbol ``i k |k|^{a-1}``, so ``H D^{alpha+2} = D^{alpha+1} d/dx``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb, factorial, prod

import numpy as np

from . import spectral as sp
from .cutoffs import CutoffFamily, bump_cdf, bump_derivative
from .spectral import Field, Grid

__all__ = [
    "coefficients",
    "CommutatorExpansion",
    "expansion_from_cutoff",
    "expansion_from_field",
    "apply_Pn",
    "apply_Rn",
    "commutator",
    "random_band_limited",
    "bound_rhs",
    "bound_check_Rn",
    "BoundReport",
    "localization_identity_terms",
    "localization_identity_residual",
    "separated_support_check",
]


def coefficients(a: float, n: int) -> list[float]:
    """``[c_1, c_3, ..., c_{2n+1}]``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    out = [1.0]
    for j in range(1, n + 1):
        out.append(prod(a * a - (2 * k + 1) ** 2 for k in range(j)) / factorial(2 * j + 1))
    return out


@dataclass
class CommutatorExpansion:
    a: float
    n: int
    h: Field
    # h^{(2j+1)} for j = 0..n, plus h' used by the bound
    h_odd: list = field(repr=False)
    h_prime_fine: Field | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.a > 1:
            raise ValueError(f"a must exceed 1, got {self.a}")
        if len(self.h_odd) != self.n + 1:
            raise ValueError("need h^(2j+1) for j = 0..n")

    @property
    def mu(self) -> float:
        return (self.a - 1) / 2

    @property
    def coefficients(self) -> list[float]:
        return coefficients(self.a, self.n)

    @property
    def grid(self) -> Grid:
        return self.h.grid


def _closure_derivative(x, m, L):
    """m-th derivative of a smooth factor that is 1 on x <= 0.75 L and 0 on x >= 0.95 L."""
    r, xc = 0.1 * L, 0.85 * L
    t = (np.asarray(x, dtype=float) - xc) / r
    if m == 0:
        return 1.0 - bump_cdf(t)
    return -(r ** -m) * bump_derivative(t, m - 1)


def _closed(deriv, L):
    def closed(x, m):
        return sum(comb(m, i) * deriv(x, i) * _closure_derivative(x, m - i, L) for i in range(m + 1))

    return closed


def expansion_from_cutoff(family: CutoffFamily, grid: Grid, a: float, n: int, member: str = "chi2",
                          fine_factor: int = 4, closure: bool = True) -> CommutatorExpansion:
    """Localizer taken from a cutoff family, with closed-form odd derivatives.

    A saturating member jumps from 1 back to 0 across the periodic seam. With
    ``closure`` the member is multiplied by a smooth factor that returns it
    to 0 over ``[0.75 L, 0.95 L]``, so ``h`` is smooth on the circle; every
    derivative and the bound's right-hand side refer to this closed ``h``.
    """
    if member == "chi2":
        deriv = family.chi2_derivative
    elif member == "chi":
        deriv = family.dchi
    else:
        raise ValueError(f"localizer member must be 'chi' or 'chi2', got {member!r}")
    if 2 * n + 1 > family.max_order:
        raise ValueError(f"h^({2 * n + 1}) exceeds the family's max order {family.max_order}")
    L = grid.half_length
    if closure:
        if family.b > 0.7 * L:
            raise ValueError(f"b = {family.b} too close to the seam for the periodic closure (L = {L})")
        deriv = _closed(deriv, L)
    h = Field(grid, deriv(grid.x, 0))
    odd = [Field(grid, deriv(grid.x, 2 * j + 1)) for j in range(n + 1)]
    fine = Grid(fine_factor * L, fine_factor * grid.n)
    return CommutatorExpansion(a, n, h, odd, Field(fine, deriv(fine.x, 1)))


def expansion_from_field(h: Field, a: float, n: int) -> CommutatorExpansion:
    """Localizer given as samples; odd derivatives by spectral differentiation."""
    odd = [sp.spatial_derivative(h, 2 * j + 1) for j in range(n + 1)]
    return CommutatorExpansion(a, n, h, odd, None)


def _hd(f: Field, a: float) -> Field:
    return sp.apply(f, lambda k: 1j * np.sign(k) * np.abs(k) ** a, f"HD^{a}")


def _H(f: Field) -> Field:
    return -sp.hilbert(f)


def _d(f: Field, s: float) -> Field:
    """``|k|^s`` for any real s; the zero mode is dropped when s < 0."""
    if s >= 0:
        return sp.fractional_derivative(f, s)

    def sym(k):
        out = np.zeros_like(k, dtype=float)
        nz = k != 0
        out[nz] = np.abs(k[nz]) ** s
        return out

    return sp.apply(f, sym, f"D^{s}")


def apply_Pn(exp: CommutatorExpansion, f: Field) -> Field:
    mu = exp.mu
    out = np.zeros(f.grid.n)
    for j, (c, hj) in enumerate(zip(exp.coefficients, exp.h_odd)):
        if c == 0.0:
            continue
        order = mu - j
        inner = hj * _d(f, order)
        out += exp.a * c * (-1) ** j * 4.0**-j * _d(inner, order).samples
    return Field(f.grid, out)


def commutator(exp: CommutatorExpansion, f: Field) -> Field:
    """``[H D^a; h] f = H D^a (h f) - h H D^a f``."""
    return _hd(exp.h * f, exp.a) - exp.h * _hd(f, exp.a)


def apply_Rn(exp: CommutatorExpansion, f: Field) -> Field:
    p = apply_Pn(exp, f)
    hph = _H(apply_Pn(exp, _H(f)))
    return commutator(exp, f) - 0.5 * (p - hph)


# boundedness -------------------------------------------------------------

def _seam_window(grid: Grid) -> np.ndarray:
    """Smooth indicator of [-L/2, L/2] rising over width L/4 on each side."""
    L = grid.half_length
    r = L / 8
    x = grid.x
    return bump_cdf((x + L / 2 + r) / r) * bump_cdf((L / 2 + r - x) / r)


def random_band_limited(grid: Grid, rng: np.random.Generator, window: bool = True) -> Field:
    """Unit-norm real field with modes ``|m| <= N/4``.

    The window keeps the field away from the periodic seam, where a
    saturating localizer jumps from 1 back to 0.
    """
    m = np.arange(grid.n // 2 + 1)
    coeff = rng.standard_normal(m.size) + 1j * rng.standard_normal(m.size)
    coeff[m > grid.n // 4] = 0.0
    f = Field.from_spectrum(grid, coeff)
    if window:
        f = f * _seam_window(grid)
    return f / f.norm()


def bound_rhs(exp: CommutatorExpansion, sigma: float = 0.0) -> float:
    """``(2 pi)^{-1/2} || (D^{a+2 sigma} h)^ ||_{L^1}`` with the unitary transform.

    Uses ``|(D^s h)^(xi)| = |xi|^{s-1} |(h')^(xi)|``, which keeps the
    saturating localizer out of the transform.
    """
    hp = exp.h_prime_fine if exp.h_prime_fine is not None else exp.h_odd[0]
    g = hp.grid
    s = exp.a + 2 * sigma
    # continuous transform at xi_m from the DFT (phase dropped by |.|)
    hat = np.abs(np.fft.fft(hp.samples)) * g.dx / np.sqrt(2 * np.pi)
    xi = np.abs(g.k_full)
    integrand = np.zeros_like(xi)
    nz = xi > 0
    integrand[nz] = xi[nz] ** (s - 1) * hat[nz]
    return float(np.sum(integrand) * g.dk / np.sqrt(2 * np.pi))


@dataclass
class BoundReport:
    a: float
    n: int
    sigma: float
    trials: int
    rhs: float
    ratios: list
    c_equals_one: bool

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0

    @property
    def fitted_constant(self) -> float:
        return self.max_ratio

    @property
    def passed(self) -> bool:
        if self.c_equals_one:
            return self.max_ratio <= 1 + 1e-6
        return bool(np.isfinite(self.max_ratio))

    def to_json(self, **kw) -> str:
        return json.dumps(
            {"a": self.a, "n": self.n, "sigma": self.sigma, "trials": self.trials, "rhs": self.rhs,
             "max_ratio": self.max_ratio, "fitted_C": self.fitted_constant,
             "C_equals_one_case": self.c_equals_one, "pass": self.passed},
            **kw,
        )


def _check_window(a, n, sigma):
    s = a + 2 * sigma
    if not (2 * n + 1 <= s <= 2 * n + 3):
        raise ValueError(f"need 2n+1 <= a+2 sigma <= 2n+3, got a={a}, n={n}, sigma={sigma}")
    if a < 1 or sigma < 0:
        raise ValueError("need a >= 1 and sigma >= 0")


def ratio(exp: CommutatorExpansion, f: Field, sigma: float = 0.0, rhs: float | None = None) -> float:
    fn = f.norm()
    if fn == 0:
        return 0.0
    if rhs is None:
        rhs = bound_rhs(exp, sigma)
    g = sp.fractional_derivative(f, sigma) if sigma else f
    out = apply_Rn(exp, g)
    if sigma:
        out = sp.fractional_derivative(out, sigma)
    return out.norm() / (rhs * fn)


def bound_check_Rn(exp: CommutatorExpansion, sigma: float = 0.0, trials: int = 100, seed: int = 0) -> BoundReport:
    """Worst ratio ``||D^s R_n D^s f|| / (bound * ||f||)`` over random fields."""
    _check_window(exp.a, exp.n, sigma)
    rhs = bound_rhs(exp, sigma)
    ratios = []
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        f = random_band_limited(exp.grid, rng)
        ratios.append(ratio(exp, f, sigma, rhs))
    return BoundReport(exp.a, exp.n, sigma, trials, rhs, ratios, exp.a >= 2 * exp.n + 1)


# localization identity ----------------------------------------------------

def localization_identity_terms(f: Field, family: CutoffFamily, alpha: float, member: str = "chi") -> dict:
    """Pieces of the localization identity for ``int phi f D^{alpha+1} f_x``.

    Returns ``lhs``, the smoothing term ``(a/4) int (|D^mu f|^2 + |D^mu Hf|^2) phi'``
    and the remainder term ``(1/2) int f R_0(a) f`` with ``a = alpha + 2``.
    """
    a = alpha + 2
    mu = (alpha + 1) / 2
    exp = expansion_from_cutoff(family, f.grid, a, 0, member=member)
    phi = exp.h
    dphi = exp.h_odd[0]
    lhs = (phi * f).inner(sp.apply(f, lambda k: 1j * k * np.abs(k) ** (alpha + 1)))
    dm = sp.fractional_derivative(f, mu)
    dmh = sp.fractional_derivative(sp.hilbert(f), mu)
    smooth = (a / 4) * ((dm**2 + dmh**2) * dphi).integral()
    rem = 0.5 * f.inner(apply_Rn(exp, f))
    return {"lhs": lhs, "smoothing": smooth, "remainder": rem}


def localization_identity_residual(f: Field, family: CutoffFamily, alpha: float, member: str = "chi",
                                   margin: float | None = None) -> float:
    """``|lhs + smoothing + remainder|``.

    With ``H = -hilbert`` the identity closes with the right-hand side
    negated: ``int phi f D^{alpha+1} f_x = -(smoothing + remainder)``.
    """
    L = f.grid.half_length
    if margin is None:
        margin = 0.05 * L
    if family.eps < -L + margin or family.b > L - margin:
        raise ValueError("support of phi' touches the box boundary")
    t = localization_identity_terms(f, family, alpha, member)
    return abs(t["lhs"] + t["smoothing"] + t["remainder"])


# separated supports -------------------------------------------------------

def _numerical_support(f: Field, tol=1e-12):
    idx = np.nonzero(np.abs(f.samples) > tol)[0]
    if idx.size == 0:
        return None
    return f.grid.x[idx[0]], f.grid.x[idx[-1]]


def separated_support_check(f: Field, g: Field, m: int, s: float, delta: float) -> dict:
    """``||g d^m D^s f||`` against ``||g|| ||f||`` for supports at least ``delta`` apart."""
    sf, sg = _numerical_support(f), _numerical_support(g)
    value = 0.0
    if sf is not None and sg is not None:
        gap = max(sg[0] - sf[1], sf[0] - sg[1])
        if gap < delta:
            raise ValueError(f"supports are {gap:.3g} apart, need at least {delta}")
        value = (g * sp.spatial_derivative(sp.fractional_derivative(f, s), m)).norm()
    denom = g.norm() * f.norm()
    return {"m": m, "s": s, "delta": delta, "norm": value, "ratio": value / denom if denom else 0.0}
