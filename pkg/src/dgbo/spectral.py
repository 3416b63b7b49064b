"""Periodic pseudo-spectral representation and Fourier multipliers.

Functions on the line are approximated on a periodic box ``[-L, L)``.
Spectra are stored in the half-complex (``rfft``) layout; a multiplier is
evaluated on the full symmetric wavenumber table once to check the
reality condition ``m(-k) = conj(m(k))`` and then kept on the non-negative
half. At the Nyquist mode only the real part of a symbol is kept, which
zeroes every odd symbol there (``-i sgn``, odd powers of ``ik``) and keeps
the field real.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "Multiplier",
    "make_grid",
    "apply",
    "fractional_derivative",
    "hilbert",
    "bessel_potential",
    "linear_group",
    "spatial_derivative",
    "d_symbol",
    "hilbert_symbol",
    "bessel_symbol",
    "group_symbol",
    "derivative_symbol",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-half_length, half_length)``."""

    half_length: float
    n: int
    dealias_cut: float = 2.0 / 3.0
    x: np.ndarray = field(init=False, repr=False, compare=False)
    k: np.ndarray = field(init=False, repr=False, compare=False)
    k_full: np.ndarray = field(init=False, repr=False, compare=False)
    dealias_mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.half_length > 0:
            raise ValueError(f"half_length must be positive, got {self.half_length}")
        n = int(self.n)
        if n != self.n or n < 16 or n & (n - 1):
            raise ValueError(f"point count must be a power of two >= 16, got {self.n}")
        if not 0 < self.dealias_cut <= 1:
            raise ValueError("dealias_cut must lie in (0, 1]")
        L = float(self.half_length)
        x = -L + 2 * L * np.arange(n) / n
        m = np.arange(n // 2 + 1)
        m_full = np.fft.fftfreq(n, 1.0 / n)
        k = np.pi * m / L
        k_full = np.pi * m_full / L
        # 2/3 rule: keep |m| < cut * N/2
        mask = m < self.dealias_cut * (n // 2)
        for name, arr in (("x", x), ("k", k), ("k_full", k_full), ("dealias_mask", mask)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dx(self) -> float:
        return 2 * self.half_length / self.n

    @property
    def dk(self) -> float:
        return np.pi / self.half_length

    @property
    def nyquist(self) -> int:
        """Index of the Nyquist mode in the half-complex layout."""
        return self.n // 2

    @property
    def spectral_weights(self) -> np.ndarray:
        """Weights turning ``|rfft|**2`` sums into ``int |f|^2 dx``."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w * self.dx / self.n

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return Field(self, func(self.x))

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.n))


def make_grid(L: float, N: int, dealias_cut: float = 2.0 / 3.0) -> Grid:
    return Grid(L, N, dealias_cut)


class Field:
    """Real samples on a grid with a lazily cached ``rfft`` spectrum."""

    __slots__ = ("grid", "_samples", "_spectrum")
    # make ndarray * Field defer to Field.__rmul__
    __array_ufunc__ = None

    def __init__(self, grid: Grid, samples=None, *, spectrum=None):
        self.grid = grid
        self._samples = None
        self._spectrum = None
        if samples is not None:
            s = np.array(samples, dtype=float)
            if s.shape != (grid.n,):
                raise ValueError(f"expected {grid.n} samples, got shape {s.shape}")
            if not np.all(np.isfinite(s)):
                raise ValueError("field samples must be finite")
            s.setflags(write=False)
            self._samples = s
        elif spectrum is not None:
            c = np.array(spectrum, dtype=complex)
            if c.shape != (grid.n // 2 + 1,):
                raise ValueError(f"expected {grid.n // 2 + 1} coefficients, got {c.shape}")
            # reality: zero mode and Nyquist are real
            c[0] = c[0].real
            c[-1] = c[-1].real
            c.setflags(write=False)
            self._spectrum = c
        else:
            raise ValueError("need samples or spectrum")

    @classmethod
    def from_spectrum(cls, grid: Grid, spectrum) -> "Field":
        return cls(grid, spectrum=spectrum)

    @property
    def samples(self) -> np.ndarray:
        if self._samples is None:
            s = np.fft.irfft(self._spectrum, n=self.grid.n)
            if not np.all(np.isfinite(s)):
                raise FloatingPointError("non-finite values after inverse transform")
            s.setflags(write=False)
            self._samples = s
        return self._samples

    @property
    def spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            c = np.fft.rfft(self._samples)
            c.setflags(write=False)
            self._spectrum = c
        return self._spectrum

    # quadrature
    def integral(self) -> float:
        return float(np.sum(self.samples) * self.grid.dx)

    def mean(self) -> float:
        return float(np.mean(self.samples))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.samples**2) * self.grid.dx))

    def spectral_norm(self) -> float:
        return float(np.sqrt(np.sum(self.grid.spectral_weights * np.abs(self.spectrum) ** 2)))

    def inner(self, other: "Field") -> float:
        return float(np.sum(self.samples * other.samples) * self.grid.dx)

    def boundary_magnitude(self, width: int = 4) -> float:
        s = self.samples
        return float(max(np.max(np.abs(s[:width])), np.max(np.abs(s[-width:]))))

    def dealiased(self) -> "Field":
        return Field.from_spectrum(self.grid, self.spectrum * self.grid.dealias_mask)

    def __call__(self) -> np.ndarray:
        return self.samples

    def _coerce(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.samples
        return other

    def __add__(self, other):
        return Field(self.grid, self.samples + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.samples - self._coerce(other))

    def __rsub__(self, other):
        return Field(self.grid, self._coerce(other) - self.samples)

    def __mul__(self, other):
        return Field(self.grid, self.samples * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.samples / self._coerce(other))

    def __neg__(self):
        return Field(self.grid, -self.samples)

    def __pow__(self, p):
        return Field(self.grid, self.samples**p)

    def __repr__(self):
        return f"Field(N={self.grid.n}, L={self.grid.half_length}, norm={self.norm():.6g})"


class Multiplier:
    """Fourier multiplier given by its symbol on the grid wavenumbers."""

    def __init__(self, grid: Grid, symbol: Callable[[np.ndarray], np.ndarray], name: str = ""):
        self.grid = grid
        self.name = name
        full = np.asarray(symbol(grid.k_full), dtype=complex) * np.ones(grid.n)
        n = grid.n
        pos = full[1 : n // 2]
        neg = full[n - 1 : n // 2 : -1]
        self.real_preserving = bool(np.allclose(neg, np.conj(pos), rtol=1e-13, atol=1e-300)) and abs(
            full[0].imag
        ) <= 1e-13 * max(1.0, abs(full[0]))
        if not self.real_preserving:
            raise ValueError(f"symbol of {name or 'multiplier'} does not map real fields to real fields")
        half = full[: n // 2 + 1].copy()
        # Nyquist mode sits at k = -pi N/(2L) in fftfreq ordering: keep the
        # real part of the symbol evaluated with sgn = +1 there
        half[-1] = np.asarray(symbol(np.array([grid.k[-1]])), dtype=complex).ravel()[0].real
        half[0] = half[0].real
        half.setflags(write=False)
        self.symbol = half

    def __call__(self, f: Field) -> Field:
        return Field.from_spectrum(f.grid, f.spectrum * self.symbol)

    def __matmul__(self, other: "Multiplier") -> "Multiplier":
        out = object.__new__(Multiplier)
        out.grid = self.grid
        out.name = f"{self.name}*{other.name}"
        out.real_preserving = True
        sym = self.symbol * other.symbol
        sym.setflags(write=False)
        out.symbol = sym
        return out

    def __repr__(self):
        return f"Multiplier({self.name!r}, N={self.grid.n})"


# symbols ---------------------------------------------------------------

def d_symbol(s: float) -> Callable[[np.ndarray], np.ndarray]:
    if s < 0:
        raise ValueError(f"order of D^s must be non-negative, got {s}")
    if s == 0:
        return lambda k: np.ones_like(k, dtype=float)
    return lambda k: np.abs(k) ** s


def hilbert_symbol(k: np.ndarray) -> np.ndarray:
    return -1j * np.sign(k)


def bessel_symbol(s: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda k: (1.0 + k * k) ** (s / 2)


def group_symbol(t: float, alpha: float) -> Callable[[np.ndarray], np.ndarray]:
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return lambda k: np.exp(1j * t * np.abs(k) ** (alpha + 1) * k)


def derivative_symbol(j: int) -> Callable[[np.ndarray], np.ndarray]:
    if j < 0 or int(j) != j:
        raise ValueError(f"derivative order must be a non-negative integer, got {j}")
    return lambda k: (1j * k) ** int(j)


# operators -------------------------------------------------------------

def apply(f: Field, symbol: Callable[[np.ndarray], np.ndarray], name: str = "") -> Field:
    return Multiplier(f.grid, symbol, name)(f)


def fractional_derivative(f: Field, s: float) -> Field:
    """``D^s f`` with symbol ``|k|^s``; ``D^0`` is the identity."""
    return apply(f, d_symbol(s), f"D^{s}")


def hilbert(f: Field) -> Field:
    return apply(f, hilbert_symbol, "H")


def bessel_potential(f: Field, s: float) -> Field:
    return apply(f, bessel_symbol(s), f"J^{s}")


def linear_group(f: Field, t: float, alpha: float) -> Field:
    """Free propagator ``S(t)`` of ``u_t = D^{alpha+1} u_x``."""
    return apply(f, group_symbol(t, alpha), f"S({t})")


def spatial_derivative(f: Field, j: int) -> Field:
    return apply(f, derivative_symbol(j), f"d^{j}")
