"""Differentiation of periodic grid fields on a torus cell.

Grid fields are arrays whose first ``2n`` axes are the real grid axes
``(x¹, y¹, x², y², ...)``; any further axes are tensor indices.  A grid axis
may have length 1, meaning the field is constant along it, and derivatives
along such an axis vanish.  This keeps fields that depend on a few real
coordinates cheap on a fine tensor-product grid.

Two stencils share the same FFT machinery:

``spectral``
    Fourier symbols: ∂ -> √-1 κ with the Nyquist mode removed, ∂² -> -κ².
``fd2``
    Second-order centred differences expressed as symbols:
    ∂ -> √-1 sin(κh)/h, ∂² -> -(2 - 2 cos κh)/h².

Mixed partials along distinct axes are products of first-derivative symbols
in both cases.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy import fft as sfft

from .manifolds import TorusDomain

STENCILS = ("spectral", "fd2")


class PeriodicGrid:
    """FFT differentiation on the grid of a :class:`TorusDomain`."""

    def __init__(self, torus: TorusDomain, stencil: str = "spectral"):
        if stencil not in STENCILS:
            raise ValueError(f"unknown stencil {stencil!r}")
        self.torus = torus
        self.stencil = stencil
        self.dim = torus.dim
        self.naxes = 2 * torus.dim

    def __repr__(self):
        return f"PeriodicGrid(grid={self.torus.grid}, stencil={self.stencil!r})"

    @property
    def shape(self) -> tuple:
        return self.torus.grid

    def coords(self) -> tuple:
        return self.torus.coords()

    @cached_property
    def _symbols(self):
        out = []
        for N, L in zip(self.torus.grid, self.torus.periods):
            h = L / N
            kappa = 2 * np.pi * sfft.fftfreq(N, d=h)
            if self.stencil == "spectral":
                first = 1j * kappa
                first[N // 2] = 0.0
                second = -kappa ** 2
            else:
                first = 1j * np.sin(kappa * h) / h
                second = -(2.0 - 2.0 * np.cos(kappa * h)) / h ** 2
            out.append((first, second))
        return out

    def symbol(self, m: int, order: int, length: int) -> np.ndarray:
        """1-D symbol of ∂/∂X_m (order 1) or ∂²/∂X_m² (order 2) for an axis of ``length``."""
        if length == 1:
            return np.zeros(1)
        if length != self.torus.grid[m]:
            raise ValueError(f"axis {m} has length {length}, grid expects {self.torus.grid[m]}")
        return self._symbols[m][order - 1]

    def _apply(self, f, m, order):
        f = np.asarray(f)
        length = f.shape[m]
        if length == 1:
            return np.zeros_like(f, dtype=complex)
        sym = self.symbol(m, order, length)
        shape = [1] * f.ndim
        shape[m] = length
        return sfft.ifft(sfft.fft(f, axis=m) * sym.reshape(shape), axis=m)

    def partial(self, f, m: int) -> np.ndarray:
        """∂f/∂X_m (complex result)."""
        return self._apply(f, m, 1)

    def partial2(self, f, m1: int, m2: int) -> np.ndarray:
        if m1 == m2:
            return self._apply(f, m1, 2)
        return self._apply(self._apply(f, m1, 1), m2, 1)

    def wirtinger(self, f, a: int, conjugate: bool = False) -> np.ndarray:
        """∂f/∂zᵃ (or ∂f/∂z̄ᵃ) on the grid."""
        dx, dy = self.partial(f, 2 * a), self.partial(f, 2 * a + 1)
        return 0.5 * (dx + 1j * dy) if conjugate else 0.5 * (dx - 1j * dy)

    def gradient(self, f, conjugate: bool = False) -> np.ndarray:
        """Stacked Wirtinger gradient with the index as a new trailing axis."""
        parts = [self.wirtinger(f, a, conjugate) for a in range(self.dim)]
        return np.stack(np.broadcast_arrays(*parts), axis=-1)

    def ddbar(self, f, a: int, b: int) -> np.ndarray:
        """∂²f/∂zᵃ∂z̄ᵇ on the grid."""
        xa, ya, xb, yb = 2 * a, 2 * a + 1, 2 * b, 2 * b + 1
        out = self.partial2(f, xa, xb) + self.partial2(f, ya, yb)
        out = out + 1j * (self.partial2(f, xa, yb) - self.partial2(f, ya, xb))
        return 0.25 * out

    def hessian(self, f) -> np.ndarray:
        """Matrix ``[a, b] = ∂_a∂_b̄ f`` as two new trailing axes."""
        n = self.dim
        rows = [np.stack(np.broadcast_arrays(*[self.ddbar(f, a, b) for b in range(n)]), axis=-1)
                for a in range(n)]
        return np.stack(np.broadcast_arrays(*rows), axis=-2)

    def grid_axes(self) -> tuple:
        return tuple(range(self.naxes))

    def mean(self, f) -> np.ndarray:
        """Grid average; reduced (length-1) axes are constant so their mean is exact."""
        return np.mean(f, axis=self.grid_axes())

    def full(self, f) -> np.ndarray:
        f = np.asarray(f)
        return np.broadcast_to(f, self.shape + f.shape[self.naxes:])

    # -- helpers for solvers -------------------------------------------------

    def wave_symbols(self, shape) -> list:
        """Per-axis first-derivative symbols broadcast on a grid of ``shape``."""
        out = []
        for m, length in enumerate(shape[:self.naxes]):
            sym = self.symbol(m, 1, length)
            s = [1] * self.naxes
            s[m] = length
            out.append(sym.reshape(s))
        return out

    def wirtinger_symbols(self, shape) -> list:
        """Symbols of ∂_a on a grid of ``shape`` (∂_b̄ is the conjugate for real wave numbers)."""
        k = self.wave_symbols(shape)
        return [0.5 * (k[2 * a] - 1j * k[2 * a + 1]) for a in range(self.dim)]

    def ddbar_symbol(self, shape, a: int, b: int) -> np.ndarray:
        """Symbol of ∂_a∂_b̄ consistent with :meth:`ddbar` on a grid of ``shape``."""
        k1 = self.wave_symbols(shape)
        k2 = []
        for m, length in enumerate(shape[:self.naxes]):
            sym = self.symbol(m, 2, length)
            s = [1] * self.naxes
            s[m] = length
            k2.append(sym.reshape(s))
        xa, ya, xb, yb = 2 * a, 2 * a + 1, 2 * b, 2 * b + 1

        def p2(m1, m2):
            return k2[m1] if m1 == m2 else k1[m1] * k1[m2]

        return 0.25 * (p2(xa, xb) + p2(ya, yb) + 1j * (p2(xa, yb) - p2(ya, xb)))


def active_shape(*arrays, naxes: int) -> tuple:
    """Broadcast shape of the leading grid axes of several grid fields."""
    return np.broadcast_shapes(*(np.shape(a)[:naxes] for a in arrays))
