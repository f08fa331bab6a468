"""Uniform origin-centered square grids and spectral derivative helpers."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from . import _fft
from .errors import ConfigError


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid2D:
    """Origin-centered periodic box [-L/2, L/2)^2 with n points per axis.

    Coordinates are x_i = (i - n/2) h with h = L/n, so x = 0 is always a
    grid point and the box is symmetric up to the missing +L/2 edge.
    """

    n: int
    L: float

    def __post_init__(self):
        if not _is_power_of_two(self.n) or self.n < 4:
            raise ConfigError("grid.n", f"must be a power of two >= 4, got {self.n}")
        if not self.L > 0:
            raise ConfigError("grid.L", f"must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self):
        return (self.n, self.n)

    def axis(self) -> np.ndarray:
        """1D coordinate array, shared by both axes."""
        return (np.arange(self.n) - self.n // 2) * self.h

    def meshgrid(self):
        x = self.axis()
        return np.meshgrid(x, x, indexing="ij")

    def wavenumbers(self):
        """First-derivative wavenumber meshes (KX, KY), Nyquist zeroed.

        The unpaired Nyquist mode cannot carry an odd derivative on an
        even grid; zeroing it keeps spectral gradients of real fields
        real and the discrete integration-by-parts identity exact.
        """
        return _wavenumber_cache(self.n, self.h, zero_nyquist=True)

    def k_squared(self, zero_nyquist: bool = False) -> np.ndarray:
        """|k|^2 multiplier.

        The flow operators square the Nyquist-zeroed derivative (pass
        True) so that kinetic terms are exactly the square of the
        gradient actually applied; norm weights keep the full spectrum.
        """
        kx, ky = _wavenumber_cache(self.n, self.h, zero_nyquist=zero_nyquist)
        return kx**2 + ky**2

    def same_geometry(self, other: "Grid2D") -> bool:
        return self.n == other.n and self.L == other.L


_cache_lock = threading.Lock()
_kcache: dict = {}


def _wavenumber_cache(n: int, h: float, zero_nyquist: bool):
    key = (n, h, zero_nyquist)
    with _cache_lock:
        hit = _kcache.get(key)
    if hit is not None:
        return hit
    k1 = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
    if zero_nyquist and n % 2 == 0:
        k1[n // 2] = 0.0
    kx, ky = np.meshgrid(k1, k1, indexing="ij")
    with _cache_lock:
        _kcache[key] = (kx, ky)
    return kx, ky


def gradient(grid: Grid2D, u: np.ndarray):
    """Spectral gradient; returns (du/dx, du/dy) as complex arrays."""
    kx, ky = grid.wavenumbers()
    uh = _fft.fft2(u)
    return _fft.ifft2(1j * kx * uh), _fft.ifft2(1j * ky * uh)


def laplacian(grid: Grid2D, u: np.ndarray) -> np.ndarray:
    """Spectral Laplacian, consistent with gradient (Nyquist zeroed)."""
    uh = _fft.fft2(u)
    return _fft.ifft2(-grid.k_squared(zero_nyquist=True) * uh)


def integrate(grid: Grid2D, f: np.ndarray):
    """h^2-weighted sum approximating the integral over the box."""
    return grid.h**2 * np.sum(f)


def inner(grid: Grid2D, f: np.ndarray, g: np.ndarray):
    """Discrete L^2 inner product <f, g> with h^2 weight."""
    return grid.h**2 * np.vdot(f, g)


def l2_norm(grid: Grid2D, f: np.ndarray) -> float:
    return float(np.sqrt(grid.h**2 * np.sum(np.abs(f) ** 2)))


def dealias_mask(grid: Grid2D) -> np.ndarray:
    """2/3-rule mask (optional; the solver does not apply it by default)."""
    kx, ky = grid.wavenumbers()
    kmax = np.pi / grid.h
    return (np.abs(kx) <= (2.0 / 3.0) * kmax) & (np.abs(ky) <= (2.0 / 3.0) * kmax)
