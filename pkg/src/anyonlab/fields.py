"""Density, current, self-generated gauge field, and the nonlocal scalar term."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _fft
from .errors import GridMismatchError
from .grid import Grid2D, gradient, l2_norm
from .kernels import KernelSpectrum

#: fraction of total mass allowed in the outer 10% frame of the box
BOUNDARY_MASS_TOLERANCE = 1e-10


@dataclass
class WaveField:
    """Complex scalar field on a Grid2D."""

    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(
                f"field shape {self.values.shape} != grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values.view(float))):
            raise ValueError("wave field contains non-finite values")

    def norm(self) -> float:
        return l2_norm(self.grid, self.values)

    def normalized(self, tol: float = 1e-8) -> bool:
        return abs(self.norm() - 1.0) < tol

    def normalize(self) -> "WaveField":
        return WaveField(self.grid, self.values / self.norm())

    def copy(self) -> "WaveField":
        return WaveField(self.grid, self.values.copy())


def gaussian_wavefield(grid: Grid2D, sigma: float, center=(0.0, 0.0),
                       momentum=(0.0, 0.0)) -> WaveField:
    """Normalized Gaussian u ~ exp(-|x-c|^2/(2 sigma^2) + i k.x)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    xx, yy = grid.meshgrid()
    r2 = (xx - center[0]) ** 2 + (yy - center[1]) ** 2
    phase = momentum[0] * xx + momentum[1] * yy
    vals = np.exp(-r2 / (2.0 * sigma**2) + 1j * phase)
    return WaveField(grid, vals).normalize()


def density(u: WaveField) -> np.ndarray:
    """Pointwise |u|^2."""
    return np.abs(u.values) ** 2


def current(u: WaveField) -> np.ndarray:
    """J[u] = i (u grad(conj u) - conj(u) grad u), shape (2, n, n), real.

    Spectral derivatives; the imaginary residue is asserted small and
    discarded.
    """
    ux, uy = gradient(u.grid, u.values)
    uc = np.conj(u.values)
    j = np.stack([
        1j * (u.values * np.conj(ux) - uc * ux),
        1j * (u.values * np.conj(uy) - uc * uy),
    ])
    scale = max(float(np.max(np.abs(j))), 1.0)
    resid = float(np.max(np.abs(j.imag)))
    if resid > 1e-12 * scale:
        raise ValueError(f"current has imaginary residue {resid:.3e}")
    return np.ascontiguousarray(j.real)


def _check_grids(kspec: KernelSpectrum, grid: Grid2D):
    if not kspec.grid.same_geometry(grid):
        raise GridMismatchError("kernel spectrum and field live on different grids")


def gauge_field(rho: np.ndarray, kspec: KernelSpectrum) -> np.ndarray:
    """Free-space convolution A = grad_perp w_R * rho, shape (2, n, n).

    Zero-padded rfft2 convolution; exact linear convolution of the
    sampled kernel with rho, scaled by h^2.
    """
    n = kspec.grid.n
    if rho.shape != kspec.grid.shape:
        raise GridMismatchError(
            f"density shape {rho.shape} != grid shape {kspec.grid.shape}"
        )
    pad = np.zeros(kspec.padded_shape)
    pad[:n, :n] = rho
    rho_hat = _fft.rfft2(pad)
    kh = kspec.khat_half()
    h2 = kspec.grid.h**2
    a1 = _fft.irfft2(rho_hat * kh[0], s=kspec.padded_shape)[:n, :n]
    a2 = _fft.irfft2(rho_hat * kh[1], s=kspec.padded_shape)[:n, :n]
    return h2 * np.stack([a1, a2])


def convolve_dot(v: np.ndarray, kspec: KernelSpectrum) -> np.ndarray:
    """Scalar contraction (grad_perp w_R * v)(x) = integral K(x-y).v(y) dy."""
    n = kspec.grid.n
    if v.shape != (2, n, n):
        raise GridMismatchError(f"vector density shape {v.shape} != (2, {n}, {n})")
    kh = kspec.khat_half()
    pad = np.zeros(kspec.padded_shape)
    pad[:n, :n] = v[0]
    acc = _fft.rfft2(pad) * kh[0]
    pad[:, :] = 0.0
    pad[:n, :n] = v[1]
    acc += _fft.rfft2(pad) * kh[1]
    out = _fft.irfft2(acc, s=kspec.padded_shape)[:n, :n]
    return kspec.grid.h**2 * out


def scalar_term(u: WaveField, A: np.ndarray, kspec: KernelSpectrum,
                beta: float) -> np.ndarray:
    """beta * [grad_perp w_R * (2 beta A |u|^2 + J[u])], a real scalar field."""
    _check_grids(kspec, u.grid)
    rho = density(u)
    j = current(u)
    return scalar_term_from_parts(rho, j, A, kspec, beta)


def scalar_term_from_parts(rho, j, A, kspec: KernelSpectrum, beta: float):
    if beta == 0.0:
        return np.zeros(kspec.grid.shape)
    v = 2.0 * beta * A * rho + j
    return beta * convolve_dot(v, kspec)


def boundary_frame_mass(u: WaveField, frame_fraction: float = 0.1) -> float:
    """Mass fraction in the outer ``frame_fraction`` frame of the box."""
    x = u.grid.axis()
    cut = (0.5 - frame_fraction) * u.grid.L
    outside = (np.abs(x)[:, None] >= cut) | (np.abs(x)[None, :] >= cut)
    rho = density(u)
    total = float(np.sum(rho))
    if total == 0.0:
        return 0.0
    return float(np.sum(rho[outside]) / total)


def boundary_adequate(u: WaveField, tol: float = BOUNDARY_MASS_TOLERANCE) -> bool:
    return boundary_frame_mass(u) <= tol


def gauge_divergence_residual(rho: np.ndarray, kspec: KernelSpectrum) -> float:
    """||div A||_2 / ||A||_2 evaluated on the padded convolution grid.

    The free-space field restricted to the box is not periodic, so the
    divergence is measured where the convolution lives: on the doubled
    grid, where the sampled kernel is exactly divergence-free by its
    odd dihedral symmetry.
    """
    n = kspec.grid.n
    pad = np.zeros(kspec.padded_shape)
    pad[:n, :n] = rho
    rho_hat = _fft.fft2(pad)
    a1_hat = rho_hat * kspec.khat[0]
    a2_hat = rho_hat * kspec.khat[1]
    kx, ky = kspec.padded_wavenumbers()
    div_hat = 1j * (kx * a1_hat + ky * a2_hat)
    num = float(np.sqrt(np.sum(np.abs(div_hat) ** 2)))
    den = float(np.sqrt(np.sum(np.abs(a1_hat) ** 2 + np.abs(a2_hat) ** 2)))
    if den == 0.0:
        return 0.0
    return num / den
