"""Smeared 2D Coulomb kernel: closed forms, norms, and spectral preparation.

The potential of a unit charge smeared uniformly over the disc of radius
R is log|x| outside the disc (Newton's theorem) and a paraboloid inside.
Its perpendicular gradient

    grad_perp w_R(x) = x_perp / max(R^2, |x|^2),   x_perp = (-x2, x1),

is the building block of the self-generated gauge field.  The R = 0
convention is the point kernel x_perp / |x|^2.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _fft
from .errors import SingularKernelError
from .grid import Grid2D

#: radii at or above e^{-1} fall outside the validity range of the
#: log-divergence estimates exercised by the verify module
SECTION2_RADIUS_LIMIT = math.exp(-1.0)


def validate_radius(R: float) -> float:
    R = float(R)
    if R < 0:
        raise ValueError(f"smearing radius must be nonnegative, got {R}")
    return R


def check_log_estimate_radius(R: float, context: str = "") -> bool:
    """Warn when R is outside (0, e^{-1}); returns True when inside."""
    ok = 0.0 < R < SECTION2_RADIUS_LIMIT
    if not ok:
        warnings.warn(
            f"R = {R} outside (0, e^-1); log-divergence estimates are not "
            f"guaranteed{' in ' + context if context else ''}",
            stacklevel=2,
        )
    return ok


def eval_wR(x, R: float):
    """Smeared Coulomb potential w_R at points x (shape (..., 2))."""
    R = validate_radius(R)
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    if R == 0.0:
        if np.any(r2 == 0.0):
            raise SingularKernelError("w_0 is singular at x = 0")
        return 0.5 * np.log(r2)
    out = np.empty_like(r2)
    inside = r2 < R * R
    out[~inside] = 0.5 * np.log(r2[~inside])
    # uniform-disc potential: continuous with log R at |x| = R
    out[inside] = math.log(R) + (r2[inside] - R * R) / (2.0 * R * R)
    return out


def eval_grad_perp_wR(x, R: float):
    """Perpendicular gradient x_perp / max(R^2, |x|^2), shape (..., 2)."""
    R = validate_radius(R)
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    if R == 0.0:
        if np.any(r2 == 0.0):
            raise SingularKernelError("grad_perp w_0 is singular at x = 0")
        denom = r2
    else:
        denom = np.maximum(R * R, r2)
    perp = np.stack([-x[..., 1], x[..., 0]], axis=-1)
    return perp / denom


def lp_norm_grad_wR(p: float, R: float) -> float:
    """Closed-form L^p(R^2) norm of grad w_R, valid for p > 2, R > 0."""
    if p <= 2:
        raise ValueError(f"L^p norm of grad w_R diverges for p <= 2, got p = {p}")
    R = validate_radius(R)
    if R == 0.0:
        raise ValueError("L^p norm of grad w_R requires R > 0")
    return (4.0 * math.pi * p / (p * p - 4.0)) ** (1.0 / p) * R ** (2.0 / p - 1.0)


def sup_grad_wR(R: float) -> float:
    """Supremum of |grad w_R|, attained on the circle |x| = R."""
    R = validate_radius(R)
    if R == 0.0:
        raise ValueError("grad w_0 is unbounded")
    return 1.0 / R


def _sample_grad_perp(disp_x, disp_y, R: float):
    """Sample grad_perp w_R on displacement meshes, origin set to 0."""
    r2 = disp_x * disp_x + disp_y * disp_y
    if R == 0.0:
        denom = np.where(r2 == 0.0, 1.0, r2)
    else:
        denom = np.maximum(R * R, r2)
    k1 = -disp_y / denom
    k2 = disp_x / denom
    if R == 0.0:
        # Cauchy principal value of the odd kernel over the central cell
        origin = r2 == 0.0
        k1[origin] = 0.0
        k2[origin] = 0.0
    return k1, k2


@dataclass(frozen=True)
class KernelSpectrum:
    """Forward FFT of grad_perp w_R on the zero-padded (doubled) grid.

    ``khat`` has shape (2, 2n, 2n): component index first, then the two
    padded axes.  The padded displacement at wrapped index m is
    (m - 2n) h for m >= n and m h otherwise; the unused -n*h row and
    column are zeroed so the sampled displacement set is symmetric.

    When ``divergence_free`` is set (the default in kernel_spectrum) the
    spectrum is Helmholtz-projected onto its solenoidal part: pointwise
    sampling aliases the continuum transform and leaves an O(h^2)
    longitudinal component, while the underlying kernel is exactly
    divergence-free; the projection removes only that sampling artifact.
    The effective spatial kernel stays real and odd.
    """

    grid: Grid2D
    R: float
    khat: np.ndarray = field(repr=False)
    divergence_free: bool = True

    def __post_init__(self):
        if self.khat.shape != (2, 2 * self.grid.n, 2 * self.grid.n):
            raise ValueError("kernel spectrum shape inconsistent with grid")
        self.khat.setflags(write=False)

    @property
    def padded_shape(self):
        return (2 * self.grid.n, 2 * self.grid.n)

    def khat_half(self):
        """rfft2-compatible half spectrum (valid because the kernel is real)."""
        return self.khat[:, :, : self.grid.n + 1]

    def padded_wavenumbers(self):
        """First-derivative wavenumbers on the padded grid, Nyquist zeroed."""
        return _padded_wavenumbers(self.grid)

    def effective_kernel(self) -> np.ndarray:
        """Spatial kernel realized by the convolution, shape (2, 2n, 2n)."""
        k1 = _fft.ifft2(self.khat[0])
        k2 = _fft.ifft2(self.khat[1])
        resid = max(float(np.max(np.abs(k1.imag))), float(np.max(np.abs(k2.imag))))
        scale = max(float(np.max(np.abs(k1))), 1e-300)
        if resid > 1e-12 * scale:
            raise AssertionError("effective kernel is not real")
        return np.stack([k1.real, k2.real])


def _padded_wavenumbers(grid: Grid2D):
    n2 = 2 * grid.n
    k1 = 2.0 * np.pi * np.fft.fftfreq(n2, d=grid.h)
    k1[n2 // 2] = 0.0
    return np.meshgrid(k1, k1, indexing="ij")


_spectrum_lock = threading.Lock()
_spectrum_cache: dict = {}


def kernel_spectrum(grid: Grid2D, R: float, cache: bool = True,
                    divergence_free: bool = True) -> KernelSpectrum:
    """Build (or fetch) the padded kernel spectrum for free-space convolution."""
    R = validate_radius(R)
    key = (grid.n, grid.L, R, divergence_free)
    if cache:
        with _spectrum_lock:
            hit = _spectrum_cache.get(key)
        if hit is not None:
            return hit
    if 0.0 < R < 2.0 * grid.h:
        warnings.warn(
            f"smearing radius R = {R} under-resolved on grid with h = {grid.h}"
            " (R < 2h)",
            stacklevel=2,
        )
    n = grid.n
    m = np.arange(2 * n)
    t = np.where(m >= n, m - 2 * n, m).astype(float) * grid.h
    dx, dy = np.meshgrid(t, t, indexing="ij")
    k1, k2 = _sample_grad_perp(dx, dy, R)
    # the -n*h displacement is never used by the linear convolution;
    # zeroing it keeps the sample set odd-symmetric
    k1[n, :] = 0.0
    k1[:, n] = 0.0
    k2[n, :] = 0.0
    k2[:, n] = 0.0
    khat = np.stack([_fft.fft2(k1), _fft.fft2(k2)])
    if divergence_free:
        kx, ky = _padded_wavenumbers(grid)
        ksq = kx * kx + ky * ky
        ksq[ksq == 0.0] = 1.0
        longitudinal = (kx * khat[0] + ky * khat[1]) / ksq
        khat[0] -= kx * longitudinal
        khat[1] -= ky * longitudinal
    spec = KernelSpectrum(grid=grid, R=R, khat=khat,
                          divergence_free=divergence_free)
    if cache:
        with _spectrum_lock:
            _spectrum_cache[key] = spec
    return spec


def grad_perp_minimal_image(grid: Grid2D, R: float):
    """Kernel sampled on minimal-image displacements of the unpadded grid.

    Returns shape (2, n, n) indexed by the wrapped displacement
    (i - j) mod n per axis.  Displacement components equal to -L/2 have
    no positive partner and are zeroed to preserve exact oddness.
    """
    R = validate_radius(R)
    if R == 0.0:
        raise ValueError("minimal-image kernel requires R > 0 (grid realizes "
                         "coincident points)")
    n = grid.n
    m = np.arange(n)
    t = np.where(m >= n // 2, m - n, m).astype(float) * grid.h
    dx, dy = np.meshgrid(t, t, indexing="ij")
    k1, k2 = _sample_grad_perp(dx, dy, R)
    seam = n // 2
    k1[seam, :] = 0.0
    k1[:, seam] = 0.0
    k2[seam, :] = 0.0
    k2[:, seam] = 0.0
    return np.stack([k1, k2])
