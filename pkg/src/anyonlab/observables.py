"""Spectral norms and the average-field energy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _fft
from .errors import GridMismatchError
from .fields import WaveField, current, density, gauge_field
from .grid import gradient
from .kernels import KernelSpectrum, kernel_spectrum


def sobolev_norm(u: WaveField, s: float) -> float:
    """H^s norm (h^2 sum_k (1+|k|^2)^s |u_hat(k)|^2)^(1/2), Parseval-consistent."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    uh = _fft.fft2(u.values)
    k2 = u.grid.k_squared()
    w = (1.0 + k2) ** s if s != 0 else 1.0
    total = np.sum(w * np.abs(uh) ** 2)
    n2 = u.grid.n**2
    return float(np.sqrt(u.grid.h**2 * total / n2))


@dataclass(frozen=True)
class EnergyReport:
    """Average-field energy split into its three quadratic-form pieces."""

    kinetic: float
    cross: float
    quartic: float
    total: float

    def as_tuple(self):
        return (self.total, self.kinetic, self.cross, self.quartic)


def energy_af(u: WaveField, beta: float, kspec: KernelSpectrum) -> EnergyReport:
    """E_R^af[u] = integral |(-i grad + beta A^R[|u|^2]) u|^2.

    Components: kinetic = int |grad u|^2, cross = beta int A.J[u],
    quartic = beta^2 int |A|^2 |u|^2.  The total is cross-checked
    against the direct evaluation of the covariant square.
    """
    if not kspec.grid.same_geometry(u.grid):
        raise GridMismatchError("energy_af: kernel spectrum grid mismatch")
    h2 = u.grid.h**2
    ux, uy = gradient(u.grid, u.values)
    kinetic = h2 * float(np.sum(np.abs(ux) ** 2 + np.abs(uy) ** 2))
    rho = density(u)
    if beta == 0.0:
        rep = EnergyReport(kinetic=kinetic, cross=0.0, quartic=0.0, total=kinetic)
        return rep
    A = gauge_field(rho, kspec)
    j = current(u)
    cross = beta * h2 * float(np.sum(A[0] * j[0] + A[1] * j[1]))
    quartic = beta**2 * h2 * float(np.sum((A[0] ** 2 + A[1] ** 2) * rho))
    total = kinetic + cross + quartic
    d1 = -1j * ux + beta * A[0] * u.values
    d2 = -1j * uy + beta * A[1] * u.values
    direct = h2 * float(np.sum(np.abs(d1) ** 2 + np.abs(d2) ** 2))
    scale = max(abs(direct), 1e-300)
    if abs(direct - total) > 1e-12 * max(scale, 1.0):
        raise AssertionError(
            f"energy split inconsistent with direct evaluation: "
            f"{total!r} vs {direct!r}"
        )
    return EnergyReport(kinetic=kinetic, cross=cross, quartic=quartic, total=total)


def energy_gap_R(u: WaveField, beta: float, R: float) -> float:
    """|E_R^af[u] - E_0^af[u]| with both spectra built on u's grid."""
    if R == 0.0:
        return 0.0
    e_r = energy_af(u, beta, kernel_spectrum(u.grid, R)).total
    e_0 = energy_af(u, beta, kernel_spectrum(u.grid, 0.0)).total
    return abs(e_r - e_0)


def modulus_gradient_energy(u: WaveField, floor: float = 1e-14) -> float:
    """int |grad |u||^2 with |u| = sqrt(|u|^2 + floor), spectral gradient.

    The floor keeps the modulus differentiable at zeros of u and only
    lowers the value, so diamagnetic-type lower bounds are weakened,
    never faked.
    """
    m = np.sqrt(density(u) + floor)
    mx, my = gradient(u.grid, m)
    return u.grid.h**2 * float(np.sum(np.abs(mx) ** 2 + np.abs(my) ** 2))


def h1_reconstruction_bound(report: EnergyReport, beta: float, u: WaveField,
                            kspec: KernelSpectrum) -> float:
    """Triangle-inequality bound ||grad u|| <= sqrt(E) + |beta| ||A u||."""
    rho = density(u)
    A = gauge_field(rho, kspec)
    au = np.sqrt((A[0] ** 2 + A[1] ** 2)) * np.abs(u.values)
    au_norm = float(np.sqrt(u.grid.h**2 * np.sum(au**2)))
    e = max(report.total, 0.0)
    return np.sqrt(e) + abs(beta) * au_norm
