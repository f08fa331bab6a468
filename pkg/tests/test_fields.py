import numpy as np
import pytest

from anyonlab.errors import GridMismatchError
from anyonlab.fields import (WaveField, boundary_adequate,
                             boundary_frame_mass, convolve_dot, current,
                             density, gauge_divergence_residual, gauge_field,
                             gaussian_wavefield, scalar_term)
from anyonlab.grid import Grid2D, l2_norm
from anyonlab.kernels import kernel_spectrum


@pytest.fixture(scope="module")
def grid():
    return Grid2D(128, 12.8)


class TestDensity:
    def test_zero(self, grid):
        u = WaveField(grid, np.zeros(grid.shape, complex))
        assert np.all(density(u) == 0)

    def test_normalized_mass(self, grid):
        u = gaussian_wavefield(grid, 1.0)
        assert grid.h**2 * density(u).sum() == pytest.approx(1.0, abs=1e-10)

    def test_plane_wave_constant(self, grid):
        xx, yy = grid.meshgrid()
        k = 2 * np.pi / grid.L
        u = WaveField(grid, 0.5 * np.exp(1j * k * (3 * xx - yy)))
        np.testing.assert_allclose(density(u), 0.25, atol=1e-15)


class TestCurrent:
    def test_real_field_zero(self, grid):
        u = gaussian_wavefield(grid, 1.0)
        assert np.max(np.abs(current(u))) < 1e-12

    def test_modulated_plane_wave(self, grid):
        # envelope must be contained well below 1e-10 at the box edge,
        # otherwise its aliased tail breaks the modulation identity
        xx, yy = grid.meshgrid()
        k = (2 * np.pi / grid.L * 4, 2 * np.pi / grid.L * (-3))
        f = np.exp(-(xx**2 + yy**2))
        u = WaveField(grid, f * np.exp(1j * (k[0] * xx + k[1] * yy)))
        j = current(u)
        np.testing.assert_allclose(j[0], 2 * k[0] * f**2, atol=1e-10)
        np.testing.assert_allclose(j[1], 2 * k[1] * f**2, atol=1e-10)

    def test_total_current_equals_momentum(self, grid):
        # normalized Gaussian times e^{ikx}: integral of J = 2k
        k = (2 * np.pi / grid.L * 5, 2 * np.pi / grid.L * 2)
        u = gaussian_wavefield(grid, 1.0, momentum=k)
        j = current(u)
        tot = grid.h**2 * j.sum(axis=(1, 2))
        np.testing.assert_allclose(tot, [2 * k[0], 2 * k[1]], atol=1e-8)


class TestGaugeField:
    def test_newton_oracle(self):
        g = Grid2D(128, 16.0)
        s = 1.0
        xx, yy = g.meshgrid()
        r2 = xx**2 + yy**2
        rho = np.exp(-r2 / (2 * s * s)) / (2 * np.pi * s * s)
        A = gauge_field(rho, kernel_spectrum(g, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            m = 1.0 - np.exp(-r2 / (2 * s * s))
            ax = np.where(r2 > 0, -yy / r2 * m, 0.0)
            ay = np.where(r2 > 0, xx / r2 * m, 0.0)
        inner = (np.abs(xx) <= g.L / 4) & (np.abs(yy) <= g.L / 4)
        num = np.sqrt(((A[0] - ax) ** 2 + (A[1] - ay) ** 2)[inner].sum())
        den = np.sqrt((ax**2 + ay**2)[inner].sum())
        assert num / den < 2e-3

    def test_far_field_multipole(self):
        g = Grid2D(128, 16.0)
        xx, yy = g.meshgrid()
        r2 = xx**2 + yy**2
        rho = np.where(r2 <= (g.L / 16) ** 2, np.exp(-8 * r2), 0.0)
        rho /= g.h**2 * rho.sum()
        A = gauge_field(rho, kernel_spectrum(g, 0.0))
        i0 = g.n // 2 + int(round((g.L / 4) / g.h))
        mag = np.hypot(A[0][i0, g.n // 2], A[1][i0, g.n // 2])
        assert mag == pytest.approx(4.0 / g.L, rel=1e-2)

    def test_linearity(self, grid, rng):
        ks = kernel_spectrum(grid, 0.2)
        r1 = rng.random(grid.shape)
        r2 = rng.random(grid.shape)
        a, b = 0.7, -1.3
        lhs = gauge_field(a * r1 + b * r2, ks)
        rhs = a * gauge_field(r1, ks) + b * gauge_field(r2, ks)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))

    def test_divergence_free(self, grid):
        u = gaussian_wavefield(grid, 1.2)
        ks = kernel_spectrum(grid, 0.15)
        assert gauge_divergence_residual(density(u), ks) < 1e-10

    def test_grid_mismatch(self, grid):
        other = Grid2D(64, 12.8)
        with pytest.raises(GridMismatchError):
            gauge_field(np.zeros(other.shape), kernel_spectrum(grid, 0.1))

    def test_sup_bound_log_scaling(self):
        # max|A^R| / (sqrt|log R| ||u||_H1^2) bounded, non-increasing trend
        from anyonlab.observables import sobolev_norm
        g = Grid2D(128, 12.8)
        u = gaussian_wavefield(g, 0.8, momentum=(1.0, -0.5))
        h1sq = sobolev_norm(u, 1.0) ** 2
        rho = density(u)
        ratios = []
        for R in (1e-1, 1e-2, 1e-3, 1e-4):
            with pytest.warns(UserWarning):
                ks = kernel_spectrum(g, R, cache=False)
            A = gauge_field(rho, ks)
            amax = float(np.max(np.hypot(A[0], A[1])))
            ratios.append(amax / (np.sqrt(abs(np.log(R))) * h1sq))
        assert all(b <= a * 1.05 for a, b in zip(ratios, ratios[1:]))


class TestScalarTerm:
    def test_beta_zero(self, grid):
        u = gaussian_wavefield(grid, 1.0)
        ks = kernel_spectrum(grid, 0.2)
        A = gauge_field(density(u), ks)
        assert np.all(scalar_term(u, A, ks, 0.0) == 0)

    def test_zero_field(self, grid):
        u = WaveField(grid, np.zeros(grid.shape, complex))
        ks = kernel_spectrum(grid, 0.2)
        A = gauge_field(density(u), ks)
        assert np.max(np.abs(scalar_term(u, A, ks, 0.3))) < 1e-30

    def test_brute_force_oracle(self, rng):
        g = Grid2D(32, 6.0)
        ks = kernel_spectrum(g, 0.4)
        n = g.n
        # band-limited random field
        coeff = np.zeros(g.shape, complex)
        coeff[:5, :5] = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        u = WaveField(g, np.fft.ifft2(coeff))
        u = u.normalize()
        A = gauge_field(density(u), ks)
        beta = 0.2
        s = scalar_term(u, A, ks, beta)
        v = 2 * beta * A * density(u) + current(u)
        ke = ks.effective_kernel()
        sb = np.zeros(g.shape)
        for i1 in range(n):
            for i2 in range(n):
                d1 = (i1 - np.arange(n)[:, None]) % (2 * n)
                d2 = (i2 - np.arange(n)[None, :]) % (2 * n)
                sb[i1, i2] = g.h**2 * np.sum(ke[0][d1, d2] * v[0]
                                             + ke[1][d1, d2] * v[1])
        sb *= beta
        assert np.max(np.abs(s - sb)) <= 1e-10 * max(np.max(np.abs(sb)), 1e-30)

    def test_convolve_dot_shape_check(self, grid):
        ks = kernel_spectrum(grid, 0.2)
        with pytest.raises(GridMismatchError):
            convolve_dot(np.zeros((2, 4, 4)), ks)


class TestBoundary:
    def test_narrow_gaussian_adequate(self, grid):
        assert boundary_adequate(gaussian_wavefield(grid, 0.8))

    def test_wide_gaussian_flagged(self, grid):
        u = gaussian_wavefield(grid, grid.L / 3)
        assert boundary_frame_mass(u) > 1e-10
        assert not boundary_adequate(u)
