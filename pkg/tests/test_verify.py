import numpy as np
import pytest

from anyonlab.fields import gaussian_wavefield
from anyonlab.grid import Grid2D
from anyonlab.kernels import kernel_spectrum
from anyonlab.verify import (TestFunctionSampler, check_appendix_a,
                             check_three_body_positivity,
                             check_two_body_forms, hierarchy_residual,
                             three_body_weight, _apply_mixed_pair)


class TestSampler:
    def test_normalization_classes(self):
        g = Grid2D(32, 6.0)
        rng = np.random.default_rng(3)
        from anyonlab.observables import sobolev_norm
        s_l2 = TestFunctionSampler(g, smoothness="l2").sample_one_body(rng)
        assert abs(s_l2.norm() - 1.0) < 1e-10
        s_h1 = TestFunctionSampler(g, smoothness="h1").sample_one_body(rng)
        assert abs(sobolev_norm(s_h1, 1.0) - 1.0) < 1e-10
        s_h2 = TestFunctionSampler(g, smoothness="h2").sample_one_body(rng)
        assert abs(sobolev_norm(s_h2, 2.0) - 1e0) < 1e-10

    def test_band_limited(self):
        g = Grid2D(32, 6.0)
        rng = np.random.default_rng(3)
        f = TestFunctionSampler(g, band_fraction=1 / 3).sample_tensor(rng, 1)
        fh = np.fft.fft2(f)
        k1 = 2 * np.pi * np.fft.fftfreq(g.n, d=g.h)
        kmax = np.pi / g.h
        mask = np.abs(k1) > kmax / 3
        assert np.max(np.abs(fh[mask, :])) < 1e-12
        assert np.max(np.abs(fh[:, mask])) < 1e-12


class TestTwoBody:
    def test_report_and_reproducibility(self):
        g = Grid2D(8, 6.0)
        rep1 = check_two_body_forms(g, [0.3, 0.1], samples=20, seed=11)
        rep2 = check_two_body_forms(g, [0.3, 0.1], samples=20, seed=11)
        assert rep1.passed
        assert rep1.worst_margin <= 1e-10
        assert rep1.to_dict() == rep2.to_dict()

    def test_zero_function_zero_forms(self):
        g = Grid2D(8, 6.0)
        from anyonlab.kernels import grad_perp_minimal_image
        K = grad_perp_minimal_image(g, 0.3)
        f = np.zeros((g.n,) * 4, complex)
        assert np.max(np.abs(_apply_mixed_pair(f, K, g))) == 0.0


class TestThreeBody:
    def test_positivity_and_oracle(self):
        g = Grid2D(8, 6.0)
        rep = check_three_body_positivity(g, 0.3, samples=30, seed=5)
        assert rep.passed
        assert rep.worst_margin <= 1e-10
        assert rep.fitted_constants["factorized_oracle_gap"] < 1e-10

    def test_zero_function(self):
        g = Grid2D(8, 6.0)
        w = three_body_weight(g, 0.3)
        f = np.zeros((g.n,) * 6)
        assert g.h**6 * np.sum(w * np.abs(f) ** 2) == 0.0

    def test_reproducible(self):
        g = Grid2D(8, 6.0)
        a = check_three_body_positivity(g, 0.3, samples=10, seed=9).to_dict()
        b = check_three_body_positivity(g, 0.3, samples=10, seed=9).to_dict()
        assert a == b


class TestAppendixA:
    def test_bounds_hold(self):
        g = Grid2D(64, 8.0)
        rep = check_appendix_a(g, [0.3, 0.1], beta=0.2, samples=25, seed=2)
        assert rep.passed
        assert rep.worst_margin <= 1e-8
        assert rep.fitted_constants["real_identity_relative_gap"] < 1e-10


class TestHierarchy:
    def test_free_exact(self):
        g = Grid2D(64, 12.8)
        phi = gaussian_wavefield(g, 1.0)
        assert hierarchy_residual(phi, 0.0, 0.1) < 1e-14

    def test_product_ansatz_closes(self):
        g = Grid2D(128, 12.8)
        phi = gaussian_wavefield(g, 1.0)
        ks = kernel_spectrum(g, 0.1)
        assert hierarchy_residual(phi, 0.2, 0.1, ks) < 1e-8

    def test_perturbation_detected(self):
        g = Grid2D(128, 12.8)
        phi = gaussian_wavefield(g, 1.0)
        ks = kernel_spectrum(g, 0.1)
        chi = gaussian_wavefield(g, 0.5, center=(1.5, -0.9),
                                 momentum=(2 * np.pi / g.L * 4, 0.0))
        assert hierarchy_residual(phi, 0.2, 0.1, ks,
                                  perturbation=(chi, 0.1)) > 1e-3
