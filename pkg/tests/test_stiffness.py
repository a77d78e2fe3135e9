import math

import numpy as np
import pytest

from fraclap.core import gauss_legendre
from fraclap.stiffness import (DecayProfile, StiffnessKernel, analytic_1d, ball_radius,
                               decay_profile, fft_uniform, modified_spectral, nonuniform,
                               restrict, spectral, write_decay_csv, write_kernel_csv,
                               _modified_spectral_parts)

# max-norm errors of the 1D kernels against the closed form, N_FD = 81
FFT_ERRORS_1D = {
    (0.1, 2 ** 10): 2.477e-04, (0.25, 2 ** 10): 3.247e-05, (0.5, 2 ** 10): 1.050e-06,
    (0.75, 2 ** 10): 2.609e-08, (0.9, 2 ** 10): 1.713e-09,
    (0.1, 2 ** 14): 8.812e-06, (0.25, 2 ** 14): 4.970e-07, (0.5, 2 ** 14): 3.902e-09,
    (0.75, 2 ** 14): 2.337e-11, (0.9, 2 ** 14): 6.516e-13,
}
NUFFT_ERRORS_1D = {
    (0.1, 2 ** 10): 1.486e-06, (0.25, 2 ** 10): 1.798e-06, (0.5, 2 ** 10): 2.543e-06,
    (0.75, 2 ** 10): 3.597e-06, (0.9, 2 ** 10): 4.428e-06,
    (0.1, 2 ** 14): 5.735e-09, (0.9, 2 ** 14): 1.730e-08,
}
MODSPEC_ERRORS_1D = {
    (0.1, 2 ** 10): 7.550e-07, (0.25, 2 ** 10): 2.962e-07, (0.5, 2 ** 10): 1.050e-06,
    (0.75, 2 ** 10): 2.792e-06, (0.9, 2 ** 10): 4.723e-06,
    (0.1, 2 ** 14): 7.387e-08, (0.25, 2 ** 14): 2.457e-09, (0.5, 2 ** 14): 3.902e-09,
    (0.75, 2 ** 14): 1.037e-08, (0.9, 2 ** 14): 1.755e-08,
}


def max_error_vs_analytic(kernel):
    reference = analytic_1d(kernel.s, kernel.n_fd)
    return float(np.max(np.abs(kernel.coeffs - reference.coeffs)))


def interval_integral_dyadic(f, a, b, order=40, levels=60):
    """Graded quadrature oracle that resolves an algebraic singularity at a."""
    rule = gauss_legendre(order)
    total = 0.0
    hi = b
    for k in range(1, levels + 1):
        lo = a + (b - a) * 2.0 ** (-k)
        x, w = rule.mapped(lo, hi)
        total += w @ f(x)
        hi = lo
    return total


class TestAnalytic1d:
    def test_zero_offset_closed_form(self):
        k = analytic_1d(0.5, 4)
        assert k.coeffs[0] == pytest.approx(4.0 / math.pi, rel=1e-14)

    def test_first_offset_closed_form(self):
        # gamma(2) / (gamma(2.5) gamma(0.5)) = 4 / (3 pi)
        k = analytic_1d(0.5, 4)
        assert k.coeffs[1] == pytest.approx(-4.0 / (3.0 * math.pi), rel=1e-14)
        assert k.coeffs[2] == pytest.approx(-4.0 / (15.0 * math.pi), rel=1e-13)

    def test_fourier_coefficient_oracle(self):
        # the entries are the Fourier coefficients of (4 sin^2(xi/2))^s
        s = 0.35
        k = analytic_1d(s, 3)
        xi = np.linspace(-np.pi, np.pi, 400001)
        psi = (4.0 * np.sin(0.5 * xi) ** 2) ** s
        for p in range(4):
            oracle = np.trapezoid(psi * np.cos(p * xi), xi) / (2.0 * np.pi)
            assert k.coeffs[p] == pytest.approx(oracle, abs=5e-10)

    def test_sign_pattern(self):
        k = analytic_1d(0.3, 50)
        assert k.coeffs[0] > 0
        assert np.all(k.coeffs[1:] < 0)

    def test_large_offsets_stay_finite(self):
        k = analytic_1d(0.7, 3000)
        assert np.all(np.isfinite(k.coeffs))

    def test_decay_slope(self):
        profile = decay_profile(analytic_1d(0.25, 81))
        assert profile.fitted_slope == pytest.approx(-1.5, abs=0.1)


class TestFftUniform:
    @pytest.mark.parametrize("s,m,factor", [(0.5, 2 ** 10, 2.0), (0.75, 2 ** 14, 3.0)])
    def test_reference_errors(self, s, m, factor):
        err = max_error_vs_analytic(fft_uniform(s, 1, 81, m))
        assert err <= factor * FFT_ERRORS_1D[(s, m)]

    def test_2d_direct_double_sum_oracle(self):
        s, n_fd, m = 0.5, 4, 64
        kernel = fft_uniform(s, 2, n_fd, m)
        xi = np.pi * (2.0 * np.arange(m) / m - 1.0)
        psi = (4 * np.sin(xi / 2) ** 2)[:, None] + (4 * np.sin(xi / 2) ** 2)[None, :]
        psi = psi ** s
        for p in (0, 1, 4):
            for q in (0, 3, 8):
                phases = np.exp(2j * np.pi * (p * np.arange(m)[:, None]
                                              + q * np.arange(m)[None, :]) / m)
                oracle = ((-1.0) ** (p + q) / m ** 2) * np.sum(psi * phases)
                assert abs(oracle.imag) < 1e-12
                assert kernel.coeffs[p, q] == pytest.approx(oracle.real, abs=1e-12)

    def test_error_monotone_in_m(self):
        errors = [max_error_vs_analytic(fft_uniform(0.5, 1, 81, 2 ** e))
                  for e in range(8, 15)]
        assert all(a > b for a, b in zip(errors, errors[1:]))

    def test_rejects_small_m(self):
        with pytest.raises(ValueError):
            fft_uniform(0.5, 1, 81, 162)


class TestNonuniform:
    @pytest.mark.parametrize("s,m", [(0.1, 2 ** 10), (0.9, 2 ** 10)])
    def test_reference_errors(self, s, m):
        err = max_error_vs_analytic(nonuniform(s, 1, 81, m))
        assert err <= 2.0 * NUFFT_ERRORS_1D[(s, m)]

    def test_brute_force_oracle(self):
        s, n_fd, m = 0.4, 4, 33
        kernel = nonuniform(s, 1, n_fd, m)
        t = 2.0 * np.arange(m + 1) / m - 1.0
        xi = np.pi * t * t * np.sign(t)
        w = np.empty(m + 1)
        w[1:-1] = 0.5 * (xi[2:] - xi[:-2])
        w[0] = 0.5 * (xi[1] - xi[0])
        w[-1] = 0.5 * (xi[-1] - xi[-2])
        psi = (4.0 * np.sin(0.5 * xi) ** 2) ** s
        for p in range(2 * n_fd + 1):
            oracle = np.sum(w * psi * np.exp(1j * p * xi)) / (2.0 * np.pi)
            assert abs(oracle.imag) < 1e-15
            assert kernel.coeffs[p] == pytest.approx(oracle.real, abs=1e-13)

    @pytest.mark.parametrize("dim,n_fd,m", [(1, 20, 600), (2, 8, 150), (3, 4, 40)])
    def test_gridding_matches_direct(self, dim, n_fd, m):
        direct = nonuniform(0.3, dim, n_fd, m, method="direct")
        gridded = nonuniform(0.3, dim, n_fd, m, method="gridding")
        assert np.max(np.abs(direct.coeffs - gridded.coeffs)) < 1e-10

    def test_rejects_unknown_method(self):
        with pytest.raises(ValueError):
            nonuniform(0.5, 1, 4, 33, method="magic")


class TestSpectral:
    def test_ball_radius(self):
        assert ball_radius(2) == pytest.approx(2.0 * math.sqrt(math.pi), rel=1e-14)
        assert ball_radius(1) == pytest.approx(math.pi, rel=1e-13)
        # equal volume in 3 dimensions: (4 pi / 3) R^3 == (2 pi)^3
        r3 = ball_radius(3)
        assert 4.0 * math.pi / 3.0 * r3 ** 3 == pytest.approx((2 * math.pi) ** 3, rel=1e-12)

    def test_zero_offset_1d(self):
        for s in (0.25, 0.5, 0.8):
            k = spectral(s, 1, 16, 32)
            assert k.coeffs[0] == pytest.approx(math.pi ** (2 * s) / (1 + 2 * s), rel=1e-12)

    def test_1d_against_quadrature_oracle(self):
        # T~_p = pi^{2s} * integral_0^1 x^{2s} cos(p pi x) dx
        s = 0.3
        k = spectral(s, 1, 10, 64)
        for p in (1, 2, 7, 20):
            oracle = math.pi ** (2 * s) * interval_integral_dyadic(
                lambda x: x ** (2 * s) * np.cos(p * math.pi * x), 0.0, 1.0)
            assert k.coeffs[p] == pytest.approx(oracle, rel=1e-9, abs=1e-13)

    def test_decay_slope_1d(self):
        profile = decay_profile(spectral(0.25, 1, 81, 64))
        assert profile.fitted_slope == pytest.approx(-1.5, abs=0.15)

    def test_decay_slope_2d(self):
        profile = decay_profile(spectral(0.5, 2, 81, 64))
        assert profile.fitted_slope == pytest.approx(-1.5, abs=0.3)

    def test_decay_slope_3d(self):
        profile = decay_profile(spectral(0.75, 3, 20, 64))
        assert profile.fitted_slope == pytest.approx(-2.0, abs=0.3)

    def test_rejects_small_order(self):
        with pytest.raises(ValueError):
            spectral(0.5, 2, 8, 3)


class TestModifiedSpectral:
    @pytest.mark.parametrize("s", [0.1, 0.25, 0.5, 0.75, 0.9])
    @pytest.mark.parametrize("m", [2 ** 10, 2 ** 14])
    def test_reference_errors(self, s, m):
        err = max_error_vs_analytic(modified_spectral(s, 1, 81, m, 64))
        assert err <= 3.0 * MODSPEC_ERRORS_1D[(s, m)]

    def test_zero_offset_additivity(self):
        reg, ball = _modified_spectral_parts(0.6, 2, 5, 64, 32)
        combined = modified_spectral(0.6, 2, 5, 64, 32)
        assert combined.coeffs[0, 0] == reg[0, 0] + ball.coeffs[0, 0]

    def test_equals_spectral_without_fft_term(self):
        # the construction is exactly trapezoid-term + ball-term, so forcing
        # the trapezoid term to zero leaves precisely the spectral kernel
        reg, ball = _modified_spectral_parts(0.4, 2, 6, 64, 32)
        combined = modified_spectral(0.4, 2, 6, 64, 32)
        np.testing.assert_array_equal(combined.coeffs, reg + ball.coeffs)
        np.testing.assert_array_equal(np.zeros_like(reg) + ball.coeffs, ball.coeffs)
        assert ball.scheme == "spectral"
        np.testing.assert_array_equal(ball.coeffs, spectral(0.4, 2, 6, 32).coeffs)

    def test_decay_slope_1d(self):
        profile = decay_profile(modified_spectral(0.5, 1, 81, 2 ** 10, 64))
        assert profile.fitted_slope == pytest.approx(-2.0, abs=0.15)


class TestKernelStructure:
    def test_determinism(self):
        for build in (lambda: fft_uniform(0.5, 2, 6, 32),
                      lambda: nonuniform(0.5, 2, 6, 33),
                      lambda: spectral(0.5, 2, 6, 16),
                      lambda: modified_spectral(0.5, 2, 6, 32, 16)):
            a = build()
            b = build()
            assert np.array_equal(a.coeffs, b.coeffs)

    def test_full_tensor_reflection(self):
        k = fft_uniform(0.5, 2, 3, 16)
        full = k.full_tensor()
        assert full.shape == (13, 13)
        np.testing.assert_array_equal(full, full[::-1, :])
        np.testing.assert_array_equal(full, full[:, ::-1])
        np.testing.assert_array_equal(full[6:, 6:], k.coeffs)

    def test_positive_zero_offset_every_scheme(self):
        for kernel in (analytic_1d(0.5, 4), fft_uniform(0.3, 2, 4, 32),
                       nonuniform(0.3, 2, 4, 33), spectral(0.3, 2, 4, 16),
                       modified_spectral(0.3, 2, 4, 32, 16)):
            assert kernel.coeffs.flat[0] > 0

    def test_restrict_equals_fresh_build(self):
        big = fft_uniform(0.45, 2, 10, 64)
        small = restrict(big, 4)
        fresh = fft_uniform(0.45, 2, 4, 64)
        np.testing.assert_array_equal(small.coeffs, fresh.coeffs)

    def test_restrict_rejects_growth(self):
        with pytest.raises(ValueError):
            restrict(fft_uniform(0.45, 1, 4, 32), 8)

    def test_validation(self):
        with pytest.raises(ValueError):
            StiffnessKernel(dim=1, s=0.5, n_fd=2, scheme="fft",
                            coeffs=np.array([-1.0, 0.1, 0.1, 0.1, 0.1]))
        with pytest.raises(ValueError):
            StiffnessKernel(dim=1, s=0.5, n_fd=2, scheme="bogus",
                            coeffs=np.ones(5))

    def test_circulant_spectrum_real_after_symmetrization(self):
        import scipy.fft
        for kernel in (fft_uniform(0.5, 2, 8, 64), nonuniform(0.5, 2, 8, 65),
                       spectral(0.5, 2, 8, 32), modified_spectral(0.5, 2, 8, 64, 32)):
            n = kernel.n_fd
            fold = np.minimum(np.arange(2 * n), 2 * n - np.arange(2 * n))
            wrapped = kernel.coeffs[np.ix_(fold, fold)]
            spec = scipy.fft.fftn(wrapped)
            assert np.max(np.abs(spec.imag)) <= 1e-10 * np.max(np.abs(spec.real))


class TestDecayProfile:
    def test_requires_resolution(self):
        with pytest.raises(ValueError):
            decay_profile(analytic_1d(0.5, 8))

    def test_radii_sorted_positive(self):
        profile = decay_profile(fft_uniform(0.5, 2, 16, 128))
        assert np.all(profile.radii > 0)
        assert np.all(np.diff(profile.radii) >= 0)
        assert profile.radii.shape == profile.magnitudes.shape

    def test_csv_dumps(self, tmp_path):
        kernel = analytic_1d(0.5, 16)
        kpath = tmp_path / "kernel.csv"
        write_kernel_csv(kernel, kpath, "test")
        lines = kpath.read_text().splitlines()
        assert lines[0].startswith("# config:")
        assert lines[1] == "p1,T"
        assert len(lines) == 2 + 33
        value = float(lines[2].split(",")[1])
        assert value == kernel.coeffs[0]

        profile = decay_profile(kernel)
        dpath = tmp_path / "decay.csv"
        write_decay_csv(profile, dpath, "test")
        lines = dpath.read_text().splitlines()
        assert lines[0].startswith("# config:")
        assert lines[1] == "abs_p,abs_T"
        assert len(lines) == 2 + profile.radii.shape[0]
