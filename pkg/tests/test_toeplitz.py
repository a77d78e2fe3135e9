import numpy as np
import pytest

from fraclap.stiffness import analytic_1d, fft_uniform, modified_spectral, nonuniform, spectral
from fraclap.toeplitz import ToeplitzPlan, apply, dense_materialize, dft, plan


def naive_dft(values):
    values = np.asarray(values, dtype=complex)
    n = values.shape[0]
    twiddle = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n)
    return twiddle @ values


class TestDft:
    def test_constant_to_impulse(self):
        out = dft(np.ones(8), "forward")
        expected = np.zeros(8, dtype=complex)
        expected[0] = 8.0
        np.testing.assert_allclose(out, expected, atol=1e-13)

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(1)
        for size in (6, 7, 13):
            x = rng.standard_normal(size) + 1j * rng.standard_normal(size)
            got = dft(x, "forward")
            ref = naive_dft(x)
            assert np.max(np.abs(got - ref)) < 1e-12 * np.max(np.abs(ref))

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((5, 9)) + 1j * rng.standard_normal((5, 9))
        back = dft(dft(x, "forward"), "inverse")
        assert np.max(np.abs(back - x)) < 1e-12

    def test_rejects_direction(self):
        with pytest.raises(ValueError):
            dft(np.ones(4), "sideways")


def all_scheme_kernels(dim, n_fd, s=0.5):
    m = max(2 * n_fd + 1, 32)
    return [fft_uniform(s, dim, n_fd, m), nonuniform(s, dim, n_fd, m + 1),
            spectral(s, dim, n_fd, 32), modified_spectral(s, dim, n_fd, m, 32)]


class TestPlanApply:
    def test_impulse_returns_central_column(self):
        kernel = analytic_1d(0.5, 2)
        p = plan(kernel)
        u = np.zeros(5)
        u[2] = 1.0
        expected = kernel.full_tensor()[2:7]
        np.testing.assert_allclose(p.apply(u), expected, rtol=1e-12)

    def test_zero_input(self):
        p = plan(fft_uniform(0.5, 2, 3, 16))
        assert np.all(p.apply(np.zeros((7, 7))) == 0.0)

    @pytest.mark.parametrize("dim,n_fd", [(1, 6), (2, 4), (3, 3)])
    def test_matches_dense_oracle_all_schemes(self, dim, n_fd):
        rng = np.random.default_rng(dim)
        for kernel in all_scheme_kernels(dim, n_fd):
            p = ToeplitzPlan(kernel)
            dense = dense_materialize(kernel)
            u = rng.standard_normal(p.grid_shape)
            got = p.apply(u).ravel()
            ref = dense @ u.ravel()
            assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))

    def test_2d_direct_summation_oracle(self):
        n_fd = 5
        kernel = fft_uniform(0.6, 2, n_fd, 32)
        rng = np.random.default_rng(4)
        u = rng.standard_normal((11, 11))
        full = kernel.full_tensor()
        ref = np.zeros((11, 11))
        for j in range(11):
            for k in range(11):
                for mm in range(11):
                    for nn in range(11):
                        ref[j, k] += full[j - mm + 10, k - nn + 10] * u[mm, nn]
        got = ToeplitzPlan(kernel).apply(u)
        assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))

    def test_linearity(self):
        rng = np.random.default_rng(5)
        p = ToeplitzPlan(fft_uniform(0.4, 2, 4, 32))
        u, w = rng.standard_normal((2,) + p.grid_shape)
        alpha, beta = rng.standard_normal(2)
        left = p.apply(alpha * u + beta * w)
        right = alpha * p.apply(u) + beta * p.apply(w)
        assert np.max(np.abs(left - right)) <= 1e-12 * np.max(np.abs(right))

    def test_symmetry(self):
        rng = np.random.default_rng(6)
        p = ToeplitzPlan(fft_uniform(0.7, 2, 5, 32))
        for _ in range(5):
            u, w = rng.standard_normal((2,) + p.grid_shape)
            a = np.sum(p.apply(u) * w)
            b = np.sum(u * p.apply(w))
            assert abs(a - b) <= 1e-11 * max(abs(a), 1.0)

    def test_module_level_apply(self):
        kernel = analytic_1d(0.5, 3)
        p = plan(kernel)
        u = np.arange(7.0)
        np.testing.assert_array_equal(apply(p, u), p.apply(u))

    def test_shape_mismatch(self):
        p = ToeplitzPlan(analytic_1d(0.5, 3))
        with pytest.raises(ValueError):
            p.apply(np.zeros(6))

    def test_plan_equals_dense_on_larger_instances(self):
        # every instance with at most 4096 nodes
        rng = np.random.default_rng(7)
        for dim, n_fd in [(1, 100), (2, 16), (3, 4)]:
            kernel = (analytic_1d(0.5, n_fd) if dim == 1
                      else fft_uniform(0.5, dim, n_fd, max(2 * n_fd + 1, 64)))
            p = ToeplitzPlan(kernel)
            dense = dense_materialize(kernel)
            u = rng.standard_normal(p.grid_shape)
            got = p.apply(u).ravel()
            ref = dense @ u.ravel()
            assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))

    def test_constant_vector_trend(self):
        # row sums tend to the vanishing symbol value as the grid grows
        def interior_max(n_fd):
            kernel = analytic_1d(0.5, n_fd)
            p = ToeplitzPlan(kernel)
            v = p.apply(np.ones(2 * n_fd + 1))
            inner = v[n_fd // 2: -n_fd // 2]
            return np.max(np.abs(inner))

        assert interior_max(128) < interior_max(16)


class TestDenseMaterialize:
    def test_1d_first_row(self):
        import math
        kernel = analytic_1d(0.5, 2)
        dense = dense_materialize(kernel)
        assert dense.shape == (5, 5)
        np.testing.assert_allclose(
            dense[0], [4 / math.pi, -4 / (3 * math.pi), -4 / (15 * math.pi),
                       -4 / (35 * math.pi), -4 / (63 * math.pi)], rtol=1e-12)

    def test_exact_symmetry(self):
        for kernel in all_scheme_kernels(2, 3):
            dense = dense_materialize(kernel)
            np.testing.assert_array_equal(dense, dense.T)

    def test_positive_definite(self):
        for dim in (1, 2, 3):
            kernel = fft_uniform(0.5, dim, 3, 32)
            eigvals = np.linalg.eigvalsh(dense_materialize(kernel))
            assert eigvals[0] > 0
        eigvals = np.linalg.eigvalsh(dense_materialize(analytic_1d(0.5, 4)))
        assert eigvals[0] > 0

    def test_size_guard(self):
        with pytest.raises(ValueError):
            dense_materialize(analytic_1d(0.5, 20000))
