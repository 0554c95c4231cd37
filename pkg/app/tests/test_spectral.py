import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from app.lib.core import FourierFrequency, FunctionalSample
from app.lib.exceptions import InsufficientSampleError
from app.lib.spectral import (
    fdft,
    fdft_table,
    full_frequency_identity_check,
    m_hat_fast,
    m_hat_from_kernels,
    m_hat_kernel_path,
    parseval_residual,
    periodogram,
    s_statistics,
)


def random_sample(T, G, seed=0):
    rng = np.random.default_rng(seed)
    return FunctionalSample.from_array(rng.normal(size=(T, G)))


def brute_force_s_statistics(values):
    """按定义逐频率、逐网格点求和"""
    T, G = values.shape
    K = T // 2
    t = np.arange(T)
    dft = np.array([
        [np.sum(values[:, j] * np.exp(-1j * 2 * np.pi * k * t / T)) for j in range(G)]
        for k in range(K + 1)
    ]) / np.sqrt(2 * np.pi * T)
    s1 = np.zeros((G, G), dtype=complex)
    s2 = np.zeros((G, G), dtype=complex)
    for k in range(1, K + 1):
        for a in range(G):
            for b in range(G):
                p = dft[k, a] * np.conj(dft[k, b])
                s1[a, b] += p + np.conj(p)
                if k >= 2:
                    p_prev = dft[k - 1, a] * np.conj(dft[k - 1, b])
                    s2[a, b] += p * np.conj(p_prev)
    return s1 / T, 2 * s2 / T


class FdftTests(SimpleTestCase):

    def test_table_matches_explicit_sum(self):
        x = random_sample(9, 5)
        table = fdft_table(x)
        for k in range(table.n_frequencies + 1):
            assert_allclose(table.curves[k], fdft(x, FourierFrequency(k, x.T)).values, atol=1e-12)

    def test_zero_frequency_is_scaled_sum(self):
        x = random_sample(6, 4)
        expected = x.values.sum(axis=0) / np.sqrt(2 * np.pi * 6)
        assert_allclose(fdft(x, FourierFrequency(0, 6)).values, expected)

    def test_constant_in_time_vanishes_off_zero(self):
        x = FunctionalSample.from_array(np.tile([1.0, -2.0, 0.5], (8, 1)))
        table = fdft_table(x)
        assert_allclose(np.abs(table.curves[1:]), 0.0, atol=1e-12)

    def test_two_curves_at_nyquist(self):
        x = FunctionalSample.from_array(np.array([[1.0, 2.0], [3.0, 5.0]]))
        expected = (x.values[0] - x.values[1]) / np.sqrt(4 * np.pi)
        assert_allclose(fdft_table(x).curves[1], expected, atol=1e-14)

    def test_parseval(self):
        for seed in range(10):
            x = random_sample(17 + seed, 6, seed)
            self.assertLess(parseval_residual(fdft_table(x), x), 1e-8)


class PeriodogramTests(SimpleTestCase):

    def test_zero_sample(self):
        x = FunctionalSample.from_array(np.zeros((8, 3)))
        assert_allclose(periodogram(fdft_table(x), 2).values, 0.0)

    def test_hermitian_with_nonnegative_diagonal(self):
        table = fdft_table(random_sample(16, 5))
        p = periodogram(table, 3).values
        assert_allclose(p, p.conj().T)
        self.assertTrue(np.all(np.diag(p).real >= 0))
        assert_allclose(np.diag(p).imag, 0.0, atol=1e-15)


class SStatisticsTests(SimpleTestCase):

    def test_requires_four_curves(self):
        with self.assertRaises(InsufficientSampleError):
            s_statistics(random_sample(3, 2))

    def test_zero_sample(self):
        stats = s_statistics(FunctionalSample.from_array(np.zeros((6, 3))))
        assert_allclose(stats.s1.values, 0.0)
        assert_allclose(stats.s2.values, 0.0)

    def test_matches_nested_loop_definition(self):
        values = np.arange(1.0, 9.0).reshape(4, 2)
        stats = s_statistics(FunctionalSample.from_array(values))
        s1, s2 = brute_force_s_statistics(values)
        assert_allclose(stats.s1.values, s1, atol=1e-12)
        assert_allclose(stats.s2.values, s2, atol=1e-12)

    def test_matches_nested_loop_on_random_data(self):
        values = random_sample(11, 3, seed=4).values
        stats = s_statistics(FunctionalSample.from_array(values))
        s1, s2 = brute_force_s_statistics(values)
        assert_allclose(stats.s1.values, s1, atol=1e-12)
        assert_allclose(stats.s2.values, s2, atol=1e-12)


class FastPathTests(SimpleTestCase):

    def test_zero_sample(self):
        a2, a1 = m_hat_fast(fdft_table(FunctionalSample.from_array(np.zeros((8, 4)))))
        self.assertEqual((a2, a1), (0.0, 0.0))

    def test_fast_path_matches_kernel_path(self):
        for seed, (T, G) in enumerate([(64, 16), (33, 7), (8, 20), (100, 5)]):
            x = random_sample(T, G, seed)
            reference = m_hat_kernel_path(x)
            table = fdft_table(x)
            for method in ('kernel', 'gram', 'auto'):
                a2, a1 = m_hat_fast(table, method=method)
                self.assertGreaterEqual(a2, 0.0)
                self.assertGreaterEqual(a1, 0.0)
                assert_allclose(2 * np.pi * (a2 - a1), reference, rtol=1e-10, atol=1e-14)

    def test_kernel_path_is_real(self):
        for seed in range(5):
            value = m_hat_from_kernels(s_statistics(random_sample(20, 6, seed)))
            self.assertLess(abs(value.imag), 1e-10 * (1 + abs(value.real)))

    def test_unknown_method(self):
        with self.assertRaises(ValueError):
            m_hat_fast(fdft_table(random_sample(8, 3)), method='dense')

    def test_debias_drops_same_frequency_terms(self):
        x = random_sample(40, 6, seed=11)
        table = fdft_table(x)
        diagonal = sum(
            np.mean(periodogram(table, k).values.real ** 2) for k in range(1, table.n_frequencies + 1)
        ) * 4.0 / x.T ** 2
        for method in ('kernel', 'gram'):
            a2, a1 = m_hat_fast(table, method=method)
            a2_debiased, a1_debiased = m_hat_fast(table, method=method, debias=True)
            self.assertEqual(a2_debiased, a2)
            assert_allclose(a1 - a1_debiased, diagonal, rtol=1e-10)

    def test_debias_on_zero_sample(self):
        table = fdft_table(FunctionalSample.from_array(np.zeros((8, 4))))
        self.assertEqual(m_hat_fast(table, debias=True), (0.0, 0.0))


class FullFrequencyIdentityTests(SimpleTestCase):

    def test_zero_sample(self):
        self.assertEqual(full_frequency_identity_check(FunctionalSample.from_array(np.zeros((5, 3)))), 0.0)

    def test_random_samples(self):
        for seed in range(100):
            T = 4 + seed % 13
            self.assertLess(full_frequency_identity_check(random_sample(T, 4, seed)), 1e-8)

    def test_repeated_curve(self):
        curve = np.linspace(-1.0, 2.0, 6)
        x = FunctionalSample.from_array(np.tile(curve, (8, 1)))
        self.assertLess(full_frequency_identity_check(x), 1e-10)
