"""
长时间的蒙特卡洛验收测试（桌面规模）
运行: python manage.py test app.tests.test_acceptance --tag=slow
"""
import math

import numpy as np
from django.test import SimpleTestCase, tag

from app.lib.core import Grid
from app.lib.inference import m_hat_squared, m_tilde_squared
from app.lib.simulate import DgpSpec, simulate
from app.services import monte_carlo
from app.services.monte_carlo import Experiment
from app.services.presets import build_preset


def binomial_band(reference_pct, n):
    p = reference_pct / 100.0
    return 3.0 * math.sqrt(p * (1.0 - p) / n)


@tag('slow')
class PresetReproductionTests(SimpleTestCase):

    def test_size_under_null(self):
        for experiment in build_preset('table1', seed=2024, T_values=[128, 256], n_reps=500, grid_size=100):
            result = monte_carlo.run(experiment, threads=4)
            for cell in result.cells:
                with self.subTest(cell=cell.key):
                    if experiment.dgp.kind == 'farch1':
                        # v̂_H0 不含四阶累积量项，只要求不明显超过名义水平
                        upper = 3.0 * cell.alpha + binomial_band(100.0 * cell.alpha, cell.n)
                        self.assertLessEqual(cell.rejection_rate, upper)
                    else:
                        band = max(binomial_band(100.0 * cell.alpha, cell.n), cell.alpha / 2.0)
                        self.assertLessEqual(abs(cell.rejection_rate - cell.alpha), band)

    def test_power_under_far1(self):
        for experiment in build_preset('table2', seed=2024, T_values=[128, 256], alphas=[0.05],
                                       n_reps=500, grid_size=100):
            result = monte_carlo.run(experiment, threads=4)
            short_cell, long_cell = result.cell(128, 0.05), result.cell(256, 0.05)
            with self.subTest(experiment=experiment.name):
                self.assertGreaterEqual(long_cell.rejection_rate, short_cell.rejection_rate)
                self.assertGreater(long_cell.rejection_rate, 0.05 + binomial_band(5.0, long_cell.n))


@tag('slow')
class NullDistributionTests(SimpleTestCase):

    def test_v_h0_limit(self):
        spec = DgpSpec(kind='iid_bm', grid=Grid.midpoint(200), T=4096)
        experiment = Experiment(dgp=spec, T_values=[4096], n_reps=200, seed=7, h0_normalization='four-pi')
        result = monte_carlo.run(experiment, threads=4)
        self.assertAlmostEqual(result.cells[0].mean_v_h0, 1.0 / (6.0 * np.pi), delta=0.1 / (6.0 * np.pi))

    def test_z_is_standard_normal(self):
        spec = DgpSpec(kind='iid_bm', grid=Grid.midpoint(100), T=1024)
        report = monte_carlo.null_distribution_diagnostic(
            Experiment(dgp=spec, T_values=[1024], n_reps=1000, seed=11, debias=True), threads=4)
        summary = report['cells'][0]['z_summary']
        self.assertEqual(report['errors'], [])
        self.assertLess(summary['ks_statistic'], 0.06)
        self.assertLess(abs(summary['mean']), 0.1)
        self.assertAlmostEqual(report['cells'][0]['variance_ratio'], 1.0, delta=0.2)

    def test_h1_standardized_variance(self):
        spec = DgpSpec(kind='iid_bm', grid=Grid.midpoint(50), T=4096)
        experiment = Experiment(dgp=spec, T_values=[4096], n_reps=500, seed=13, variance='h1-gaussian',
                                debias=True)
        cell = monte_carlo.run(experiment, threads=4).cells[0]
        self.assertLessEqual(cell.h1_clipped, 5)
        self.assertAlmostEqual(cell.z_summary['var'], 1.0, delta=0.25)


@tag('slow')
class EstimatorAgreementTests(SimpleTestCase):

    def test_frequency_and_time_domain_estimates_agree(self):
        grid = Grid.midpoint(50)
        gaps = []
        for seed in range(20):
            sample = simulate(DgpSpec(kind='far1', grid=grid, T=2 ** 14, seed=seed))
            oracle = m_tilde_squared(sample, 50)
            gaps.append(abs(m_hat_squared(sample) - oracle) / oracle)
        self.assertLess(np.mean(gaps), 0.10)


@tag('slow')
class PreciseHypothesisTests(SimpleTestCase):

    def test_similarity_declared_for_white_noise(self):
        spec = DgpSpec(kind='iid_bm', grid=Grid.midpoint(100), T=1024)
        experiment = Experiment(dgp=spec, T_values=[1024], n_reps=500, mode='similarity', delta=0.05, seed=3,
                                debias=True)
        self.assertGreaterEqual(monte_carlo.run(experiment, threads=4).cells[0].rejection_rate, 0.90)

    def test_relevant_deviation_for_far1(self):
        spec = DgpSpec(kind='far1', grid=Grid.midpoint(100), T=128)
        experiment = Experiment(dgp=spec, T_values=[128, 512], n_reps=500, mode='relevant', delta=0.0, seed=3,
                                debias=True)
        result = monte_carlo.run(experiment, threads=4)
        short_cell, long_cell = result.cell(128, 0.05), result.cell(512, 0.05)
        self.assertGreaterEqual(long_cell.rejection_rate, short_cell.rejection_rate)
        self.assertGreater(long_cell.rejection_rate, 0.05 + binomial_band(5.0, long_cell.n))

    def test_interval_coverage(self):
        spec = DgpSpec(kind='far1', grid=Grid.midpoint(50), T=1024)
        experiment = Experiment(dgp=spec, T_values=[1024], n_reps=500, mode='ci', seed=5, debias=True,
                                oracle_T=2 ** 16, oracle_p_T=50)
        coverage = monte_carlo.run(experiment, threads=4).cells[0].coverage
        self.assertGreaterEqual(coverage, 0.90)
        self.assertLessEqual(coverage, 0.99)

