import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from app.lib.core import FunctionalSample
from app.models import ExperimentRun
from app.serializers import RunConfigSerializer

TIMING_KEYS = ('wall_time', 'environment', 'elapsed')


def run_command(name, *args):
    out, err = StringIO(), StringIO()
    call_command(name, *args, stdout=out, stderr=err)
    return out.getvalue(), err.getvalue()


def ar_values(T, G, rho=0.8, seed=5):
    """逐点 AR(1)"""
    rng = np.random.default_rng(seed)
    values = np.zeros((T, G))
    for t in range(1, T):
        values[t] = rho * values[t - 1] + rng.normal(size=G)
    return values


def without_timing(data):
    if isinstance(data, dict):
        return {k: without_timing(v) for k, v in data.items() if k not in TIMING_KEYS}
    if isinstance(data, list):
        return [without_timing(v) for v in data]
    return data


class CommandTestBase(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write_csv(self, name, text):
        path = self.tmp / name
        path.write_text(text, encoding='utf-8')
        return str(path)

    def write_matrix(self, name, values):
        path = self.tmp / name
        np.savetxt(path, values, fmt='%.17g', delimiter=',')
        return str(path)


class TestCommandTests(CommandTestBase):

    def test_white_noise_is_retained(self):
        values = np.random.default_rng(11).normal(size=(200, 12))
        out, _ = run_command('fwn_test', '--input', self.write_matrix('iid.csv', values), '--alpha', '0.001')
        report = json.loads(out)
        self.assertEqual(report['decision'], 'retain')
        self.assertTrue(0.0 < report['p_value'] < 1.0)
        self.assertEqual((report['T'], report['grid_size']), (200, 12))
        self.assertEqual(report['p_T'], 6)
        self.assertEqual(report['schema_version'], '1.0')

    def test_dependent_series_is_rejected(self):
        values = ar_values(200, 12)
        out, _ = run_command('fwn_test', '--input', self.write_matrix('ar.csv', values))
        report = json.loads(out)
        self.assertEqual(report['decision'], 'reject')
        self.assertIsNotNone(report['ci'])

    def test_precise_mode(self):
        path = self.write_matrix('ar.csv', ar_values(100, 8))
        out, _ = run_command('fwn_test', '--input', path, '--mode', 'relevant', '--delta', '0.5')
        report = json.loads(out)
        self.assertEqual(report['mode'], 'relevant')
        self.assertEqual(report['delta'], 0.5)

    def test_delta_requires_precise_mode(self):
        path = self.write_matrix('iid.csv', np.ones((10, 3)))
        with self.assertRaises(CommandError) as cm:
            run_command('fwn_test', '--input', path, '--delta', '0.5')
        self.assertEqual(cm.exception.returncode, 2)
        with self.assertRaises(CommandError) as cm:
            run_command('fwn_test', '--input', path, '--mode', 'similarity')
        self.assertEqual(cm.exception.returncode, 2)

    def test_ragged_row(self):
        path = self.write_csv('ragged.csv', '1,2,3\n4,5,6\n7,8\n')
        with self.assertRaises(CommandError) as cm:
            run_command('fwn_test', '--input', path)
        self.assertEqual(cm.exception.returncode, 2)
        self.assertIn('row=2', str(cm.exception))

    def test_non_numeric_cell(self):
        path = self.write_csv('bad.csv', '1,2,3\n4,x,6\n')
        with self.assertRaises(CommandError) as cm:
            run_command('fwn_test', '--input', path)
        self.assertEqual(cm.exception.returncode, 2)
        self.assertIn('column=1', str(cm.exception))

    def test_header_is_skipped(self):
        values = np.random.default_rng(4).normal(size=(20, 4))
        body = '\n'.join(','.join(repr(float(v)) for v in row) for row in values)
        path = self.write_csv('header.csv', 'a,b,c,d\n' + body + '\n')
        report = json.loads(run_command('fwn_test', '--input', path, '--header')[0])
        self.assertEqual(report['T'], 20)

    def test_zero_sample_is_degenerate(self):
        path = self.write_matrix('zero.csv', np.zeros((16, 5)))
        with self.assertRaises(CommandError) as cm:
            run_command('fwn_test', '--input', path)
        self.assertEqual(cm.exception.returncode, 3)

    def test_clipped_variance_is_not_reported_as_degenerate(self):
        path = self.write_matrix('ar.csv', ar_values(100, 8))
        negative = {'chain4': -1.0, 'squared_norm': 0.2, 'cross3': 0.0, 'cross_pair': 0.1}
        with mock.patch('app.lib.inference.variance_terms', return_value=negative):
            with self.assertRaises(CommandError) as cm:
                run_command('fwn_test', '--input', path, '--mode', 'similarity', '--delta', '0.1')
        self.assertEqual(cm.exception.returncode, 3)
        self.assertIn('不是数据退化', str(cm.exception))

    def test_normalization_and_debias_flags(self):
        path = self.write_matrix('ar.csv', ar_values(100, 8))
        base = json.loads(run_command('fwn_test', '--input', path)[0])
        adjusted = json.loads(run_command('fwn_test', '--input', path, '--h0-normalization', 'four-pi',
                                          '--debias')[0])
        self.assertEqual((base['h0_normalization'], base['debiased']), ('consistent', False))
        self.assertEqual((adjusted['h0_normalization'], adjusted['debiased']), ('four-pi', True))
        self.assertAlmostEqual(adjusted['v_h0'], np.sqrt(2.0) * base['v_h0'])
        self.assertGreater(adjusted['m_hat_sq'], base['m_hat_sq'])
        self.assertFalse(base['non_gaussian_warning'])

    def test_missing_file(self):
        with self.assertRaises(CommandError) as cm:
            run_command('fwn_test', '--input', str(self.tmp / 'missing.csv'))
        self.assertEqual(cm.exception.returncode, 2)

    def test_report_to_file(self):
        values = np.random.default_rng(1).normal(size=(50, 6))
        output = self.tmp / 'out' / 'report.json'
        run_command('fwn_test', '--input', self.write_matrix('iid.csv', values), '--output', str(output))
        self.assertEqual(json.loads(output.read_text(encoding='utf-8'))['T'], 50)


class SimulateCommandTests(CommandTestBase):

    def simulate(self, name, *args):
        path = self.tmp / name
        run_command('fwn_simulate', '--output', str(path), *args)
        return path

    def test_shape_and_sidecar(self):
        path = self.simulate('bm.csv', '--model', 'iid_bm', '--T', '128', '--grid-size', '100', '--seed', '7')
        values = np.loadtxt(path, delimiter=',')
        self.assertEqual(values.shape, (128, 100))
        sidecar = json.loads(Path(str(path) + '.json').read_text(encoding='utf-8'))
        self.assertEqual(sidecar['dgp']['kind'], 'iid_bm')
        self.assertEqual(sidecar['dgp']['seed'], 7)
        self.assertEqual(sidecar['dgp']['rng'], 'Philox4x64-10')

    def test_same_seed_same_bytes(self):
        args = ('--model', 'far1', '--T', '64', '--grid-size', '20', '--seed', '42')
        first = self.simulate('a.csv', *args)
        second = self.simulate('b.csv', *args)
        self.assertEqual(first.read_bytes(), second.read_bytes())
        third = self.simulate('c.csv', '--model', 'far1', '--T', '64', '--grid-size', '20', '--seed', '43')
        self.assertNotEqual(first.read_bytes(), third.read_bytes())

    def test_non_stationary_kernel_rejected(self):
        with self.assertRaises(CommandError) as cm:
            self.simulate('x.csv', '--model', 'far1', '--T', '64', '--hs-norm', '1.5')
        self.assertEqual(cm.exception.returncode, 2)

    def test_negative_c_psi_rejected(self):
        with self.assertRaises(CommandError) as cm:
            self.simulate('x.csv', '--model', 'farch1', '--T', '32', '--c-psi', '-1')
        self.assertEqual(cm.exception.returncode, 2)
        self.assertIn('c_psi', str(cm.exception))

    def test_c_psi_reaches_generator(self):
        path = self.simulate('farch.csv', '--model', 'farch1', '--T', '32', '--grid-size', '10', '--c-psi', '0.2')
        sidecar = json.loads(Path(str(path) + '.json').read_text(encoding='utf-8'))
        self.assertEqual(sidecar['dgp']['c_psi'], 0.2)

    def test_round_trip_through_test_command(self):
        path = self.simulate('far.csv', '--model', 'far1', '--T', '1024', '--grid-size', '30',
                             '--kernel', 'gaussian', '--seed', '1')
        report = json.loads(run_command('fwn_test', '--input', str(path))[0])
        self.assertEqual((report['T'], report['grid_size']), (1024, 30))
        self.assertGreater(report['m_hat_sq'], 0.0)


class MonteCarloCommandTests(CommandTestBase):

    CUSTOM = ('--model', 'iid_bm', '--T', '16', '32', '--alpha', '0.1', '0.05', '--reps', '12',
              '--grid-size', '8', '--burn-in', '10', '--seed', '3')

    def test_custom_experiment(self):
        out, _ = run_command('fwn_mc', *self.CUSTOM)
        report = json.loads(out)
        self.assertEqual(report['T'], [16, 32])
        self.assertEqual(report['grid_size'], 8)
        self.assertIsNone(report['preset'])
        cells = report['results'][0]['cells']
        self.assertEqual(len(cells), 4)
        for cell in cells:
            self.assertEqual(cell['n'], 12)
            self.assertEqual(cell['seed'], 3)
            self.assertIn('standard_error', cell)

    def test_same_seed_same_document(self):
        first = json.loads(run_command('fwn_mc', *self.CUSTOM)[0])
        second = json.loads(run_command('fwn_mc', *self.CUSTOM)[0])
        self.assertEqual(without_timing(first), without_timing(second))

    def test_thread_count_invariance(self):
        single = json.loads(run_command('fwn_mc', *self.CUSTOM, '--threads', '1')[0])
        several = json.loads(run_command('fwn_mc', *self.CUSTOM, '--threads', '8', '--block-size', '2')[0])
        self.assertEqual(without_timing(single)['results'], without_timing(several)['results'])

    def test_preset(self):
        out, _ = run_command('fwn_mc', '--preset', 'table1', '--T', '128', '--alpha', '0.05',
                             '--reps', '2', '--grid-size', '6', '--burn-in', '10')
        report = json.loads(out)
        self.assertEqual(report['preset'], 'table1')
        self.assertEqual([r['name'] for r in report['results']],
                         ['table1/iid_bm', 'table1/iid_bb', 'table1/farch1'])
        self.assertEqual(report['results'][0]['cells'][0]['reference_rate'], 4.8)

    def test_diagnostic(self):
        out, _ = run_command('fwn_mc', *self.CUSTOM, '--diagnostic')
        diagnostics = json.loads(out)['diagnostics']
        self.assertEqual(len(diagnostics), 1)
        self.assertEqual([c['T'] for c in diagnostics[0]['cells']], [16, 32])

    def test_output_file(self):
        output = self.tmp / 'mc.json'
        run_command('fwn_mc', *self.CUSTOM, '--output', str(output))
        self.assertEqual(len(json.loads(output.read_text(encoding='utf-8'))['results']), 1)

    def test_invalid_arguments(self):
        with self.assertRaises(CommandError) as cm:
            run_command('fwn_mc', '--model', 'iid_bm')
        self.assertEqual(cm.exception.returncode, 2)
        with self.assertRaises(CommandError) as cm:
            run_command('fwn_mc', '--preset', 'table1', '--mode', 'ci')
        self.assertEqual(cm.exception.returncode, 2)
        with self.assertRaises(CommandError) as cm:
            run_command('fwn_mc', '--model', 'iid_bm', '--T', '2', '--reps', '2')
        self.assertEqual(cm.exception.returncode, 2)


class RecordedRunTests(TestCase):

    def test_record_success(self):
        out = StringIO()
        call_command('fwn_mc', '--model', 'far1', '--T', '16', '--reps', '4', '--grid-size', '6',
                     '--burn-in', '10', '--record', stdout=out, stderr=StringIO())
        report = json.loads(out.getvalue())
        run = ExperimentRun.objects.get(id=report['run_id'])
        self.assertEqual(run.status, 'success')
        self.assertEqual(run.name, 'far1-wiener-bm-classical')
        self.assertIsNotNone(run.execution_time)
        self.assertEqual(run.result['results'][0]['cells'][0]['n'], 4)
        self.assertEqual(len(run.config['experiments']), 1)

    def test_record_failure(self):
        def zero_sample(spec, rng):
            return FunctionalSample(spec.grid, np.zeros((spec.T, spec.grid.n_points)))

        with mock.patch('app.services.monte_carlo.simulate', side_effect=zero_sample):
            with self.assertRaises(CommandError):
                call_command('fwn_mc', '--model', 'iid_bm', '--T', '16', '--reps', '2', '--grid-size', '6',
                             '--record', stdout=StringIO(), stderr=StringIO())
        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, 'failed')
        self.assertIn('iid_bm/T=16', run.error_message)


class RunConfigSerializerTests(SimpleTestCase):

    def validate(self, **data):
        serializer = RunConfigSerializer(data=data)
        return serializer.is_valid(), serializer.errors

    def test_precise_mode_needs_delta(self):
        valid, errors = self.validate(subcommand='test', input='x.csv', mode='similarity')
        self.assertFalse(valid)
        self.assertIn('delta', errors)
        valid, _ = self.validate(subcommand='test', input='x.csv', mode='similarity', delta=0.1)
        self.assertTrue(valid)

    def test_alpha_range(self):
        valid, errors = self.validate(subcommand='test', input='x.csv', alpha=1.0)
        self.assertFalse(valid)
        self.assertIn('alpha', errors)

    def test_simulate_requirements(self):
        valid, errors = self.validate(subcommand='simulate', output='x.csv', T=[10])
        self.assertFalse(valid)
        self.assertIn('model', errors)

    def test_c_psi_must_be_non_negative(self):
        valid, errors = self.validate(subcommand='simulate', output='x.csv', T=[10], model='farch1', c_psi=-0.5)
        self.assertFalse(valid)
        self.assertIn('c_psi', errors)

    def test_h0_normalization_choices(self):
        valid, errors = self.validate(subcommand='test', input='x.csv', h0_normalization='unit')
        self.assertFalse(valid)
        self.assertIn('h0_normalization', errors)

    def test_mc_needs_model_or_preset(self):
        valid, _ = self.validate(subcommand='mc', T=[16])
        self.assertFalse(valid)
        valid, _ = self.validate(subcommand='mc', preset='table2')
        self.assertTrue(valid)
