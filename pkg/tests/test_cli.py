# -*- coding: utf-8 -*-

# Copyright (C) 2024-2025 The Dikl developers
# This file is part of Dikl.
#
# Dikl is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# Dikl is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with Dikl.  If not, see <http://www.gnu.org/licenses/>.

import io
import os
import csv
import shutil
import tempfile
import unittest
import contextlib
from unittest import mock

from dikl.cli import main
from dikl.config import buildTargetFrom, loadConfig
from dikl.evaluation import referenceLogDensity, signCoverage
from dikl.file import readJson, readSamples
from dikl.numerics import RngStream
from dikl.targets import ManyWellTarget

from . import ACCEPTANCE

CHECK_CONFIG = """
[targets]
kind = "gaussian"
dim = 2

[check]
steps = [3, 8]
n_samples = 2000
burn_in = 300
"""

LANDSCAPE_CONFIG = """
[targets]
kind = "gaussian"

[landscape]
mu_points = 3
sigma_points = 3
sigma_min = 0.1
sigma_max = 1.0
alphas = [1.0, 0.5]
"""


class CliCase(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.dir)

    def path(self, *parts):
        return os.path.join(self.dir, *parts)

    def writeConfig(self, name, text):
        with open(self.path(name), 'w') as f:
            f.write(text)
        return self.path(name)

    def run_(self, *argv):
        """``(exit code, stdout, stderr)`` of ``dikl argv``"""
        out, err = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            code = main(list(argv))
        return code, out.getvalue(), err.getvalue()

    def readCsv(self, path):
        with open(path, newline='') as f:
            return list(csv.DictReader(f))


class TestTrainSampleEval(CliCase):

    def train(self):
        out = self.path('train')
        code, stdout, _ = self.run_('train', '--config', 'gaussian1d-smoke',
                                    '--out', out)
        self.assertEqual(code, 0, stdout)
        return out

    def test_smoke_run(self):
        out = self.train()
        rows = self.readCsv(os.path.join(out, 'metrics.csv'))
        self.assertEqual(len(rows), 50)
        self.assertEqual(rows[-1]['iteration'], '50')
        for name in ('resolved-config.json', 'metadata.json', 'summary.json',
                     'checkpoint.json', 'checkpoint.bin'):
            self.assertTrue(os.path.exists(os.path.join(out, name)), name)
        metadata = readJson(os.path.join(out, 'metadata.json'))
        self.assertEqual(metadata['command'], 'train')
        self.assertIn('numpy', metadata['platform'])
        self.assertEqual(readJson(os.path.join(out, 'summary.json'))
                         ['iterations'], 50)

    def test_sample_and_eval(self):
        checkpoint = os.path.join(self.train(), 'checkpoint.json')
        for count in (0, 1000):
            out = self.path('sample-%d' % count)
            code, _, _ = self.run_('sample', '--checkpoint', checkpoint,
                                   '-n', str(count), '--out', out)
            self.assertEqual(code, 0)
            samples, sidecar = readSamples(os.path.join(out, 'samples'))
            self.assertEqual(samples.shape, (count, 1))
            self.assertEqual(sidecar, {'dim': 1, 'count': count,
                                       'kind': 'gaussian'})
            timing = readJson(os.path.join(out, 'metadata.json'))['timing']
            self.assertEqual(timing['network_rows'], count)

        again = self.path('sample-again')
        self.assertEqual(self.run_('sample', '--checkpoint', checkpoint,
                                   '-n', '1000', '--out', again)[0], 0)
        blobs = []
        for out in ('sample-1000', 'sample-again'):
            with open(self.path(out, 'samples.bin'), 'rb') as f:
                blobs.append(f.read())
        self.assertEqual(blobs[0], blobs[1])

        dump = self.path('sample-1000', 'samples')
        out = self.path('eval-self')
        code, stdout, _ = self.run_('eval', '--samples', dump, '--reference',
                                    dump, '--config', 'gaussian1d-smoke',
                                    '--out', out)
        self.assertEqual(code, 0)
        report = readJson(os.path.join(out, 'metrics.json'))
        self.assertEqual(report['w2']['mean'], 0.0)
        self.assertEqual(report['energy_tvd']['mean'], 0.0)
        self.assertIn('w2', stdout)

        out = self.path('eval-checkpoint')
        code, _, _ = self.run_('eval', '--checkpoint', checkpoint,
                               '--metrics', 'w2,mean_log_density',
                               '--out', out)
        self.assertEqual(code, 0)
        rows = self.readCsv(os.path.join(out, 'metrics.csv'))
        self.assertEqual([row['metric'] for row in rows],
                         ['w2', 'mean_log_density', 'reference_log_density'])

    def test_eval_needs_a_target(self):
        code, _, err = self.run_('eval', '--samples', self.path('missing'),
                                 '--out', self.path('eval'))
        self.assertEqual(code, 2)
        self.assertIn('--config', err)


class TestConfigErrors(CliCase):

    def test_missing_required_key(self):
        config = self.writeConfig('bad.toml', '[run]\nseed = 1\n')
        code, _, err = self.run_('train', '--config', config,
                                 '--out', self.path('out'))
        self.assertEqual(code, 2)
        self.assertIn('targets.kind', err)
        self.assertFalse(os.path.exists(self.path('out')))

    def test_unknown_key_with_line(self):
        config = self.writeConfig('bad.toml', '[targets]\nkind = "mog"\n'
                                              'modes = 3\n')
        code, _, err = self.run_('train', '--config', config)
        self.assertEqual(code, 2)
        self.assertIn('targets.modes', err)
        self.assertIn('3', err)

    def test_unknown_preset(self):
        code, _, _ = self.run_('posterior-check', '--config', 'no-such-preset')
        self.assertEqual(code, 2)

    def test_presets(self):
        code, stdout, _ = self.run_('presets')
        self.assertEqual(code, 0)
        self.assertIn('gaussian1d-smoke', stdout.split())
        self.assertIn('lj13-desk', stdout.split())


class TestLandscape(CliCase):

    def test_grid_files(self):
        config = self.writeConfig('landscape.toml', LANDSCAPE_CONFIG)
        out = self.path('landscape')
        code, _, _ = self.run_('landscape', '--config', config, '--out', out,
                               '--threads', '2')
        self.assertEqual(code, 0)
        for alpha in ('1', '0.5'):
            with open(os.path.join(out, 'landscape-alpha-%s.csv' % alpha)) \
                 as f:
                rows = list(csv.reader(f))
            self.assertEqual(len(rows), 4)
            self.assertEqual(len(rows[0]), 4)
        minima = readJson(os.path.join(out, 'landscape.json'))['minima']
        self.assertEqual([m['alpha'] for m in minima], [1.0, 0.5])
        self.assertTrue(all(m['kl'] >= 0.0 for m in minima))


class TestPosteriorCheck(CliCase):

    def test_calibrated_samplers_pass(self):
        config = self.writeConfig('check.toml', CHECK_CONFIG)
        out = self.path('check')
        code, stdout, err = self.run_('posterior-check', '--config', config,
                                      '--out', out)
        self.assertEqual(code, 0, stdout + err)
        rows = self.readCsv(os.path.join(out, 'posterior-check.csv'))
        self.assertEqual(len(rows), 12)
        self.assertTrue(all(row['passed'] == 'True' for row in rows))

    def test_sabotaged_step_fails(self):
        config = self.writeConfig('check.toml', CHECK_CONFIG)
        out = self.path('check')
        with mock.patch.dict(os.environ, {'DIKL_CHECK__MALA_STEP': '1000.0'}):
            code, _, err = self.run_('posterior-check', '--config', config,
                                     '--out', out)
        self.assertEqual(code, 4)
        self.assertIn('mala', err)
        rows = self.readCsv(os.path.join(out, 'posterior-check.csv'))
        self.assertTrue(all(row['passed'] == 'False' for row in rows
                            if row['sampler'] == 'mala'))
        resolved = readJson(os.path.join(out, 'resolved-config.json'))
        self.assertEqual(resolved['check']['mala_step'], 1000.0)


class TestDeterminism(CliCase):
    """Reruns with the same seed write byte-identical metric files"""

    def assertSameBytes(self, *names):
        for name in names:
            blobs = []
            for run in ('a', 'b'):
                with open(self.path(run, name), 'rb') as f:
                    blobs.append(f.read())
            self.assertEqual(blobs[0], blobs[1], name)

    def test_train_and_eval(self):
        for run in ('a', 'b'):
            out = self.path(run)
            code, _, _ = self.run_('train', '--config', 'gaussian1d-smoke',
                                   '--seed', '3', '--out', out)
            self.assertEqual(code, 0)
            code, _, _ = self.run_('eval', '--checkpoint',
                                   os.path.join(out, 'checkpoint.json'),
                                   '--metrics', 'w2,energy_tvd,'
                                   'mean_log_density', '--seed', '3',
                                   '--out', os.path.join(out, 'eval'))
            self.assertEqual(code, 0)
        self.assertSameBytes('metrics.csv',
                             os.path.join('eval', 'metrics.csv'),
                             os.path.join('eval', 'metrics.json'))

    def test_landscape_and_posterior_check(self):
        landscape = self.writeConfig('landscape.toml', LANDSCAPE_CONFIG)
        check = self.writeConfig('check.toml', CHECK_CONFIG)
        for run in ('a', 'b'):
            self.assertEqual(self.run_('landscape', '--config', landscape,
                                       '--out', self.path(run))[0], 0)
            self.assertEqual(self.run_('posterior-check', '--config', check,
                                       '--out', self.path(run))[0], 0)
        self.assertSameBytes('landscape-alpha-1.csv',
                             'landscape-alpha-0.5.csv', 'landscape.json',
                             'posterior-check.csv')


@unittest.skipUnless(ACCEPTANCE, 'set DIKL_ACCEPTANCE=1 for the long runs')
class TestAcceptance(CliCase):

    def train(self, config, name, *argv, **environ):
        out = self.path(name)
        with mock.patch.dict(os.environ, environ):
            code, stdout, err = self.run_('train', '--config', config,
                                          '--out', out, *argv)
        self.assertEqual(code, 0, stdout + err)
        return out

    def evaluate(self, run, metrics):
        out = run + '-eval'
        code, stdout, err = self.run_('eval', '--checkpoint',
                                      os.path.join(run, 'checkpoint.json'),
                                      '--metrics', metrics, '--out', out)
        self.assertEqual(code, 0, stdout + err)
        return readJson(os.path.join(out, 'metrics.json'))

    def sample(self, run, count=10000):
        out = run + '-samples'
        code, _, _ = self.run_('sample', '--checkpoint',
                               os.path.join(run, 'checkpoint.json'),
                               '-n', str(count), '--out', out)
        self.assertEqual(code, 0)
        return readSamples(os.path.join(out, 'samples'))[0]

    def test_full_posterior_check(self):
        code, stdout, err = self.run_('posterior-check', '--out',
                                      self.path('check'), '--config',
                                      self.writeConfig('check.toml',
                                                       '[targets]\n'
                                                       'kind = "gaussian"\n'))
        self.assertEqual(code, 0, stdout + err)

    def test_mog40_desk_run(self):
        run = self.train('mog40-desk', 'mog')
        report = self.evaluate(run, 'mode_coverage,mean_log_density')
        self.assertGreaterEqual(report['mode_coverage']['mean'], 38)
        cfg, _ = loadConfig('mog40-desk')
        level, _ = referenceLogDensity(buildTargetFrom(cfg), RngStream(11))
        self.assertGreaterEqual(report['mean_log_density']['mean'],
                                level - 2.5)

    def test_reverse_kl_collapses_on_mog40(self):
        collapsed = 0
        for seed in range(5):
            coverage = []
            for method in ('dikl', 'rkl_sm'):
                run = self.train('mog40-desk', '%s-%d' % (method, seed),
                                 '--seed', str(seed),
                                 DIKL_TRAINER__METHOD=method)
                coverage.append(self.evaluate(run, 'mode_coverage')
                                ['mode_coverage']['mean'])
            collapsed += coverage[1] <= coverage[0] / 2.0
        self.assertGreaterEqual(collapsed, 4)

    def test_manywell_desk_run(self):
        """The 32 dimensional Many-Well has 16 double well blocks, 14 of
        them must be seen in both wells"""
        target = ManyWellTarget(32)
        dikl = self.train('mw32-desk', 'mw')
        report = self.evaluate(dikl, 'energy_tvd')
        self.assertLess(report['energy_tvd']['mean'], 0.5)
        covered, _ = signCoverage(target, self.sample(dikl))
        self.assertGreaterEqual(covered, 14)
        rkl = self.train('mw32-desk', 'mw-rkl', DIKL_TRAINER__METHOD='rkl_sm')
        self.assertLess(signCoverage(target, self.sample(rkl))[0], covered)

    def test_dw4_early_stop_falls(self):
        summary = readJson(os.path.join(self.train('dw4-desk', 'dw4'),
                                        'summary.json'))
        self.assertLessEqual(summary['best_early_stop_tvd'],
                             0.7 * summary['initial_early_stop_tvd'])


if __name__ == '__main__':
    unittest.main()
