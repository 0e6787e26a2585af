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
import shutil
import tempfile
import unittest

import numpy as np

from dikl.errors import ConfigError, TrainingAbortError
from dikl.file import CsvRecords
from dikl.numerics import RngStream, Tensor
from dikl.diffusion import buildVpLinear
from dikl.networks import GeneratorNet, ModelPair, ScoreNet
from dikl.posterior import getRecipe
from dikl.evaluation import histogramTvd
from dikl.targets import DoubleWellParticles, gaussianTarget, mog40
from dikl.trainer import (HISTORY_FIELDS, TrainConfig, Trainer,
                          earlyStopMetric, initModels, refinementTvd,
                          trainDikl, trainRklSm)


def smallConfig(**kwargs):
    settings = dict(iterations=3, inner_steps=2, batch_size=8,
                    score_batch_size=8, eval_every=2, n_eval=50,
                    refine_steps=3, generator_hidden=[8], score_hidden=[8],
                    embed_size=4, seed=1)
    settings.update(kwargs)
    return TrainConfig(**settings)


class TestConfig(unittest.TestCase):

    def test_defaults(self):
        cfg = TrainConfig()
        self.assertEqual(cfg.method, 'dikl')
        self.assertEqual(cfg.generator_hidden, [256] * 5)

    def test_invalid(self):
        for bad in ({'iterations': -1}, {'inner_steps': 1.5},
                    {'method': 'fkl'}, {'batch_size': 0}):
            with self.assertRaises(ConfigError):
                TrainConfig(**bad)


class TestTrainer(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()
        self.target = gaussianTarget(1)
        self.schedule = buildVpLinear(10, 1e-3, 0.3)
        self.recipe = getRecipe('exact-gaussian')

    def tearDown(self):
        shutil.rmtree(self.dir)

    def trainer(self, **kwargs):
        return Trainer(self.target, self.schedule, self.recipe, smallConfig(),
                       **kwargs)

    def test_inner_step_leaves_the_generator(self):
        trainer = self.trainer()
        pair = trainer.state.models
        before = pair.generator.fingerprint()
        score_before = pair.scorenet.fingerprint()
        loss = trainer.scoreStep()
        self.assertTrue(np.isfinite(loss))
        self.assertEqual(pair.generator.fingerprint(), before)
        self.assertNotEqual(pair.scorenet.fingerprint(), score_before)
        self.assertEqual(trainer.state.adam_score.step, 1)

    def test_outer_step_leaves_the_score_network(self):
        trainer = self.trainer()
        trainer.scoreStep()
        pair = trainer.state.models
        before = pair.scorenet.fingerprint()
        gen_before = pair.generator.fingerprint()
        self.assertTrue(np.isfinite(trainer.generatorStep()))
        self.assertEqual(pair.scorenet.fingerprint(), before)
        self.assertNotEqual(pair.generator.fingerprint(), gen_before)
        self.assertEqual(trainer.state.adam_generator.step, 1)

    def test_run_records_every_iteration(self):
        out = io.StringIO()
        with CsvRecords(out, HISTORY_FIELDS) as records:
            state = self.trainer(out=self.dir, records=records,
                                 metadata={'config': {'seed': 1}}).run()
        lines = out.getvalue().split()
        self.assertEqual(lines[0], ','.join(HISTORY_FIELDS))
        self.assertEqual(len(lines), 4)
        self.assertEqual([row['iteration'] for row in state.history],
                         [1, 2, 3])
        self.assertEqual(state.history[0]['early_stop_tvd'], '')
        self.assertIn(state.best_iteration, (0, 2, 3))
        self.assertLessEqual(state.best_metric, state.initial_metric)
        self.assertLessEqual(state.best_metric,
                             min(row['early_stop_tvd'] for row in state.history
                                 if row['early_stop_tvd'] != ''))
        self.assertIsNotNone(state.initial_metric)
        _, metadata = ModelPair.load(os.path.join(self.dir, 'checkpoint'))
        self.assertEqual(metadata['iteration'], 3)
        self.assertEqual(metadata['config'], {'seed': 1})
        self.assertTrue(os.path.exists(state.best_checkpoint))

    def test_iteration_zero_can_be_best(self):
        cfg = smallConfig(refine_steps=0)
        state = Trainer(self.target, self.schedule, self.recipe, cfg,
                        out=self.dir).run()
        self.assertEqual(state.initial_metric, 0.0)
        self.assertEqual(state.best_iteration, 0)
        self.assertEqual(state.best_metric, 0.0)
        _, metadata = ModelPair.load(state.best_checkpoint)
        self.assertEqual(metadata['iteration'], 0)

    def test_linear_generator_learns_a_gaussian(self):
        gen = GeneratorNet(1, 1, hidden=[])
        gen.setParameters([Tensor([[0.3]]), Tensor([0.5])])
        net = ScoreNet(1, self.schedule.T, hidden=[], embed_size=4)
        cfg = smallConfig(iterations=3000, inner_steps=5, batch_size=512,
                          score_batch_size=512, lr_generator=3e-3,
                          lr_score=3e-3, eval_every=3000, refine_steps=0,
                          latent_dim=1, generator_hidden=[], score_hidden=[])
        trainDikl(self.target, self.schedule, self.recipe, cfg,
                  models=ModelPair(gen, net))
        weight, bias = [p.data for p in gen.parameters()]
        self.assertLess(abs(abs(weight.item()) - 1.0), 0.05)
        self.assertLess(abs(bias.item()), 0.05)

    def test_zero_iterations(self):
        cfg = smallConfig(iterations=0)
        state = trainDikl(self.target, self.schedule, self.recipe, cfg)
        self.assertEqual(state.history, [])
        self.assertIsNone(state.initial_metric)

    def test_same_seed_same_checkpoint(self):
        blobs = []
        for name in ('a', 'b'):
            out = os.path.join(self.dir, name)
            os.mkdir(out)
            trainDikl(self.target, self.schedule, self.recipe, smallConfig(),
                      out=out)
            with open(os.path.join(out, 'checkpoint.bin'), 'rb') as f:
                blobs.append(f.read())
        self.assertEqual(blobs[0], blobs[1])

    def test_reverse_kl_method(self):
        state = trainRklSm(self.target, self.schedule, self.recipe,
                           smallConfig(iterations=2))
        self.assertEqual(len(state.history), 2)
        self.assertTrue(all(np.isfinite(row['surrogate_loss'])
                            for row in state.history))

    def test_abort_writes_a_snapshot(self):
        cfg = smallConfig(refine_steps=0)
        pair = initModels(self.target, self.schedule, cfg)
        pair.generator.setParameters([Tensor(np.full(p.shape, np.nan))
                                      for p in pair.generator.parameters()])
        trainer = Trainer(self.target, self.schedule, self.recipe, cfg,
                          models=pair, out=self.dir)
        with self.assertRaises(TrainingAbortError) as cm:
            trainer.run()
        self.assertEqual(cm.exception.iteration, 1)
        self.assertTrue(os.path.exists(cm.exception.snapshot))

    def test_particle_training_keeps_zero_com(self):
        target = DoubleWellParticles()
        recipe = getRecipe('dw', n_importance=4, ais_steps=2, mala_steps=2,
                           keep_last=1)
        trainer = Trainer(target, buildVpLinear(10, 1e-4, 0.05, 'uniform'),
                          recipe, smallConfig(iterations=1))
        state = trainer.run()
        self.assertEqual(len(state.history), 1)
        x = state.models.generator(RngStream(0).normal((5, 8))).numpy()
        np.testing.assert_allclose(x.reshape(5, 4, 2).sum(axis=1), 0.0,
                                   atol=1e-10)


class TestEarlyStop(unittest.TestCase):

    def test_disabled_refinement(self):
        pair = initModels(gaussianTarget(2), buildVpLinear(10, 1e-3, 0.3),
                          smallConfig())
        self.assertEqual(earlyStopMetric(pair.generator, gaussianTarget(2),
                                         RngStream(0), n_eval=10,
                                         refine_steps=0), 0.0)

    def test_bounded(self):
        target = gaussianTarget(2)
        pair = initModels(target, buildVpLinear(10, 1e-3, 0.3), smallConfig())
        tvd = earlyStopMetric(pair.generator, target, RngStream(1), n_eval=200,
                              refine_steps=5)
        self.assertTrue(0.0 <= tvd <= 1.0)

    def test_exact_sampler_within_the_two_sample_band(self):
        target = mog40()
        n = 2000
        tvd = refinementTvd(target, target.groundTruthSamples(n, RngStream(3)),
                            RngStream(4))
        stream = RngStream(5)
        band = [histogramTvd(
                    target.energy(target.groundTruthSamples(n,
                                                            stream.derive(k))),
                    target.energy(target.groundTruthSamples(
                        n, stream.derive(100 + k))))
                for k in range(40)]
        self.assertLessEqual(tvd, np.percentile(band, 97.5))

    def test_constant_generator_is_far(self):
        target = mog40()
        gen = GeneratorNet(2, 2, hidden=[4])
        tvd = earlyStopMetric(gen, target, RngStream(6), n_eval=2000,
                              refine_steps=50)
        self.assertGreater(tvd, 0.5)


if __name__ == '__main__':
    unittest.main()
