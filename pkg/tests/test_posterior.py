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

import unittest

import numpy as np
from scipy import stats

from dikl.errors import ConfigError, ContractError, DegenerateWeightsError
from dikl.numerics import RngStream
from dikl.diffusion import NoiseSchedule, buildVpLinear
from dikl.targets import DoubleWellParticles, gaussianTarget, mog40
from dikl.posterior import (AisConfig, ChainState, PosteriorProblem,
                            RecordingNoise, ReplayNoise, TargetDensity,
                            aisRun, analyticGaussianPosterior,
                            effectiveSampleSize, getRecipe, hamiltonian,
                            hmcStep, isWeights, leapfrog, malaStep,
                            normalizeLogWeights, referenceChain,
                            samplePosterior, sirResample, ulaStep)

from .test_numerics import finiteDifference, relativeError


def gaussianProblem(t, chains=None, dim=2, seed=0):
    target = gaussianTarget(dim)
    schedule = buildVpLinear(30, 1e-4, 0.7)
    x_t = RngStream(seed, 99).normal(dim)
    if chains is not None:
        x_t = np.tile(x_t, (chains, 1))
    return PosteriorProblem(target, x_t, t, schedule)


class TestProblem(unittest.TestCase):

    def test_score_is_log_density_gradient(self):
        target = mog40()
        schedule = buildVpLinear(30, 1e-4, 0.7)
        prob = PosteriorProblem(target, np.array([3.0, -2.0]), 12, schedule)
        for x in RngStream(1).normal((3, 2)) * 10.0:
            expected = finiteDifference(lambda y: float(prob.logDensity(y)), x)
            self.assertLess(relativeError(prob.score(x), expected), 1e-6)

    def test_target_score_recovery(self):
        prob = gaussianProblem(10, chains=3)
        x = RngStream(2).normal((3, 2))
        np.testing.assert_allclose(prob.targetScoreFrom(x, prob.score(x)),
                                   prob.target.score(x), atol=1e-12)

    def test_noiseless_step(self):
        with self.assertRaises(ContractError):
            PosteriorProblem(gaussianTarget(1), [0.0], 1,
                             NoiseSchedule([0.0, 0.2]))

    def test_dimension_mismatch(self):
        with self.assertRaises(ContractError):
            PosteriorProblem(gaussianTarget(2), [0.0, 1.0, 2.0], 1,
                             NoiseSchedule([0.2]))

    def test_analytic_posterior_needs_a_gaussian(self):
        prob = PosteriorProblem(mog40(), [0.0, 0.0], 3,
                                buildVpLinear(30, 1e-4, 0.7))
        with self.assertRaises(ConfigError):
            analyticGaussianPosterior(prob)

    def test_standard_gaussian_posterior(self):
        prob = gaussianProblem(7)
        mean, var = analyticGaussianPosterior(prob)
        np.testing.assert_allclose(mean, prob.alpha * prob.x_t, rtol=1e-12)
        self.assertAlmostEqual(var, prob.sigma2, places=12)


class TestKernels(unittest.TestCase):

    def test_zero_step_hmc_stays_put(self):
        prob = gaussianProblem(5, chains=4)
        state = ChainState.start(prob, RngStream(3).normal((4, 2)), 0.0)
        new = hmcStep(prob, state, RngStream(4))
        np.testing.assert_array_equal(new.x, state.x)
        self.assertEqual(new.acceptance, 1.0)

    def test_huge_step_mala_rejects(self):
        prob = gaussianProblem(5, chains=50)
        state = ChainState.start(prob, prob.x_t / prob.alpha, 1e3)
        new = malaStep(prob, state, RngStream(5))
        np.testing.assert_array_equal(new.x, state.x)
        self.assertEqual(new.acceptance, 0.0)

    def test_invalid_steps(self):
        prob = gaussianProblem(5, chains=2)
        state = ChainState.start(prob, np.zeros((2, 2)), 0.0)
        for kernel in (malaStep, ulaStep):
            with self.assertRaises(ContractError):
                kernel(prob, state, RngStream(6))

    def test_ula_always_accepts(self):
        prob = gaussianProblem(5, chains=8)
        state = ChainState.start(prob, np.zeros((8, 2)), 0.05)
        new = ulaStep(prob, state, RngStream(7))
        self.assertEqual(new.acceptance, 1.0)
        self.assertEqual(new.trials, 8)

    def test_mala_reaches_the_posterior(self):
        n = 4000
        prob = gaussianProblem(8, chains=n)
        mean, var = analyticGaussianPosterior(prob)
        state = ChainState.start(prob, prob.x_t / prob.alpha, 0.1)
        stream = RngStream(8)
        for _ in range(300):
            state = malaStep(prob, state, stream)
        se = np.sqrt(var / n)
        np.testing.assert_array_less(np.abs(state.x.mean(axis=0) - mean[0]),
                                     4.5 * se)
        np.testing.assert_array_less(np.abs(state.x.var(axis=0) - var),
                                     4.5 * var * np.sqrt(2.0 / n))

    def test_leapfrog_energy_error_order(self):
        """One step from the mode of a Gaussian makes an energy error of
        exactly |p|^2 (h omega)^4 / 8; over a fixed horizon it is O(h^2)"""
        prob = gaussianProblem(10, chains=200)
        mean, var = analyticGaussianPosterior(prob)
        omega = 1.0 / np.sqrt(var)
        p = RngStream(14).normal((200, 2))
        x = mean + np.sqrt(var) * RngStream(15).normal((200, 2))

        def energyError(x, step, n_steps):
            h0 = prob.score(x)
            x1, p1, _ = leapfrog(prob, x, p, h0, step, n_steps)
            return np.abs(hamiltonian(prob, x1, p1) - hamiltonian(prob, x, p))

        steps = np.array([0.4, 0.2, 0.1]) / omega
        single = [energyError(mean, h, 1).mean() for h in steps]
        slope = np.polyfit(np.log(steps), np.log(single), 1)[0]
        self.assertAlmostEqual(slope, 4.0, delta=0.1)
        steps = np.array([0.2, 0.1, 0.05]) / omega
        horizon = [energyError(x, h, n).mean()
                   for h, n in zip(steps, (5, 10, 20))]
        slope = np.polyfit(np.log(steps), np.log(horizon), 1)[0]
        self.assertTrue(1.85 <= slope <= 2.15, slope)

    def test_kernels_pass_a_goodness_of_fit(self):
        """100000 independent chains on a 1D Gaussian posterior, binned by
        the exact CDF into 64 equiprobable bins"""
        n = 100000
        prob = gaussianProblem(10, chains=n, dim=1)
        mean, var = analyticGaussianPosterior(prob)
        sd = np.sqrt(var)
        start = mean + 2.0 * sd * RngStream(16).normal((n, 1))
        for kernel, step, kwargs in ((malaStep, 0.5 * var, {}),
                                     (hmcStep, 0.5 * sd, {'n_leapfrog': 3})):
            state = ChainState.start(prob, start, step)
            stream = RngStream(17)
            for _ in range(100):
                state = kernel(prob, state, stream, **kwargs)
            u = stats.norm.cdf((state.x[:, 0] - mean[:, 0]) / sd)
            counts = np.bincount(np.minimum((u * 64).astype(int), 63),
                                 minlength=64)
            self.assertGreater(stats.chisquare(counts).pvalue, 0.01,
                               kernel.__name__)

    def test_reference_chain_shape(self):
        density = TargetDensity(gaussianTarget(3))
        kept = referenceChain(density, np.zeros((5, 3)), RngStream(9),
                              n_keep=4, burn_in=20, thin=3, step_size=0.5)
        self.assertEqual(kept.shape, (4, 5, 3))


class TestWeights(unittest.TestCase):

    def test_normalization(self):
        w = normalizeLogWeights(np.array([[0.0, 1.0], [np.nan, 1.0],
                                          [-np.inf, 1.0]]))
        np.testing.assert_allclose(w.sum(axis=0), 1.0)
        np.testing.assert_allclose(w[:, 0], [1.0, 0.0, 0.0])
        np.testing.assert_allclose(effectiveSampleSize(w), [1.0, 3.0])

    def test_degenerate(self):
        with self.assertRaises(DegenerateWeightsError) as cm:
            normalizeLogWeights(np.array([-np.inf, np.nan]), t=12)
        self.assertEqual(cm.exception.t, 12)

    def test_is_weights(self):
        prob = gaussianProblem(10)
        samples, weights = isWeights(prob, 500, RngStream(10))
        self.assertEqual(samples.shape, (500, 2))
        self.assertAlmostEqual(weights.sum(), 1.0, places=12)
        self.assertTrue(1.0 <= effectiveSampleSize(weights) <= 500.0)

    def test_sir_frequencies(self):
        picks = sirResample(np.array([0.0, 1.0]), np.array([0.2, 0.8]),
                            RngStream(11), count=20000)
        self.assertAlmostEqual(picks.mean(), 0.8, delta=0.015)

    def test_sir_per_chain(self):
        candidates = np.arange(6.0).reshape(3, 2, 1)
        weights = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(
            sirResample(candidates, weights, RngStream(12)), [[0.0], [5.0]])

    def test_single_step_ais_is_importance_sampling(self):
        prob = gaussianProblem(12, chains=3)
        cfg = AisConfig(n_importance=64, n_steps=1, kernel='mala',
                        step_size=0.1)
        samples, weights, ess = aisRun(prob, cfg, RngStream(13))
        is_samples, is_weights = isWeights(prob, 64, RngStream(13))
        np.testing.assert_array_equal(samples, is_samples)
        np.testing.assert_array_equal(weights, is_weights)
        np.testing.assert_array_equal(ess, effectiveSampleSize(is_weights))

    def test_annealing_narrows_the_log_weights(self):
        target = gaussianTarget(2, variance=0.1)
        prob = PosteriorProblem(target, np.array([0.5, -0.5]), 8,
                                buildVpLinear(30, 1e-4, 0.7))
        _, is_weights = isWeights(prob, 4000, RngStream(1))
        ais = aisRun(prob, AisConfig(n_importance=4000, n_steps=20,
                                     kernel='hmc', step_size=0.3,
                                     n_leapfrog=3), RngStream(2))
        self.assertLess(np.var(np.log(ais.weights)),
                        np.var(np.log(is_weights)))

    def test_ais_ladder_validation(self):
        with self.assertRaises(ConfigError):
            AisConfig(4, 2, ladder=[0.0, 0.7, 0.5])
        with self.assertRaises(ConfigError):
            AisConfig(4, 2, kernel='gibbs')


class TestRecipes(unittest.TestCase):

    def test_lookup(self):
        self.assertEqual(getRecipe('is500+mala1000').name, 'lj')
        self.assertEqual(getRecipe('mog', mala_steps=8).mala_steps, 8)
        with self.assertRaises(ConfigError):
            getRecipe('nuts')
        with self.assertRaises(ConfigError):
            getRecipe('mog', keep_last=9)

    def test_mog_recipe_shapes(self):
        target = mog40()
        prob = PosteriorProblem(target, RngStream(14).normal((6, 2)), 9,
                                buildVpLinear(30, 1e-4, 0.7))
        post = samplePosterior(prob, 'mog', RngStream(15))
        self.assertEqual(post.samples.shape, (1, 6, 2))
        np.testing.assert_allclose(post.scores, target.score(post.samples),
                                   rtol=1e-6, atol=1e-6)
        self.assertEqual(post.step_size, 1e-2)

    def test_tail_collection_and_adaptation(self):
        target = DoubleWellParticles()
        schedule = buildVpLinear(30, 1e-6, 0.05, 'uniform')
        x_t = target.initialConfigurations(3, RngStream(16))
        prob = PosteriorProblem(target, x_t, 20, schedule)
        recipe = getRecipe('lj', n_importance=20, mala_steps=30, keep_last=10)
        post = samplePosterior(prob, recipe, RngStream(17))
        self.assertEqual(post.samples.shape, (10, 3, 8))
        np.testing.assert_allclose(post.scores, target.score(post.samples),
                                   rtol=1e-6, atol=1e-6)
        self.assertNotEqual(post.step_size, recipe.mala_step)
        self.assertTrue(0.0 <= post.acceptance <= 1.0)

    def test_exact_recipe(self):
        prob = gaussianProblem(4, chains=2)
        post = samplePosterior(prob, getRecipe('exact-gaussian', keep_last=3),
                               RngStream(18))
        self.assertEqual(post.samples.shape, (3, 2, 2))
        with self.assertRaises(ConfigError):
            samplePosterior(PosteriorProblem(mog40(), [0.0, 0.0], 3,
                                             buildVpLinear(30, 1e-4, 0.7)),
                            'exact-gaussian', RngStream(19))


class TestNoise(unittest.TestCase):

    def test_replay_reproduces_a_run(self):
        prob = gaussianProblem(6, chains=5)
        state = ChainState.start(prob, np.zeros((5, 2)), 0.2)
        rec = RecordingNoise(RngStream(20))
        a = malaStep(prob, state, rec)
        b = malaStep(prob, state, ReplayNoise(rec.record))
        np.testing.assert_array_equal(a.x, b.x)

    def test_replay_mismatch(self):
        rec = RecordingNoise(RngStream(21))
        rec.gaussian(3)
        with self.assertRaises(ContractError):
            ReplayNoise(rec.record).uniform(3)
        replay = ReplayNoise(rec.record)
        replay.gaussian(3)
        with self.assertRaises(ContractError):
            replay.gaussian(3)


if __name__ == '__main__':
    unittest.main()
