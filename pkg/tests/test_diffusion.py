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

from dikl.errors import ConfigError, ContractError
from dikl.numerics import GradTape, RngStream, Tensor, backward
from dikl.diffusion import (NoiseSchedule, buildVpLinear, forwardNoise,
                            kernelScore, timeEmbedding)
from dikl.targets import zeroCenterProject


class TestSchedule(unittest.TestCase):

    def setUp(self):
        self.schedule = buildVpLinear(30, 1e-4, 0.7)

    def test_variance_preserving(self):
        s = self.schedule
        np.testing.assert_allclose(s.alphas ** 2 + s.sigma2s, 1.0, atol=1e-15)
        self.assertTrue(np.all(np.diff(s.alphas) < 0))
        self.assertAlmostEqual(s.betas[0], 1e-4)
        self.assertAlmostEqual(s.betas[-1], 0.7)

    def test_weightings(self):
        s = self.schedule
        for weighting, expected in (
                ('inv_alpha', 1.0 / s.alphas),
                ('uniform', np.ones(30)),
                ('sigma2_over_alpha', s.sigma2s / s.alphas),
                ('sigma2_over_alpha2', s.sigma2s / s.alphas ** 2)):
            other = buildVpLinear(30, 1e-4, 0.7, weighting)
            np.testing.assert_allclose(other.weights, expected, rtol=1e-14)

    def test_read_only(self):
        with self.assertRaises(ValueError):
            self.schedule.alphas[0] = 0.5

    def test_steps_are_one_based(self):
        self.assertEqual(self.schedule.alpha(1), float(self.schedule.alphas[0]))
        for t in (0, 31):
            with self.assertRaises(ContractError):
                self.schedule.sigma2(t)

    def test_uniform_time(self):
        stream = RngStream(0, 4)
        draws = [self.schedule.sampleTime(stream) for _ in range(3000)]
        self.assertEqual(min(draws), 1)
        self.assertEqual(max(draws), 30)

    def test_invalid(self):
        for args in ((5, 0.5, 0.1), (5, 0.1, 1.0)):
            with self.assertRaises(ConfigError):
                buildVpLinear(*args)
        with self.assertRaises(ConfigError):
            NoiseSchedule([0.1], 'cosine')


class TestKernel(unittest.TestCase):

    def setUp(self):
        self.schedule = buildVpLinear(10, 0.01, 0.2)

    def test_forward_noise_moments(self):
        t = 6
        x = np.full((50000, 2), 2.0)
        eps = RngStream(1).normal(x.shape)
        x_t = forwardNoise(self.schedule, x, t, eps)
        self.assertAlmostEqual(x_t.mean(), 2.0 * self.schedule.alpha(t),
                               delta=0.02)
        self.assertAlmostEqual(x_t.var(), self.schedule.sigma2(t), delta=0.02)

    def test_forward_noise_on_tape(self):
        x = Tensor([[1.0, 2.0]], requires_grad=True)
        with GradTape() as tape:
            root = forwardNoise(self.schedule, x, 3, np.ones((1, 2))).sum()
        grad = backward(root, tape)[x].data
        np.testing.assert_allclose(grad, self.schedule.alpha(3))

    def test_projected_noise(self):
        eps = RngStream(2).normal((3, 6))
        x_t = forwardNoise(self.schedule, np.zeros((3, 6)), 2, eps,
                           lambda v: zeroCenterProject(v, 3, 2))
        np.testing.assert_allclose(x_t.reshape(3, 3, 2).sum(axis=1), 0.0,
                                   atol=1e-12)

    def test_kernel_score_is_log_kernel_gradient(self):
        t = 4
        a, s2 = self.schedule.alpha(t), self.schedule.sigma2(t)
        x, x_t = np.array([0.3, -1.2]), np.array([1.0, 0.5])
        logk = lambda y: -0.5 * np.sum((y - a * x) ** 2) / s2
        h = 1e-6
        fd = np.array([(logk(x_t + h * e) - logk(x_t - h * e)) / (2 * h)
                       for e in np.eye(2)])
        np.testing.assert_allclose(kernelScore(self.schedule, x, x_t, t), fd,
                                   rtol=1e-7)

    def test_noiseless_step(self):
        s = NoiseSchedule([0.0, 0.1])
        with self.assertRaises(ContractError):
            kernelScore(s, np.zeros(1), np.zeros(1), 1)

    def test_shape_mismatch(self):
        with self.assertRaises(ContractError):
            kernelScore(self.schedule, np.zeros(2), np.zeros(3), 1)


class TestTimeEmbedding(unittest.TestCase):

    def test_bounded_and_distinct(self):
        rows = np.array([timeEmbedding(t, 30, 16) for t in range(31)])
        self.assertEqual(rows.shape, (31, 16))
        self.assertTrue(np.all(np.abs(rows) <= 1.0))
        self.assertEqual(len(set(map(tuple, rows.round(12)))), 31)


if __name__ == '__main__':
    unittest.main()
