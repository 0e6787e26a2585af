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

"""Variance preserving Gaussian kernels k_t(x_t|x) = N(alpha_t x, sigma_t^2 I)

Steps are indexed ``t = 1..T``.
"""

import numpy as np

from .errors import ConfigError, ContractError
from .numerics import Tensor


WEIGHTINGS = {
    'inv_alpha': lambda a, s2: 1.0 / a,
    'uniform': lambda a, s2: np.ones_like(a),
    'sigma2_over_alpha': lambda a, s2: s2 / a,
    'sigma2_over_alpha2': lambda a, s2: s2 / (a * a),
}


class NoiseSchedule(object):
    """An immutable ladder of VP kernels

    :param betas:
        :type: array (T,)
        Per step noise rates in [0, 1)
    :param weighting:
        :type: `str`
        A key of `WEIGHTINGS`

    >>> s = NoiseSchedule([0.1, 0.2])
    >>> round(s.alpha(1) ** 2, 12), round(s.sigma2(2), 12)
    (0.9, 0.28)

    """
    def __init__(self, betas, weighting='inv_alpha'):
        super(NoiseSchedule, self).__init__()
        betas = np.asarray(betas, dtype=np.float64).ravel()
        if betas.size < 1 or np.any(betas < 0) or np.any(betas >= 1):
            raise ConfigError({'msg': 'noise rates must lie in [0, 1)',
                               'key': 'diffusion.beta_min'})
        if weighting not in WEIGHTINGS:
            raise ConfigError({'msg': "unknown weighting '%s', expected one "
                                      "of %s" % (weighting,
                                                 ', '.join(sorted(WEIGHTINGS))),
                               'key': 'diffusion.weighting'})
        self.__betas = betas
        self.__alphas = np.sqrt(np.cumprod(1.0 - betas))
        self.__sigma2 = 1.0 - self.__alphas ** 2
        self.__weights = WEIGHTINGS[weighting](self.__alphas, self.__sigma2)
        self.__weighting = weighting
        for a in (self.__betas, self.__alphas, self.__sigma2, self.__weights):
            a.setflags(write=False)

    T = property(lambda self: len(self.__betas))
    betas = property(lambda self: self.__betas)
    alphas = property(lambda self: self.__alphas)
    sigma2s = property(lambda self: self.__sigma2)
    weights = property(lambda self: self.__weights)
    weighting = property(lambda self: self.__weighting)

    def __repr__(self):
        return 'NoiseSchedule(T=%d, weighting=%r)' % (self.T, self.__weighting)

    def __index(self, t):
        if not 1 <= t <= self.T:
            raise ContractError({'op': 'schedule',
                                 'msg': 'step %s outside 1..%d' % (t, self.T)})
        return int(t) - 1

    def alpha(self, t):
        return float(self.__alphas[self.__index(t)])

    def sigma2(self, t):
        return float(self.__sigma2[self.__index(t)])

    def sigma(self, t):
        return float(np.sqrt(self.__sigma2[self.__index(t)]))

    def weight(self, t):
        return float(self.__weights[self.__index(t)])

    def sampleTime(self, stream):
        """t ~ U{1..T}"""
        return int(stream.integers(1, self.T))

    def describe(self):
        return {'T': self.T, 'weighting': self.__weighting,
                'beta_min': float(self.__betas[0]),
                'beta_max': float(self.__betas[-1]),
                'alpha_T': float(self.__alphas[-1])}


def buildVpLinear(T, beta_min, beta_max, weighting='inv_alpha'):
    """Linear noise rates from `beta_min` to `beta_max` over t = 1..T

    >>> s = buildVpLinear(3, 0.0, 0.0)
    >>> s.alphas, s.sigma2s
    (array([1., 1., 1.]), array([0., 0., 0.]))
    >>> buildVpLinear(1, 0.75, 0.75).weights
    array([2.])
    >>> try:
    ...     buildVpLinear(0, 0.1, 0.2)
    ... except ConfigError as e:
    ...     print(e.key)
    diffusion.T

    """
    if not (int(T) >= 1 and 0.0 <= beta_min <= beta_max < 1.0):
        raise ConfigError({'msg': 'invalid linear schedule: T=%s, beta in '
                                  '[%s, %s]' % (T, beta_min, beta_max),
                           'key': 'diffusion.T'})
    return NoiseSchedule(np.linspace(beta_min, beta_max, int(T)), weighting)


def forwardNoise(schedule, x, t, eps, project=None):
    """x_t = alpha_t x + sigma_t eps

    `x` may be a `Tensor` live on a tape, in which case so is the result.
    `project`, when given, is applied to `eps` first (zero-CoM targets).

    >>> s = NoiseSchedule([0.36])
    >>> forwardNoise(s, np.array([1., 2.]), 1, np.zeros(2))
    array([0.8, 1.6])

    """
    eps = np.asarray(eps.data if isinstance(eps, Tensor) else eps,
                     dtype=np.float64)
    if project is not None:
        eps = project(eps)
    a, sigma = schedule.alpha(t), schedule.sigma(t)
    if isinstance(x, Tensor):
        return x * a + Tensor(sigma * eps, copy=False)
    return a * np.asarray(x, dtype=np.float64) + sigma * eps


def kernelScore(schedule, x, x_t, t):
    """grad_{x_t} log k_t(x_t|x) = (alpha_t x - x_t) / sigma_t^2

    >>> s = NoiseSchedule([0.36])
    >>> round(float(kernelScore(s, np.array([0.5]), np.array([1.0]), 1)[0]), 4)
    -1.6667

    """
    sigma2 = schedule.sigma2(t)
    if not sigma2 > 0:
        raise ContractError({'op': 'kernelScore',
                             'msg': 'step %d has no noise (sigma_t = 0)' % t})
    x, x_t = np.asarray(x, np.float64), np.asarray(x_t, np.float64)
    if x.shape != x_t.shape:
        raise ContractError({'op': 'kernelScore',
                             'msg': 'shapes %s and %s disagree' % (x.shape,
                                                                   x_t.shape)})
    return (schedule.alpha(t) * x - x_t) / sigma2


def timeEmbedding(t, T, size=64):
    """Sinusoidal features of t/T: ``size/2`` sines then ``size/2`` cosines
    over geometrically spaced frequencies

    >>> timeEmbedding(3, 10).shape
    (64,)

    """
    half = size // 2
    freqs = np.exp(-np.log(1.0e4) * np.arange(half) / max(half - 1, 1))
    phase = 1.0e3 * (float(t) / T) * freqs
    return np.concatenate([np.sin(phase), np.cos(phase)])
