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

"""Score identities and the training losses built on them

Posterior samples come stacked along a leading axis of size K, optionally
with self-normalized weights of shape ``(K, ...)``. Every loss is averaged
over the batch.
"""

import collections

import numpy as np

from .errors import ContractError
from .numerics import Tensor
from .diffusion import forwardNoise, kernelScore


NoisyScoreEstimate = collections.namedtuple('NoisyScoreEstimate',
                                            ['value', 'kind', 'K'])


def _average(values, weights):
    if weights is None:
        return values.mean(axis=0)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != values.shape[:-1]:
        raise ContractError({'op': 'estimate',
                             'msg': 'weights of shape %s do not match samples '
                                    'of shape %s' % (weights.shape,
                                                     values.shape)})
    return np.sum(weights[..., None] * values, axis=0)

def _samples(samples, x_t):
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[1:] != np.shape(x_t):
        raise ContractError({'op': 'estimate',
                             'msg': 'samples of shape %s do not stack points '
                                    'shaped like x_t %s' % (samples.shape,
                                                            np.shape(x_t))})
    return samples


def dsiEstimate(schedule, t, x_t, samples, weights=None):
    """Denoising score identity: E[(alpha x - x_t) / sigma^2 | x_t]

    >>> from dikl.diffusion import NoiseSchedule
    >>> s = NoiseSchedule([0.36])
    >>> est = dsiEstimate(s, 1, np.array([0.8]), np.array([[1.0]]))
    >>> bool(abs(est.value[0]) < 1e-12)
    True

    """
    samples = _samples(samples, x_t)
    value = _average(kernelScore(schedule, samples,
                                 np.broadcast_to(x_t, samples.shape), t),
                     weights)
    return NoisyScoreEstimate(value, 'DSI', len(samples))


def tsiEstimate(target, schedule, t, x_t, samples, scores=None, weights=None):
    """Target score identity: E[-grad E(x) | x_t] / alpha"""
    samples = _samples(samples, x_t)
    scores = target.score(samples) if scores is None else scores
    value = _average(np.asarray(scores), weights) / schedule.alpha(t)
    return NoisyScoreEstimate(value, 'TSI', len(samples))


def msiEstimate(target, schedule, t, x_t, samples, scores=None, weights=None):
    """Mixed score identity: E[alpha (x - grad E(x)) - x_t | x_t]

    `scores` are the target scores -grad E at `samples` when a sampler
    already computed them.

    >>> from dikl.targets import gaussianTarget
    >>> from dikl.diffusion import NoiseSchedule
    >>> s = NoiseSchedule([0.36])
    >>> est = msiEstimate(gaussianTarget(1), s, 1, np.array([1.0]),
    ...                   np.array([[0.5]]))
    >>> est.value, est.kind
    (array([-1.]), 'MSI')

    """
    samples = _samples(samples, x_t)
    scores = target.score(samples) if scores is None else scores
    a = schedule.alpha(t)
    value = _average(a * (samples + np.asarray(scores)) - x_t, weights)
    return NoisyScoreEstimate(value, 'MSI', len(samples))


def msiFromPosterior(prob, posterior):
    """The MSI of a `PosteriorSamples` bundle drawn for `prob`"""
    return msiEstimate(prob.target, prob.schedule, prob.t, prob.x_t,
                       posterior.samples, posterior.scores)


def dsmLoss(scorenet, schedule, x, stream, t=None, eps=None, project=None):
    """Denoising score matching at one shared step t ~ U{1..T}

        mean_b |s(x_t, t) - (alpha_t x - x_t) / sigma_t^2|^2

    :param x:
        :type: array (B, dim)
        Detached model samples
    :param project:
        Applied to the noise for zero-CoM targets

    :returns:
        ``(loss, t)``, the loss a scalar `Tensor` recorded on the active tape

    """
    x = np.asarray(getattr(x, 'data', x), dtype=np.float64)
    t = schedule.sampleTime(stream) if t is None else int(t)
    eps = stream.normal(x.shape) if eps is None else np.asarray(eps)
    x_t = forwardNoise(schedule, x, t, eps, project)
    regress = kernelScore(schedule, x, x_t, t)
    pred = scorenet.forward(x_t, t)
    return (pred - regress).sumSquares(axis=1).mean(), t


def cleanDsmLoss(scorenet, x, stream, sigma=1e-2, eps=None, project=None):
    """Score matching of the model density itself, by DSM at the small
    fixed noise `sigma`, with the network conditioned on t = 0"""
    x = np.asarray(getattr(x, 'data', x), dtype=np.float64)
    eps = stream.normal(x.shape) if eps is None else np.asarray(eps)
    if project is not None:
        eps = project(eps)
    x_noisy = x + sigma * eps
    pred = scorenet.forward(x_noisy, 0)
    return (pred + eps / sigma).sumSquares(axis=1).mean()


def surrogateLoss(difference, x, weight=1.0):
    """weight * mean_b <difference_b, x_b>, `difference` held constant

    >>> x = Tensor([[3.0, 1.0]], requires_grad=True)
    >>> float(surrogateLoss(np.array([[1.0, -1.0]]), x, 2.0).data)
    4.0

    """
    difference = np.atleast_2d(np.asarray(difference, dtype=np.float64))
    if difference.shape != x.shape:
        raise ContractError({'op': 'surrogateLoss',
                             'msg': 'difference %s and points %s disagree' \
                                    % (difference.shape, x.shape)})
    return (Tensor(weight * difference, copy=False) * x).sum() / \
           float(x.shape[0])


def diklSurrogate(scorenet, schedule, t, x_t, d_p):
    """w(t) mean_b <stopgrad(s(x_t) - d_p), x_t>, whose gradient through
    x_t is the diffusive KL gradient estimate

    :param scorenet:
        Called as ``scorenet(x_t, t)`` on detached values
    :param x_t:
        :type: `Tensor` (B, dim)
        Noisy samples still recorded on the generator tape
    :param d_p:
        :type: array (B, dim)
        Noisy target score estimates

    """
    s = np.asarray(scorenet(x_t.numpy(), t))
    return surrogateLoss(s - np.asarray(d_p), x_t, schedule.weight(t))


def rklSurrogate(scorenet_clean, target, x):
    """mean_b <stopgrad(s(x) + grad E(x)), x>, the reverse KL gradient
    with the entropy term taken from a clean model score network"""
    values = x.numpy()
    s = np.asarray(scorenet_clean(values, 0))
    return surrogateLoss(s - target.score(values), x)
