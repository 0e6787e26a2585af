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

"""Training loops

Each outer iteration first fits the score network to fresh generator
samples for `inner_steps` DSM steps, then takes one generator step on the
surrogate loss. The generator is never updated in the inner loop and the
score network never in the outer step.
"""

import os
import math
import logging
import itertools

import numpy as np

from .errors import ConfigError, TrainingAbortError
from .numerics import (GradTape, RngStream, AdamState, adamStep, backward,
                       clipGradNorm, suspendTape)
from .diffusion import forwardNoise
from .networks import GeneratorNet, ScoreNet, ModelPair, generate
from .posterior import (PosteriorProblem, TargetDensity, ChainState,
                        malaStep, adaptStepSize, samplePosterior)
from .estimators import (dsmLoss, cleanDsmLoss, msiFromPosterior,
                         diklSurrogate, rklSurrogate)
from .evaluation import histogramTvd
from .multithreading import LockedGenerator
from .utils import CallableGenerator, Namespace, NoOp, ispositive


# Stream ids, one per concern
STREAM_INIT = 1
STREAM_LATENT = 2
STREAM_DSM = 3
STREAM_TIME = 4
STREAM_POSTERIOR = 5
STREAM_EVAL = 6

METHODS = ('dikl', 'rkl_sm')

HISTORY_FIELDS = ('iteration', 'dsm_loss', 'surrogate_loss', 'early_stop_tvd',
                  'step_size', 'acceptance')


class TrainConfig(Namespace):
    """Trainer and network settings

    >>> cfg = TrainConfig(iterations=10)
    >>> cfg.inner_steps, cfg.iterations
    (50, 10)
    >>> for bad in ({'lr_score': 0}, {'foo': 1}):
    ...     try:
    ...         TrainConfig(**bad)
    ...     except ConfigError as e:
    ...         print(e.key)
    trainer.lr_score
    trainer.foo

    """
    DEFAULTS = {
        'method': 'dikl',
        'iterations': 2000,
        'inner_steps': 50,
        'batch_size': 256,
        'score_batch_size': 256,
        'lr_generator': 1e-3,
        'lr_score': 1e-3,
        'grad_clip': 10.0,
        'eval_every': 250,
        'n_eval': 2000,
        'refine_steps': 50,
        'refine_step': 1e-2,
        'clean_sigma': 1e-2,
        'latent_dim': None,
        'generator_hidden': [256] * 5,
        'score_hidden': [256] * 3,
        'activation': 'silu',
        'embed_size': 64,
        'seed': 0,
    }
    POSITIVE = ('batch_size', 'score_batch_size', 'lr_generator', 'lr_score',
                'grad_clip', 'eval_every', 'n_eval', 'clean_sigma',
                'refine_step', 'embed_size')

    def __init__(self, **kwargs):
        for name in kwargs:
            if name not in self.DEFAULTS:
                raise ConfigError({'msg': "unknown trainer setting '%s'" % name,
                                   'key': 'trainer.%s' % name})
        settings = dict(self.DEFAULTS)
        settings.update((k, v) for k, v in kwargs.items() if v is not None)
        super(TrainConfig, self).__init__(**settings)
        for name in self.POSITIVE:
            if not ispositive(self[name]):
                raise ConfigError({'msg': "'%s' must be > 0" % name,
                                   'key': 'trainer.%s' % name})
        for name in ('iterations', 'inner_steps', 'refine_steps'):
            if not (isinstance(self[name], int) and self[name] >= 0):
                raise ConfigError({'msg': "'%s' must be an int >= 0" % name,
                                   'key': 'trainer.%s' % name})
        if self.method not in METHODS:
            raise ConfigError({'msg': "unknown training method '%s'" \
                                      % self.method,
                               'key': 'trainer.method'})


def initModels(target, schedule, cfg):
    """A fresh generator and score network from `cfg.seed`"""
    stream = RngStream(cfg.seed, STREAM_INIT)
    latent = cfg.latent_dim or target.dim
    gen = GeneratorNet(latent, target.dim, cfg.generator_hidden,
                       cfg.activation, target.symmetry, stream.derive(0))
    net = ScoreNet(target.dim, schedule.T, cfg.score_hidden, cfg.activation,
                   cfg.embed_size, target.symmetry, stream.derive(1))
    return ModelPair(gen, net)


class RunState(object):
    """Models, optimizer states, the carried MALA step size and the metric
    record of a run"""

    def __init__(self, models, cfg, step_size):
        super(RunState, self).__init__()
        self.models = models
        self.adam_generator = AdamState.forParameters(
            models.generator.parameters(), lr=cfg.lr_generator)
        self.adam_score = AdamState.forParameters(
            models.scorenet.parameters(), lr=cfg.lr_score)
        self.iteration = 0
        self.step_size = step_size
        self.acceptance = float('nan')
        self.initial_metric = None
        self.best_metric = math.inf
        self.best_iteration = None
        self.best_checkpoint = None
        self.history = []


def _update(network, loss, tape, adam, clip=None):
    params = network.parameters()
    grads = backward(loss, tape)
    grads = [grads[p] for p in params]
    if clip is not None:
        grads = clipGradNorm(grads, clip)
    new, adam = adamStep(params, grads, adam)
    network.setParameters(new)
    return adam


def refinementTvd(target, x, stream, refine_steps=50, step_size=1e-2):
    """Energy histogram TVD between the samples `x` and the same samples
    after `refine_steps` adaptive MALA steps on the target

    An exact sampler scores within the two-sample noise of 0, a sampler
    stuck away from the target mass scores close to 1.

    :returns:
        The TVD, 0 when refinement is disabled

    """
    if refine_steps == 0:
        return 0.0
    density = TargetDensity(target)
    state = ChainState.start(density, x, step_size)
    for _ in range(refine_steps):
        state = adaptStepSize(malaStep(density, state, stream))
    with np.errstate(all='ignore'):
        return histogramTvd(target.energy(x), target.energy(state.x))


def earlyStopMetric(generator, target, stream, n_eval=2000, refine_steps=50,
                    step_size=1e-2):
    """`refinementTvd` of `n_eval` raw generator samples"""
    if refine_steps == 0:
        return 0.0
    with suspendTape():
        x = generate(generator,
                     stream.normal((n_eval, generator.latent_dim))).numpy()
    return refinementTvd(target, x, stream, refine_steps, step_size)


class Trainer(object):
    """Runs one training method over a target

    :param target:
        :type: `EnergyTarget`
    :param schedule:
        :type: `NoiseSchedule`
    :param recipe:
        :type: `Recipe`
        Posterior pipeline of the DiKL outer step
    :param cfg:
        :type: `TrainConfig`
    :param models:
        :type: `ModelPair or None`
        Initialized from `cfg.seed` when not given
    :param out:
        :type: `str or None`
        Directory receiving checkpoints and abort snapshots
    :param records:
        :type: `CsvRecords or None`
        Receives one row per outer iteration
    :param metadata:
        :type: `dict or None`
        Stamped into every checkpoint the run writes
    :param log:
        :type: `bool`

    """
    __uniqueId = CallableGenerator(LockedGenerator(itertools.count(1, 1)))

    def __init__(self, target, schedule, recipe, cfg, models=None, out=None,
                 records=None, log=False, metadata=None):
        super(Trainer, self).__init__()
        if not isinstance(log, bool):
            raise TypeError("'log' argument must be a boolean value")
        self.id = self.__uniqueId()
        self.__target = target
        self.__schedule = schedule
        self.__recipe = recipe
        self.__cfg = cfg
        self.__out = out
        self.__records = records
        self.__metadata = dict(metadata or {})
        self.__logger = self.__initLogger(log)
        models = initModels(target, schedule, cfg) if models is None else models
        self.__state = RunState(models, cfg, recipe.mala_step)
        seed = cfg.seed
        self.__latents = RngStream(seed, STREAM_LATENT)
        self.__dsm = RngStream(seed, STREAM_DSM)
        self.__times = RngStream(seed, STREAM_TIME)
        self.__posterior = RngStream(seed, STREAM_POSTERIOR)
        self.__eval = RngStream(seed, STREAM_EVAL)

    state = property(lambda self: self.__state)
    target = property(lambda self: self.__target)
    schedule = property(lambda self: self.__schedule)

    def __initLogger(self, log):
        if log:
            return logging.getLogger('%s-%d' % \
                                     (self.__class__.__module__ + '.' + \
                                      self.__class__.__name__, self.id))
        else:
            return NoOp()

    def __project(self):
        if self.__target.symmetry is None:
            return None
        return self.__target.project

    def __samples(self, batch):
        gen = self.__state.models.generator
        with suspendTape():
            return generate(gen, self.__latents.normal((batch,
                                                        gen.latent_dim))) \
                       .numpy()

    def scoreStep(self):
        """One inner step: DSM for DiKL, clean score matching for R-KL-SM

        :returns:
            The loss value

        """
        cfg, state = self.__cfg, self.__state
        x = self.__samples(cfg.score_batch_size)
        net = state.models.scorenet
        with GradTape() as tape:
            if cfg.method == 'dikl':
                loss, _ = dsmLoss(net, self.__schedule, x, self.__dsm,
                                  project=self.__project())
            else:
                loss = cleanDsmLoss(net, x, self.__dsm, cfg.clean_sigma,
                                    project=self.__project())
        state.adam_score = _update(net, loss, tape, state.adam_score)
        return loss.item()

    def generatorStep(self):
        """One outer step on the surrogate loss

        :returns:
            The surrogate loss value

        """
        cfg, state = self.__cfg, self.__state
        gen, net = state.models.generator, state.models.scorenet
        z = self.__latents.normal((cfg.batch_size, gen.latent_dim))
        with GradTape() as tape:
            x = generate(gen, z)
            if cfg.method == 'dikl':
                t = self.__schedule.sampleTime(self.__times)
                x_t = forwardNoise(self.__schedule, x, t,
                                   self.__times.normal(x.shape),
                                   self.__project())
                prob = PosteriorProblem(self.__target, x_t.numpy(), t,
                                        self.__schedule)
                post = samplePosterior(prob, self.__recipe, self.__posterior,
                                       state.step_size)
                state.step_size = post.step_size
                state.acceptance = post.acceptance
                d_p = msiFromPosterior(prob, post).value
                loss = diklSurrogate(net, self.__schedule, t, x_t, d_p)
            else:
                loss = rklSurrogate(net, self.__target, x)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingAbortError({'msg': 'non-finite surrogate loss',
                                      'iteration': state.iteration + 1,
                                      'snapshot': self.__snapshot()})
        state.adam_generator = _update(gen, loss, tape, state.adam_generator,
                                       cfg.grad_clip)
        return value

    def __snapshot(self):
        if self.__out is None:
            return None
        path = os.path.join(self.__out, 'abort-%d' % (self.__state.iteration +
                                                      1))
        return self.__save(path, iteration=self.__state.iteration,
                           reason='non-finite loss')

    def __save(self, path, **fields):
        metadata = dict(self.__metadata)
        metadata.update(fields)
        return self.__state.models.save(path, metadata)

    def evaluate(self):
        """The early stopping metric of the current generator"""
        cfg = self.__cfg
        return earlyStopMetric(self.__state.models.generator, self.__target,
                               self.__eval.derive(self.__state.iteration),
                               cfg.n_eval, cfg.refine_steps, cfg.refine_step)

    def __keepBest(self, metric):
        state = self.__state
        if metric < state.best_metric:
            state.best_metric = metric
            state.best_iteration = state.iteration
            if self.__out is not None:
                state.best_checkpoint = self.__save(
                    os.path.join(self.__out, 'best'),
                    iteration=state.iteration, early_stop_tvd=metric)

    def run(self):
        """Train for `cfg.iterations` outer iterations

        :returns:
            The `RunState`

        :raises:
            `TrainingAbortError`
                On a non-finite loss, after writing a snapshot

        """
        cfg, state = self.__cfg, self.__state
        if cfg.iterations == 0:
            return state
        state.initial_metric = self.evaluate()
        self.__keepBest(state.initial_metric)
        self.__logger.info('iteration 0: early stop TVD %.4f',
                           state.initial_metric)
        while state.iteration < cfg.iterations:
            dsm = float('nan')
            for _ in range(cfg.inner_steps):
                dsm = self.scoreStep()
                if not math.isfinite(dsm):
                    raise TrainingAbortError({'msg': 'non-finite score loss',
                                              'iteration': state.iteration + 1,
                                              'snapshot': self.__snapshot()})
            surrogate = self.generatorStep()
            state.iteration += 1
            row = {'iteration': state.iteration, 'dsm_loss': dsm,
                   'surrogate_loss': surrogate, 'early_stop_tvd': '',
                   'step_size': state.step_size,
                   'acceptance': state.acceptance}
            if state.iteration % cfg.eval_every == 0 or \
               state.iteration == cfg.iterations:
                metric = self.evaluate()
                row['early_stop_tvd'] = metric
                self.__keepBest(metric)
                self.__logger.info('iteration %d: dsm %.4g, surrogate %.4g, '
                                   'early stop TVD %.4f, step %.3g, '
                                   'acceptance %.2f', state.iteration, dsm,
                                   surrogate, metric, state.step_size,
                                   state.acceptance)
            state.history.append(row)
            if self.__records is not None:
                self.__records.write([row])
        if self.__out is not None:
            self.__save(os.path.join(self.__out, 'checkpoint'),
                        iteration=state.iteration,
                        best_iteration=state.best_iteration,
                        best_early_stop_tvd=state.best_metric)
        return state


def trainDikl(target, schedule, recipe, cfg, **kwargs):
    """Train a generator with the diffusive KL (see `Trainer`)"""
    cfg = TrainConfig(**dict(cfg, method='dikl'))
    return Trainer(target, schedule, recipe, cfg, **kwargs).run()

def trainRklSm(target, schedule, recipe, cfg, **kwargs):
    """Train a generator on the reverse KL with a learned model score"""
    cfg = TrainConfig(**dict(cfg, method='rkl_sm'))
    return Trainer(target, schedule, recipe, cfg, **kwargs).run()
