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

"""Samplers for the denoising posterior

    p(x|x_t) ~ exp(-E(x) - |alpha_t x - x_t|^2 / (2 sigma_t^2))

Every sampler works on batches: `x_t` may carry any leading shape and the
chains, one per row, advance together. Randomness comes from a noise
source, an object with ``gaussian(shape)`` and ``uniform(shape)``; passing
an `RngStream` wraps it in a `StreamNoise`. Recording the draws of one run
and replaying them through a group element gives the coupled runs the
equivariance tests compare.
"""

import collections

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, ContractError, DegenerateWeightsError
from .numerics import RngStream


def _shape(shape):
    return tuple(shape) if hasattr(shape, '__iter__') else (int(shape),)


class StreamNoise(object):

    def __init__(self, stream):
        super(StreamNoise, self).__init__()
        self.__stream = stream

    stream = property(lambda self: self.__stream)

    def gaussian(self, shape):
        return self.__stream.normal(_shape(shape))

    def uniform(self, shape):
        return self.__stream.uniform(_shape(shape))


class RecordingNoise(StreamNoise):
    """A `StreamNoise` keeping a copy of every draw in `record`"""

    def __init__(self, stream):
        super(RecordingNoise, self).__init__(stream)
        self.record = []

    def gaussian(self, shape):
        value = super(RecordingNoise, self).gaussian(shape)
        self.record.append(('gaussian', value.copy()))
        return value

    def uniform(self, shape):
        value = super(RecordingNoise, self).uniform(shape)
        self.record.append(('uniform', value.copy()))
        return value


class ReplayNoise(object):
    """Serves a recorded sequence of draws again, Gaussian draws mapped
    through `transform`

    >>> rec = RecordingNoise(RngStream(1))
    >>> a = rec.gaussian(3)
    >>> b = ReplayNoise(rec.record, lambda v: -v).gaussian(3)
    >>> bool((a == -b).all())
    True

    """
    def __init__(self, record, transform=None):
        super(ReplayNoise, self).__init__()
        self.__record = list(record)
        self.__position = 0
        self.__transform = transform

    def __next(self, kind, shape):
        if self.__position >= len(self.__record):
            raise ContractError({'op': 'ReplayNoise',
                                 'msg': 'noise record exhausted'})
        recorded, value = self.__record[self.__position]
        if recorded != kind or value.shape != _shape(shape):
            raise ContractError({'op': 'ReplayNoise',
                                 'msg': 'expected a %s draw of shape %s, '
                                        'recorded %s %s' % (kind, _shape(shape),
                                                            recorded,
                                                            value.shape)})
        self.__position += 1
        return value.copy()

    def gaussian(self, shape):
        value = self.__next('gaussian', shape)
        return value if self.__transform is None else self.__transform(value)

    def uniform(self, shape):
        return self.__next('uniform', shape)


def noiseSource(source):
    if isinstance(source, RngStream):
        return StreamNoise(source)
    if hasattr(source, 'gaussian') and hasattr(source, 'uniform'):
        return source
    raise TypeError("expected an RngStream or a noise source, "
                    "given {}".format(source))


class TargetDensity(object):
    """The target itself seen as a sampling problem, for reference chains"""

    def __init__(self, target):
        super(TargetDensity, self).__init__()
        self.__target = target

    target = property(lambda self: self.__target)

    def project(self, v):
        return self.__target.project(v)

    def logDensity(self, x, beta=1.0):
        return -beta * np.asarray(self.__target.energy(x))

    def score(self, x, beta=1.0):
        return beta * self.__target.score(x)


class PosteriorProblem(TargetDensity):
    """The denoising posterior p(x|x_t) at step `t` of `schedule`

    :param x_t:
        :type: array (..., dim)
        One noisy point per chain

    :raises:
        `ContractError`
            If step `t` carries no noise

    """
    def __init__(self, target, x_t, t, schedule):
        super(PosteriorProblem, self).__init__(target)
        sigma2 = schedule.sigma2(t)
        if not sigma2 > 0:
            raise ContractError({'op': 'PosteriorProblem',
                                 'msg': 'step %d has no noise (sigma_t = 0)' \
                                        % t})
        x_t = np.asarray(x_t, dtype=np.float64)
        if x_t.ndim == 0 or x_t.shape[-1] != target.dim:
            raise ContractError({'op': 'PosteriorProblem',
                                 'msg': 'x_t of shape %s does not match '
                                        'dimension %d' % (x_t.shape,
                                                          target.dim)})
        self.__x_t = x_t
        self.__t = int(t)
        self.__schedule = schedule
        self.__alpha = schedule.alpha(t)
        self.__sigma2 = sigma2

    x_t = property(lambda self: self.__x_t)
    t = property(lambda self: self.__t)
    schedule = property(lambda self: self.__schedule)
    alpha = property(lambda self: self.__alpha)
    sigma2 = property(lambda self: self.__sigma2)

    def logDensity(self, x, beta=1.0):
        """-beta E(x) - |alpha x - x_t|^2 / (2 sigma^2), up to a constant"""
        r = self.__alpha * x - self.__x_t
        return super(PosteriorProblem, self).logDensity(x, beta) - \
               0.5 * np.sum(r * r, axis=-1) / self.__sigma2

    def score(self, x, beta=1.0):
        kernel = self.__alpha * (self.__alpha * x - self.__x_t) / self.__sigma2
        return self.project(super(PosteriorProblem, self).score(x, beta) -
                            kernel)

    def targetScoreFrom(self, x, score):
        """Recover -grad E(x) from a cached posterior score at `x`"""
        return score + self.__alpha * (self.__alpha * x - self.__x_t) / \
                       self.__sigma2


def posteriorScore(prob, x):
    """-grad E(x) - alpha (alpha x - x_t) / sigma^2

    >>> from dikl.targets import gaussianTarget
    >>> from dikl.diffusion import NoiseSchedule
    >>> prob = PosteriorProblem(gaussianTarget(1), [1.0], 1,
    ...                         NoiseSchedule([0.36]))
    >>> round(float(posteriorScore(prob, np.array([0.5]))[0]), 4)
    0.8333

    """
    return prob.score(np.asarray(x, dtype=np.float64))


def analyticGaussianPosterior(prob):
    """Mean and variance of the exact posterior of an isotropic Gaussian
    target N(mu, v I)

    >>> from dikl.targets import gaussianTarget
    >>> from dikl.diffusion import NoiseSchedule
    >>> prob = PosteriorProblem(gaussianTarget(1), [1.0], 1,
    ...                         NoiseSchedule([0.36]))
    >>> mean, var = analyticGaussianPosterior(prob)
    >>> round(float(mean[0]), 12), round(var, 12)
    (0.8, 0.36)

    """
    target = prob.target
    if not getattr(target, 'isGaussian', False):
        raise ConfigError({'msg': 'the analytic posterior needs a single '
                                  'Gaussian target',
                           'key': 'targets.kind'})
    mu, v = target.means[0], float(target.variances[0])
    precision = 1.0 / v + prob.alpha ** 2 / prob.sigma2
    mean = (mu / v + prob.alpha * prob.x_t / prob.sigma2) / precision
    return mean, 1.0 / precision


class ChainState(object):
    """Current states of a batch of chains with their cached log-density
    and score, the shared step size and acceptance counts since the last
    adaptation

    """
    def __init__(self, x, logp, score, step_size, accepted=0, trials=0):
        super(ChainState, self).__init__()
        self.__x = x
        self.__logp = logp
        self.__score = score
        self.__step_size = float(step_size)
        self.__accepted = int(accepted)
        self.__trials = int(trials)

    x = property(lambda self: self.__x)
    logp = property(lambda self: self.__logp)
    score = property(lambda self: self.__score)
    step_size = property(lambda self: self.__step_size)
    accepted = property(lambda self: self.__accepted)
    trials = property(lambda self: self.__trials)

    @property
    def acceptance(self):
        return self.__accepted / self.__trials if self.__trials else 0.0

    @classmethod
    def start(cls, prob, x, step_size, beta=1.0):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(all='ignore'):
            return cls(x, np.asarray(prob.logDensity(x, beta)),
                       prob.score(x, beta), step_size)

    def replace(self, **changes):
        fields = {'x': self.__x, 'logp': self.__logp, 'score': self.__score,
                  'step_size': self.__step_size, 'accepted': self.__accepted,
                  'trials': self.__trials}
        fields.update(changes)
        return ChainState(**fields)


def _metropolis(state, accept, x, logp, score):
    rows = accept[..., None]
    return state.replace(x=np.where(rows, x, state.x),
                         logp=np.where(accept, logp, state.logp),
                         score=np.where(rows, score, state.score),
                         accepted=state.accepted + int(np.sum(accept)),
                         trials=state.trials + int(accept.size))

def _accept(noise, log_ratio, score):
    u = noise.uniform(np.shape(log_ratio))
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.isfinite(log_ratio) & np.all(np.isfinite(score), axis=-1) & \
               (np.log(u) < log_ratio)


def ulaStep(prob, state, noise, beta=1.0):
    """x' = x + gamma score(x) + sqrt(2 gamma) eta, always accepted"""
    noise = noiseSource(noise)
    gamma = state.step_size
    if not gamma > 0:
        raise ContractError({'op': 'ulaStep', 'msg': 'step size must be > 0'})
    eta = prob.project(noise.gaussian(state.x.shape))
    x = state.x + gamma * state.score + np.sqrt(2.0 * gamma) * eta
    with np.errstate(all='ignore'):
        logp, score = np.asarray(prob.logDensity(x, beta)), prob.score(x, beta)
    accept = np.ones(np.shape(logp), dtype=bool)
    return _metropolis(state, accept, x, logp, score)


def malaStep(prob, state, noise, beta=1.0):
    """One Metropolis adjusted Langevin step per chain

    Proposals with a non-finite density or score are rejected.

    :param prob:
        :type: `PosteriorProblem` or `TargetDensity`
    :param state:
        :type: `ChainState`
    :param noise:
        :type: noise source or `RngStream`
    :param beta:
        :type: `float`
        Inverse temperature on the energy, 1 except inside AIS

    """
    noise = noiseSource(noise)
    gamma = state.step_size
    if not gamma > 0:
        raise ContractError({'op': 'malaStep', 'msg': 'step size must be > 0'})
    x = state.x
    mean = x + gamma * state.score
    eta = prob.project(noise.gaussian(x.shape))
    proposal = mean + np.sqrt(2.0 * gamma) * eta
    with np.errstate(all='ignore'):
        logp = np.asarray(prob.logDensity(proposal, beta))
        score = prob.score(proposal, beta)
        forward = np.sum((proposal - mean) ** 2, axis=-1) / (4.0 * gamma)
        backward = np.sum((x - proposal - gamma * score) ** 2,
                          axis=-1) / (4.0 * gamma)
        log_ratio = logp - state.logp + forward - backward
    return _metropolis(state, _accept(noise, log_ratio, score), proposal,
                       logp, score)


def leapfrog(prob, x, p, score, step_size, n_steps=1, mass=1.0, beta=1.0):
    """Velocity Verlet integration of dx = p/m, dp = score(x)

    :returns:
        ``(x, p, score)`` at the end of the trajectory

    """
    p = p + 0.5 * step_size * score
    for k in range(n_steps):
        x = x + step_size * p / mass
        score = prob.score(x, beta)
        p = p + (step_size if k < n_steps - 1 else 0.5 * step_size) * score
    return x, p, score

def hamiltonian(prob, x, p, mass=1.0, beta=1.0):
    return -np.asarray(prob.logDensity(x, beta)) + \
           0.5 * np.sum(p * p, axis=-1) / mass


def hmcStep(prob, state, noise, n_leapfrog=1, mass=1.0, beta=1.0):
    """One Hamiltonian Monte Carlo step per chain, momentum ~ N(0, mass I)
    projected like the positions

    A step size of 0 leaves every chain in place and accepts.

    """
    noise = noiseSource(noise)
    if not (n_leapfrog >= 1 and mass > 0 and state.step_size >= 0):
        raise ContractError({'op': 'hmcStep',
                             'msg': 'need n_leapfrog >= 1, mass > 0 and '
                                    'step size >= 0'})
    p0 = prob.project(np.sqrt(mass) * noise.gaussian(state.x.shape))
    with np.errstate(all='ignore'):
        x, p, score = leapfrog(prob, state.x, p0, state.score,
                               state.step_size, n_leapfrog, mass, beta)
        logp = np.asarray(prob.logDensity(x, beta))
        h0 = -state.logp + 0.5 * np.sum(p0 * p0, axis=-1) / mass
        h1 = -logp + 0.5 * np.sum(p * p, axis=-1) / mass
        log_ratio = h0 - h1
    return _metropolis(state, _accept(noise, log_ratio, score), x, logp, score)


def adaptStepSize(state, low=0.5, high=0.6, factor=1.5):
    """Scale the step size toward the [low, high] acceptance band and open
    a new acceptance window

    >>> s = ChainState(np.zeros(1), 0.0, np.zeros(1), 1.0, accepted=9,
    ...                trials=10)
    >>> adaptStepSize(s).step_size
    1.5
    >>> adaptStepSize(s.replace(accepted=1)).step_size
    0.6666666666666666
    >>> adaptStepSize(s.replace(accepted=55, trials=100)).step_size
    1.0

    """
    step = state.step_size
    if state.trials:
        if state.acceptance > high:
            step = step * factor
        elif state.acceptance < low:
            step = step / factor
    return state.replace(step_size=step, accepted=0, trials=0)


def normalizeLogWeights(log_weights, t=None):
    """Self-normalize along the first axis, treating non-finite entries as
    zero weight

    >>> normalizeLogWeights(np.array([0.0, -np.log(3.0)])).round(12)
    array([0.75, 0.25])

    """
    log_weights = np.where(np.isfinite(log_weights), log_weights, -np.inf)
    with np.errstate(invalid='ignore'):
        total = logsumexp(log_weights, axis=0)
    if not np.all(np.isfinite(total)):
        raise DegenerateWeightsError({'msg': 'all importance weights are zero '
                                             'or non-finite', 't': t})
    return np.exp(log_weights - total)

def effectiveSampleSize(weights):
    """1 / sum w^2 of normalized weights, per chain"""
    weights = np.asarray(weights, dtype=np.float64)
    return 1.0 / np.sum(weights * weights, axis=0)


def proposalDraws(prob, n, noise):
    """n draws from N(x_t / alpha, sigma^2 / alpha^2 I) per chain, shape
    ``(n,) + x_t.shape``"""
    if not n >= 1:
        raise ContractError({'op': 'isWeights', 'msg': "'n' must be >= 1"})
    noise = noiseSource(noise)
    eta = prob.project(noise.gaussian((int(n),) + prob.x_t.shape))
    return prob.x_t / prob.alpha + (np.sqrt(prob.sigma2) / prob.alpha) * eta


def isWeights(prob, n, noise):
    """Self-normalized importance sampling of the posterior with the
    kernel as proposal, so the weights are exp(-E) normalized

    :returns:
        ``(samples, weights)`` of shapes ``(n,) + x_t.shape`` and
        ``(n,) + x_t.shape[:-1]``

    :raises:
        `DegenerateWeightsError`
            If every weight of some chain vanishes

    """
    samples = proposalDraws(prob, n, noise)
    with np.errstate(all='ignore'):
        log_weights = -np.asarray(prob.target.energy(samples))
    return samples, normalizeLogWeights(log_weights, prob.t)


def sirResample(samples, weights, noise, count=None):
    """Pick one candidate per chain by its weight, one uniform per chain

    With `count`, `weights` must be 1D and `count` picks are drawn with
    replacement from the single population.

    >>> x = np.array([[1.], [2.], [3.]])
    >>> sirResample(x, np.array([0., 1., 0.]), RngStream(0))
    array([2.])
    >>> sirResample(x, np.array([0., 0., 1.]), RngStream(0), count=2)
    array([[3.],
           [3.]])

    """
    noise = noiseSource(noise)
    samples = np.asarray(samples)
    weights = np.asarray(weights, dtype=np.float64)
    cdf = np.cumsum(weights, axis=0)
    if count is not None:
        if weights.ndim != 1:
            raise ContractError({'op': 'sirResample',
                                 'msg': 'repeated picks need 1D weights'})
        u = noise.uniform(int(count)) * cdf[-1]
        index = np.minimum(np.searchsorted(cdf, u, side='right'),
                           len(weights) - 1)
        return samples[index].copy()
    u = noise.uniform(weights.shape[1:]) * cdf[-1]
    index = np.minimum(np.sum(cdf <= u, axis=0), len(weights) - 1)
    if weights.ndim == 1:
        return samples[index].copy()
    columns = np.indices(weights.shape[1:])
    return samples[(index,) + tuple(columns)].copy()


AisResult = collections.namedtuple('AisResult', ['samples', 'weights', 'ess'])


class AisConfig(object):
    """Annealed importance sampling along p^beta_k N(x_t | alpha x, sigma^2)

    :param ladder:
        :type: array (n_steps + 1,)
        Strictly increasing from 0 to 1, uniform by default

    """
    KERNELS = ('mala', 'hmc')

    def __init__(self, n_importance=10, n_steps=15, kernel='hmc',
                 step_size=1.0, n_leapfrog=1, mass=1.0, ladder=None):
        super(AisConfig, self).__init__()
        if ladder is None:
            ladder = np.linspace(0.0, 1.0, int(n_steps) + 1)
        ladder = np.asarray(ladder, dtype=np.float64)
        if n_importance < 1 or n_steps < 1 or len(ladder) != n_steps + 1 or \
           ladder[0] != 0.0 or ladder[-1] != 1.0 or \
           np.any(np.diff(ladder) <= 0):
            raise ConfigError({'msg': 'AIS ladder must rise strictly from 0 '
                                      'to 1 in n_steps steps',
                               'key': 'posterior.ais_steps'})
        if kernel not in self.KERNELS:
            raise ConfigError({'msg': "unknown AIS kernel '%s'" % kernel,
                               'key': 'posterior.ais_kernel'})
        self.n_importance = int(n_importance)
        self.n_steps = int(n_steps)
        self.kernel = kernel
        self.step_size = float(step_size)
        self.n_leapfrog = int(n_leapfrog)
        self.mass = float(mass)
        self.ladder = ladder


def aisRun(prob, cfg, noise):
    """Annealed importance sampling from the kernel proposal

    Transitions run at the intermediate levels only, so a single step
    ladder gives exactly `isWeights`.

    :returns:
        `AisResult` ``(samples, weights, ess)``

    """
    noise = noiseSource(noise)
    x = proposalDraws(prob, cfg.n_importance, noise)
    log_weights = 0.0
    for k in range(1, cfg.n_steps + 1):
        delta = cfg.ladder[k] - cfg.ladder[k - 1]
        with np.errstate(all='ignore'):
            log_weights = log_weights + \
                          delta * -np.asarray(prob.target.energy(x))
        if k == cfg.n_steps:
            break
        beta = cfg.ladder[k]
        state = ChainState.start(prob, x, cfg.step_size, beta)
        if cfg.kernel == 'hmc':
            state = hmcStep(prob, state, noise, cfg.n_leapfrog, cfg.mass, beta)
        else:
            state = malaStep(prob, state, noise, beta)
        x = state.x
    weights = normalizeLogWeights(log_weights, prob.t)
    return AisResult(x, weights, effectiveSampleSize(weights))


class Recipe(object):
    """A posterior sampling pipeline: an importance stage (AIS, IS or the
    exact Gaussian posterior), one SIR pick per chain, then MALA keeping the
    last `keep_last` states as the K samples of the estimator

    """
    INITS = ('ais', 'is', 'exact')
    FIELDS = ('init', 'n_importance', 'ais_steps', 'ais_kernel', 'ais_step',
              'n_leapfrog', 'mass', 'mala_steps', 'mala_step', 'adaptive',
              'adapt_every', 'keep_last')

    def __init__(self, name, init='ais', n_importance=10, ais_steps=15,
                 ais_kernel='hmc', ais_step=1.0, n_leapfrog=1, mass=1.0,
                 mala_steps=5, mala_step=1e-2, adaptive=False, adapt_every=0,
                 keep_last=1):
        super(Recipe, self).__init__()
        if init not in self.INITS:
            raise ConfigError({'msg': "unknown recipe stage '%s'" % init,
                               'key': 'posterior.init'})
        if keep_last < 1 or (mala_steps > 0 and keep_last > mala_steps) or \
           (mala_steps == 0 and keep_last > 1 and init != 'exact'):
            raise ConfigError({'msg': "'keep_last' must lie in 1..mala_steps",
                               'key': 'posterior.keep_last'})
        if mala_steps < 0 or (mala_steps and not mala_step > 0):
            raise ConfigError({'msg': 'MALA needs a positive step size',
                               'key': 'posterior.mala_step'})
        self.name = name
        self.init = init
        self.n_importance = int(n_importance)
        self.ais_steps = int(ais_steps)
        self.ais_kernel = ais_kernel
        self.ais_step = float(ais_step)
        self.n_leapfrog = int(n_leapfrog)
        self.mass = float(mass)
        self.mala_steps = int(mala_steps)
        self.mala_step = float(mala_step)
        self.adaptive = bool(adaptive)
        self.adapt_every = int(adapt_every or 0)
        self.keep_last = int(keep_last)

    def __repr__(self):
        return 'Recipe(%r)' % self.name

    def aisConfig(self):
        return AisConfig(self.n_importance, self.ais_steps, self.ais_kernel,
                         self.ais_step, self.n_leapfrog, self.mass)

    def replace(self, **changes):
        fields = self.describe()
        fields.update(changes)
        return Recipe(**fields)

    def describe(self):
        return dict([('name', self.name)] +
                    [(f, getattr(self, f)) for f in self.FIELDS])


RECIPES = {
    'exact-gaussian': Recipe('exact-gaussian', init='exact', mala_steps=0),
    'mog': Recipe('mog', 'ais', 10, 15, 'hmc', 1.0, mala_steps=5,
                  mala_step=1e-2),
    'mw': Recipe('mw', 'ais', 10, 15, 'hmc', 0.3, mala_steps=5,
                 mala_step=5e-2),
    'dw': Recipe('dw', 'ais', 20, 10, 'mala', 1e-2, mala_steps=50,
                 mala_step=1e-2, adaptive=True),
    'lj': Recipe('lj', 'is', 500, mala_steps=1000, mala_step=1e-3,
                 adaptive=True, keep_last=500),
}
ALIASES = {'ais+mala': 'mog', 'is500+mala1000': 'lj'}


def getRecipe(name, **overrides):
    """A named recipe, with fields optionally overridden

    >>> getRecipe('ais+mala').describe()['ais_kernel']
    'hmc'
    >>> getRecipe('lj').keep_last
    500

    """
    key = ALIASES.get(name, name)
    if key not in RECIPES:
        raise ConfigError({'msg': "unknown posterior recipe '%s', expected "
                                  "one of %s" % (name, ', '.join(
                                      sorted(list(RECIPES) + list(ALIASES)))),
                           'key': 'posterior.recipe'})
    recipe = RECIPES[key]
    overrides = dict((k, v) for k, v in overrides.items() if v is not None)
    return recipe.replace(**overrides) if overrides else recipe


PosteriorSamples = collections.namedtuple(
    'PosteriorSamples', ['samples', 'scores', 'step_size', 'acceptance'])


def samplePosterior(prob, recipe, noise, step_size=None):
    """Run a recipe on every chain of `prob`

    :param recipe:
        :type: `Recipe` or `str`
    :param step_size:
        :type: `float or None`
        MALA step size carried over from the previous call, the recipe's
        own by default. Adaptive recipes adapt it once over the whole batch
        at the end (or every `adapt_every` steps) and hand it back.

    :returns:
        `PosteriorSamples` with `samples` and the target scores -grad E at
        them, both of shape ``(K,) + x_t.shape``, the next step size and
        the MALA acceptance rate

    """
    recipe = getRecipe(recipe) if isinstance(recipe, str) else recipe
    noise = noiseSource(noise)
    step = recipe.mala_step if step_size is None else float(step_size)
    if recipe.init == 'exact':
        mean, var = analyticGaussianPosterior(prob)
        eta = noise.gaussian((recipe.keep_last,) + prob.x_t.shape)
        samples = mean + np.sqrt(var) * eta
        return PosteriorSamples(samples, prob.target.score(samples), step, 1.0)
    if recipe.init == 'ais':
        candidates, weights, _ = aisRun(prob, recipe.aisConfig(), noise)
    else:
        candidates, weights = isWeights(prob, recipe.n_importance, noise)
    x = sirResample(candidates, weights, noise)
    if recipe.mala_steps == 0:
        return PosteriorSamples(x[None], prob.target.score(x)[None], step, 1.0)
    state = ChainState.start(prob, x, step)
    samples, scores = [], []
    accepted = trials = 0
    for k in range(recipe.mala_steps):
        state = malaStep(prob, state, noise)
        if k >= recipe.mala_steps - recipe.keep_last:
            samples.append(state.x)
            scores.append(prob.targetScoreFrom(state.x, state.score))
        if recipe.adaptive and recipe.adapt_every and \
           (k + 1) % recipe.adapt_every == 0:
            accepted, trials = accepted + state.accepted, trials + state.trials
            state = adaptStepSize(state)
    accepted, trials = accepted + state.accepted, trials + state.trials
    if recipe.adaptive and not recipe.adapt_every:
        state = adaptStepSize(state)
    return PosteriorSamples(np.stack(samples), np.stack(scores),
                            state.step_size, accepted / trials)


def referenceChain(density, x0, stream, n_keep, burn_in=2000, thin=10,
                   step_size=1e-3, adapt_every=50):
    """Long-run MALA on `density`: `burn_in` steps adapting the step size
    every `adapt_every` steps, then `n_keep` states taken every `thin`
    steps at the final step size

    :returns:
        array ``(n_keep,) + x0.shape``

    """
    noise = noiseSource(stream)
    state = ChainState.start(density, x0, step_size)
    for k in range(burn_in):
        state = malaStep(density, state, noise)
        if (k + 1) % adapt_every == 0:
            state = adaptStepSize(state)
    kept = []
    for k in range(n_keep * thin):
        state = malaStep(density, state, noise)
        if (k + 1) % thin == 0:
            kept.append(state.x)
    return np.stack(kept)
