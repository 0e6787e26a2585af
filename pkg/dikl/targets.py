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

"""Benchmark unnormalized densities p(x) ~ exp(-E(x))

Every target evaluates batches: `x` has shape ``(..., dim)`` and energies
come back with shape ``(...)`` (a float for a single point). Particle
targets read a row as ``n`` particles of ``d`` coordinates, particle major.
"""

import math
import itertools
import collections

import numpy as np
from scipy.special import logsumexp, softmax
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.stats import ortho_group

from .errors import ContractError, ConfigError
from .numerics import RngStream


KINDS = ('mog', 'manywell', 'dw_particles', 'lj_particles')

# Stream id reserved for the MoG-40 component layout
MOG40_STREAM = 0x6d6f6734

ProductGroup = collections.namedtuple('ProductGroup', ['n', 'd'])


def zeroCenterProject(x, n, d):
    """Subtract the per-dimension particle mean

    >>> zeroCenterProject(np.ones(4), 2, 2)
    array([0., 0., 0., 0.])
    >>> zeroCenterProject(np.array([1., 0., -1., 0.]), 2, 2)
    array([ 1.,  0., -1.,  0.])

    """
    x = np.asarray(x, dtype=np.float64)
    X = x.reshape(x.shape[:-1] + (n, d))
    return (X - X.mean(axis=-2, keepdims=True)).reshape(x.shape)


def applyGroup(x, n, d, rotation=None, permutation=None, translation=None):
    """Act on particle configurations: permute particles, then rotate,
    then translate

    >>> applyGroup(np.array([1., 2., 3., 4.]), 2, 2, permutation=[1, 0])
    array([3., 4., 1., 2.])

    """
    x = np.asarray(x, dtype=np.float64)
    X = x.reshape(x.shape[:-1] + (n, d))
    if permutation is not None:
        X = X[..., np.asarray(permutation), :]
    if rotation is not None:
        X = X @ np.asarray(rotation).T
    if translation is not None:
        X = X + np.asarray(translation)
    return X.reshape(x.shape)


def randomGroupElement(stream, n, d):
    """A random ``(rotation, permutation)`` pair, the rotation Haar
    distributed over O(d)"""
    rotation = ortho_group.rvs(d, random_state=stream.generator())
    permutation = stream.generator().permutation(n)
    return rotation, permutation


class EnergyTarget(object):
    """An unnormalized density given by its energy

    :attr dim:
        :type: `int`
        Ambient dimension
    :attr kind:
        :type: `str`
        One of `KINDS`
    :attr params:
        :type: `dict`
        Kind specific constants, JSON-able
    :attr symmetry:
        :type: `ProductGroup or None`
        Particle layout for permutation/rotation/translation invariant
        targets

    """
    kind = None

    def __init__(self, dim, params, symmetry=None):
        super(EnergyTarget, self).__init__()
        self.__dim = int(dim)
        self.__params = dict(params)
        self.__symmetry = symmetry

    dim = property(lambda self: self.__dim)
    params = property(lambda self: dict(self.__params))
    symmetry = property(lambda self: self.__symmetry)

    def __repr__(self):
        return '%s(dim=%d)' % (type(self).__name__, self.__dim)

    def describe(self):
        return {'kind': self.kind, 'dim': self.__dim, 'params': self.params}

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 0 or x.shape[-1] != self.__dim:
            raise ContractError({'op': 'energy',
                                 'msg': 'expected trailing dimension %d, '
                                        'given shape %s' % (self.__dim,
                                                            x.shape)})
        return x

    def project(self, v):
        """Zero-center `v` for particle targets, identity otherwise"""
        if self.__symmetry is None:
            return v
        return zeroCenterProject(v, self.__symmetry.n, self.__symmetry.d)

    def energy(self, x):
        x = self._check(x)
        e = self._energy(x.reshape(-1, self.__dim)).reshape(x.shape[:-1])
        return float(e) if x.ndim == 1 else e

    def score(self, x):
        """The target score -dE/dx"""
        x = self._check(x)
        s = -self._gradient(x.reshape(-1, self.__dim)).reshape(x.shape)
        return self.project(s)

    def groundTruthSamples(self, n_samples, stream):
        raise NotImplementedError

    def _energy(self, x):
        raise NotImplementedError

    def _gradient(self, x):
        raise NotImplementedError


def energy(target, x):
    """E(x) for a point or a batch

    >>> round(energy(gaussianTarget(2), np.zeros(2)) - math.log(2 * math.pi), 12)
    0.0

    """
    return target.energy(x)

def score(target, x):
    """-grad E(x)

    >>> score(gaussianTarget(2), np.array([1., -2.]))
    array([-1.,  2.])

    """
    return target.score(x)

def groundTruthSamples(target, n_samples, stream):
    if not n_samples > 0:
        raise ContractError({'op': 'groundTruthSamples',
                             'msg': "'n_samples' must be > 0"})
    return target.groundTruthSamples(int(n_samples), stream)


class MoGTarget(EnergyTarget):
    """A normalized mixture of isotropic Gaussians, so -E is the exact
    log-density

    :param means:
        :type: array (K, dim)
    :param variances:
        :type: float or array (K,)
    :param weights:
        :type: array (K,), defaults to uniform

    """
    kind = 'mog'

    def __init__(self, means, variances=1.0, weights=None, name=None):
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        k, dim = means.shape
        variances = np.broadcast_to(np.asarray(variances, np.float64),
                                    (k,)).copy()
        weights = np.full(k, 1.0 / k) if weights is None else \
                  np.asarray(weights, dtype=np.float64)
        if np.any(variances <= 0) or np.any(weights < 0) or \
           abs(weights.sum() - 1.0) > 1e-12:
            raise ConfigError({'msg': 'mixture weights must be >= 0 and sum '
                                      'to 1, variances must be > 0',
                               'key': 'targets'})
        super(MoGTarget, self).__init__(dim, {'name': name,
                                              'means': means.tolist(),
                                              'variances': variances.tolist(),
                                              'weights': weights.tolist()})
        self.__means = means
        self.__variances = variances
        self.__logw = np.log(weights)

    means = property(lambda self: self.__means.copy())
    variances = property(lambda self: self.__variances.copy())
    weights = property(lambda self: np.exp(self.__logw))
    isGaussian = property(lambda self: len(self.__means) == 1)

    def __logJoint(self, x):
        diff = x[:, None, :] - self.__means[None, :, :]
        sq = np.einsum('bkd,bkd->bk', diff, diff)
        return self.__logw - 0.5 * sq / self.__variances - \
               0.5 * self.dim * np.log(2 * np.pi * self.__variances)

    def _energy(self, x):
        return -logsumexp(self.__logJoint(x), axis=1)

    def _gradient(self, x):
        r = softmax(self.__logJoint(x), axis=1)
        pull = (self.__means[None, :, :] - x[:, None, :]) / \
               self.__variances[None, :, None]
        return -np.einsum('bk,bkd->bd', r, pull)

    def logDensity(self, x):
        """The exact normalized log-density"""
        return -self.energy(x)

    def groundTruthSamples(self, n_samples, stream):
        """Exact ancestral sampling"""
        gen = stream.generator()
        comps = gen.choice(len(self.__means), size=n_samples,
                           p=self.weights)
        noise = gen.standard_normal((n_samples, self.dim))
        return self.__means[comps] + \
               np.sqrt(self.__variances[comps])[:, None] * noise

    def nearestComponent(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.dim)
        diff = x[:, None, :] - self.__means[None, :, :]
        return np.argmin(np.einsum('bkd,bkd->bk', diff, diff), axis=1)


def gaussianTarget(dim, mean=0.0, variance=1.0):
    """N(mean, variance I) as a one component mixture"""
    return MoGTarget(np.full((1, dim), mean, dtype=np.float64), variance,
                     name='gaussian')

def mog40(layout_seed=0, n_modes=40, bound=40.0, variance=1.0):
    """Means i.i.d. uniform on [-bound, bound]^2 from the dedicated layout
    stream, shared component variance, uniform weights

    >>> target = mog40()
    >>> target.means.shape, bool(np.abs(target.means).max() <= 40)
    ((40, 2), True)

    """
    stream = RngStream(layout_seed, MOG40_STREAM)
    means = bound * (2.0 * stream.uniform((n_modes, 2)) - 1.0)
    return MoGTarget(means, variance, name='mog40')

def bimodal1d(separation=3.0, variance=0.01):
    """The two mode 1D target 1/2 N(-s, v) + 1/2 N(s, v)"""
    return MoGTarget([[-separation], [separation]], variance, name='bimodal1d')


class ManyWellTarget(EnergyTarget):
    """Independent 2D double wells stacked along the dimension

    Each ``(x1, x2)`` block has energy ``x1^4 - 6 x1^2 - x1/2 + x2^2/2``.

    >>> ManyWellTarget(2).energy(np.zeros(2))
    0.0

    """
    kind = 'manywell'
    GRID_POINTS = 4096
    GRID_BOUND = 4.0

    def __init__(self, dim=32):
        if dim < 2 or dim % 2:
            raise ConfigError({'msg': 'Many-Well dimension must be even',
                               'key': 'targets.dim'})
        super(ManyWellTarget, self).__init__(dim, {'blocks': dim // 2})
        self.__blocks = dim // 2

    blocks = property(lambda self: self.__blocks)

    @staticmethod
    def wellEnergy(x1):
        return x1 ** 4 - 6.0 * x1 ** 2 - 0.5 * x1

    def _energy(self, x):
        x1, x2 = x[:, 0::2], x[:, 1::2]
        return np.sum(self.wellEnergy(x1) + 0.5 * x2 ** 2, axis=1)

    def _gradient(self, x):
        g = np.empty_like(x)
        x1 = x[:, 0::2]
        g[:, 0::2] = 4.0 * x1 ** 3 - 12.0 * x1 - 0.5
        g[:, 1::2] = x[:, 1::2]
        return g

    def marginalGrid(self):
        """The normalized x1 marginal of one block on the sampling grid"""
        grid = np.linspace(-self.GRID_BOUND, self.GRID_BOUND, self.GRID_POINTS)
        e = self.wellEnergy(grid)
        pdf = np.exp(-(e - e.min()))
        return grid, pdf / trapezoid(pdf, grid)

    def rightWellMass(self):
        """P(x1 > 0) by quadrature on the grid"""
        grid, pdf = self.marginalGrid()
        right = grid >= 0
        return float(trapezoid(pdf[right], grid[right]))

    def groundTruthSamples(self, n_samples, stream):
        """Exact per-block sampling, x1 by inverse CDF on the grid and x2
        standard normal"""
        grid, pdf = self.marginalGrid()
        cdf = cumulative_trapezoid(pdf, grid, initial=0.0)
        cdf /= cdf[-1]
        gen = stream.generator()
        x = np.empty((n_samples, self.dim))
        x[:, 0::2] = np.interp(gen.random((n_samples, self.__blocks)), cdf, grid)
        x[:, 1::2] = gen.standard_normal((n_samples, self.__blocks))
        return x


class ParticleTarget(EnergyTarget):
    """A pairwise energy over ``n`` particles in ``d`` dimensions, invariant
    under permutations, orthogonal maps and translations"""

    def __init__(self, n, d, params):
        if n < 2 or d not in (2, 3):
            raise ConfigError({'msg': 'particle targets need n >= 2 and '
                                      'd in {2, 3}',
                               'key': 'targets.n_particles'})
        params = dict(params, n=n, d=d)
        super(ParticleTarget, self).__init__(n * d, params, ProductGroup(n, d))
        self.__n, self.__d = n, d
        pairs = np.array(list(itertools.combinations(range(n), 2)))
        self.__i, self.__j = pairs[:, 0], pairs[:, 1]
        incidence = np.zeros((len(pairs), n))
        incidence[np.arange(len(pairs)), self.__i] = 1.0
        incidence[np.arange(len(pairs)), self.__j] = -1.0
        self.__incidence = incidence

    n = property(lambda self: self.__n)
    d = property(lambda self: self.__d)

    def __deltas(self, x):
        X = x.reshape(-1, self.__n, self.__d)
        diff = X[:, self.__i, :] - X[:, self.__j, :]
        return X, diff, np.sqrt(np.einsum('bpd,bpd->bp', diff, diff))

    def pairDistances(self, x):
        """All i < j interatomic distances, shape (..., n(n-1)/2)"""
        x = self._check(x)
        return self.__deltas(x.reshape(-1, self.dim))[2] \
                   .reshape(x.shape[:-1] + (len(self.__i),))

    def _energy(self, x):
        X, diff, r = self.__deltas(x)
        return self.pairScale * np.sum(self.pairEnergy(r), axis=1) + \
               self._extraEnergy(X)

    def _gradient(self, x):
        X, diff, r = self.__deltas(x)
        coef = self.pairScale * self.pairDerivative(r) / np.maximum(r, 1e-300)
        forces = coef[:, :, None] * diff
        grad = np.einsum('pn,bpd->bnd', self.__incidence, forces)
        return (grad + self._extraGradient(X)).reshape(x.shape)

    def _extraEnergy(self, X):
        return 0.0

    def _extraGradient(self, X):
        return 0.0

    def groundTruthSamples(self, n_samples, stream, burn_in=2000, thin=10,
                           chains=None, step_size=1e-3):
        """A long-run MALA reference: `chains` parallel chains, each
        discarding `burn_in` adapted steps then keeping every `thin`-th
        state; returned zero-centered"""
        from .posterior import TargetDensity, referenceChain
        chains = min(n_samples, 500) if chains is None else chains
        x0 = self.initialConfigurations(chains, stream)
        samples = referenceChain(TargetDensity(self), x0, stream,
                                 n_keep=int(math.ceil(n_samples / chains)),
                                 burn_in=burn_in, thin=thin,
                                 step_size=step_size)
        return self.project(samples.reshape(-1, self.dim)[:n_samples])

    def initialConfigurations(self, count, stream):
        return self.project(stream.normal((count, self.dim)))


class DoubleWellParticles(ParticleTarget):
    """E = 1/(2 tau) sum_{i<j} a (r - d0) + b (r - d0)^2 + c (r - d0)^4

    >>> DoubleWellParticles(n=2, d=2).energy(np.array([0., 0., 4., 0.]))
    0.0

    """
    kind = 'dw_particles'

    def __init__(self, n=4, d=2, a=0.0, b=-4.0, c=0.9, d0=4.0, tau=1.0):
        super(DoubleWellParticles, self).__init__(
            n, d, {'a': a, 'b': b, 'c': c, 'd0': d0, 'tau': tau})
        self.__a, self.__b, self.__c, self.__d0 = a, b, c, d0
        self.pairScale = 1.0 / (2.0 * tau)

    def pairEnergy(self, r):
        s = r - self.__d0
        return self.__a * s + self.__b * s ** 2 + self.__c * s ** 4

    def pairDerivative(self, r):
        s = r - self.__d0
        return self.__a + 2.0 * self.__b * s + 4.0 * self.__c * s ** 3

    def initialConfigurations(self, count, stream):
        return self.project(2.0 * stream.normal((count, self.dim)))


class LennardJonesParticles(ParticleTarget):
    """E = eps/(2 tau) sum_{i<j} (rm/r)^12 - 2 (rm/r)^6
           + c_osc sum_i |x_i - mean(x)|^2

    Below ``cutoff * rm`` the pair term continues linearly with the value
    and slope it has at the cutoff, so coincident particles stay finite.

    """
    kind = 'lj_particles'

    def __init__(self, n=13, d=3, rm=1.0, eps=1.0, tau=1.0, oscillator=0.5,
                 cutoff=0.8):
        super(LennardJonesParticles, self).__init__(
            n, d, {'rm': rm, 'eps': eps, 'tau': tau, 'oscillator': oscillator,
                   'cutoff': cutoff})
        self.__rm = rm
        self.__osc = oscillator
        self.__rc = cutoff * rm
        self.pairScale = eps / (2.0 * tau)
        self.__uc = self.__lj(np.float64(self.__rc))
        self.__duc = self.__djl(np.float64(self.__rc))

    def __lj(self, r):
        q = (self.__rm / r) ** 6
        return q * q - 2.0 * q

    def __djl(self, r):
        q = (self.__rm / r) ** 6
        return (-12.0 * q * q + 12.0 * q) / r

    def pairEnergy(self, r):
        inner = r < self.__rc
        safe = np.where(inner, self.__rc, r)
        return np.where(inner, self.__uc + self.__duc * (r - self.__rc),
                        self.__lj(safe))

    def pairDerivative(self, r):
        inner = r < self.__rc
        safe = np.where(inner, self.__rc, r)
        return np.where(inner, self.__duc, self.__djl(safe))

    def _extraEnergy(self, X):
        centered = X - X.mean(axis=1, keepdims=True)
        return self.__osc * np.einsum('bnd,bnd->b', centered, centered)

    def _extraGradient(self, X):
        return 2.0 * self.__osc * (X - X.mean(axis=1, keepdims=True))


def buildTarget(kind, **options):
    """Instantiate a target from its config section

    >>> buildTarget('gaussian', dim=3).dim
    3
    >>> buildTarget('lj_particles', n_particles=13, spatial_dim=3).symmetry
    ProductGroup(n=13, d=3)

    """
    options = dict((k, v) for k, v in options.items() if v is not None)
    if kind == 'gaussian':
        return gaussianTarget(options.get('dim', 1), options.get('mean', 0.0),
                              options.get('variance', 1.0))
    if kind == 'mog':
        return mog40(options.get('layout_seed', 0),
                     options.get('n_modes', 40), options.get('bound', 40.0),
                     options.get('variance', 1.0))
    if kind == 'manywell':
        return ManyWellTarget(options.get('dim', 32))
    if kind == 'dw_particles':
        return DoubleWellParticles(options.get('n_particles', 4),
                                   options.get('spatial_dim', 2),
                                   **_pick(options, 'a', 'b', 'c', 'd0', 'tau'))
    if kind == 'lj_particles':
        return LennardJonesParticles(options.get('n_particles', 13),
                                     options.get('spatial_dim', 3),
                                     **_pick(options, 'rm', 'eps', 'tau',
                                             'oscillator', 'cutoff'))
    raise ConfigError({'msg': "unknown target kind '%s'" % kind,
                       'key': 'targets.kind'})

def _pick(options, *names):
    return dict((k, options[k]) for k in names if k in options)
