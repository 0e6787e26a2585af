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

"""Sample quality metrics, the Gaussian convolution demo and the 1D KL
landscape of a Gaussian model against a convolved two mode target"""

import math
import collections

import numpy as np
from scipy.integrate import quad
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .errors import ContractError, QuadratureError, UnsupportedMetricError
from .multithreading import RowPool
from .numerics import RngStream
from .targets import ManyWellTarget, MoGTarget, zeroCenterProject


METRICS = ('w2', 'energy_tvd', 'distance_tvd', 'mean_log_density',
           'mode_coverage')


class HistogramSpec(object):
    """Fixed bin edges shared by the histograms a TVD compares

    Values outside the edges count in the end bins.

    >>> spec = HistogramSpec([0.0, 1.0, 2.0])
    >>> spec.probabilities([-5.0, 0.5, 1.5, 9.0])
    array([0.5, 0.5])

    """
    def __init__(self, edges):
        super(HistogramSpec, self).__init__()
        edges = np.asarray(edges, dtype=np.float64)
        if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
            raise ContractError({'op': 'HistogramSpec',
                                 'msg': 'edges must increase strictly'})
        self.__edges = edges

    edges = property(lambda self: self.__edges.copy())
    bins = property(lambda self: len(self.__edges) - 1)

    @classmethod
    def fromReference(cls, values, bins=100, trim=0.5):
        """`bins` equal bins over the [trim, 100 - trim] percentiles of
        the finite reference values"""
        values = np.asarray(values, dtype=np.float64).ravel()
        values = values[np.isfinite(values)]
        if values.size == 0:
            raise ContractError({'op': 'HistogramSpec',
                                 'msg': 'no finite reference values'})
        lo, hi = np.percentile(values, [trim, 100.0 - trim])
        if not hi > lo:
            lo, hi = lo - 0.5, hi + 0.5
        return cls(np.linspace(lo, hi, int(bins) + 1))

    def probabilities(self, values):
        values = np.asarray(values, dtype=np.float64).ravel()
        index = np.searchsorted(self.__edges, values, side='right') - 1
        index = np.clip(index, 0, self.bins - 1)
        counts = np.bincount(index, minlength=self.bins)
        return counts / max(values.size, 1)


def histogramTvd(values, reference, spec=None):
    """0.5 sum |p_i - q_i| over the bins of `spec`, built from `reference`
    when not given

    >>> spec = HistogramSpec([0.0, 1.0, 2.0])
    >>> histogramTvd([0.5, 1.5], [0.5, 0.5], spec)
    0.5

    """
    spec = HistogramSpec.fromReference(reference) if spec is None else spec
    p = spec.probabilities(values)
    q = spec.probabilities(reference)
    return float(0.5 * np.sum(np.abs(p - q)))


def energyTvd(target, A, B, spec=None):
    """TVD of the energy histograms of `A` against the reference `B`"""
    return histogramTvd(target.energy(A), target.energy(B), spec)


def pairwiseDistances(samples, n, d):
    """All i < j interparticle distances, pooled per sample: (N, n(n-1)/2)"""
    X = np.asarray(samples, dtype=np.float64).reshape(-1, n, d)
    i, j = np.triu_indices(n, k=1)
    return np.linalg.norm(X[:, i, :] - X[:, j, :], axis=-1)

def distanceTvd(A, B, n, d, spec=None):
    return histogramTvd(pairwiseDistances(A, n, d), pairwiseDistances(B, n, d),
                        spec)


def subsample(samples, size, stream):
    """`size` rows without replacement, all rows when there are fewer"""
    samples = np.asarray(samples)
    if len(samples) <= size:
        return samples
    index = stream.generator().choice(len(samples), size, replace=False)
    return samples[np.sort(index)]


def wasserstein2(A, B, stream=None, max_size=2048):
    """Exact W-2 between equally sized sample sets by optimal assignment

    Sets above `max_size` are subsampled, both with the same draws.

    >>> wasserstein2(np.array([[0.], [0.]]), np.array([[3.], [4.]]))
    3.5355339059327378

    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    stream = RngStream(0) if stream is None else stream
    A = subsample(A, max_size, stream.copy())
    B = subsample(B, max_size, stream.copy())
    if A.shape != B.shape:
        raise ContractError({'op': 'wasserstein2',
                             'msg': 'sample sets of shapes %s and %s' \
                                    % (A.shape, B.shape)})
    cost = cdist(A, B, 'sqeuclidean')
    rows, cols = linear_sum_assignment(cost)
    return math.sqrt(float(cost[rows, cols].mean()))


def _requireMoG(target, metric):
    if not isinstance(target, MoGTarget):
        raise UnsupportedMetricError({'msg': 'unsupported metric',
                                      'metric': metric, 'kind': target.kind,
                                      'key': 'eval.metrics'})

def meanLogDensity(target, samples):
    """Mean exact log-density of `samples` under a mixture target"""
    _requireMoG(target, 'mean_log_density')
    return float(np.mean(target.logDensity(np.atleast_2d(samples))))


def modeCoverage(target, samples, min_frac=0.001):
    """Nearest-mean assignment of `samples` to the mixture components

    :returns:
        ``(covered, fractions)``, the number of components holding at
        least `min_frac` of the samples and the per component fractions

    """
    _requireMoG(target, 'mode_coverage')
    nearest = target.nearestComponent(samples)
    fractions = np.bincount(nearest, minlength=len(target.means)) / \
                max(len(nearest), 1)
    return int(np.sum(fractions >= min_frac)), fractions


def signCoverage(target, samples, min_frac=0.01):
    """Many-Well blocks whose x1 is seen in both wells

    A block counts when at least `min_frac` of the samples fall on each
    side of x1 = 0.

    :returns:
        ``(covered, fractions)``, the number of such blocks and the per
        block fraction of samples with x1 > 0

    >>> from dikl.targets import ManyWellTarget
    >>> x = np.array([[1.5, 0.0, 1.7, 0.3], [-1.6, 0.2, 1.8, -0.1]])
    >>> covered, fractions = signCoverage(ManyWellTarget(4), x)
    >>> covered, fractions.tolist()
    (1, [0.5, 1.0])

    """
    if not isinstance(target, ManyWellTarget):
        raise UnsupportedMetricError({'msg': 'unsupported metric',
                                      'metric': 'sign_coverage',
                                      'kind': target.kind,
                                      'key': 'eval.metrics'})
    x1 = np.atleast_2d(samples)[:, 0::2]
    fractions = np.mean(x1 > 0.0, axis=0)
    covered = (fractions >= min_frac) & (1.0 - fractions >= min_frac)
    return int(np.sum(covered)), fractions


def referenceLogDensity(target, stream, n_samples=100000):
    """L*, the mean log-density of exact samples, with its standard error"""
    _requireMoG(target, 'mean_log_density')
    values = target.logDensity(target.groundTruthSamples(n_samples, stream))
    return float(values.mean()), float(values.std(ddof=1) /
                                       math.sqrt(n_samples))


def convolvedDensity1d(means, variances, weights, sigma, grid):
    """A 1D Gaussian mixture convolved with N(0, sigma^2), on `grid`

    >>> g = np.array([0.0])
    >>> round(float(convolvedDensity1d([0.0], [1.0], [1.0], 1.0, g)[0]), 6)
    0.282095

    """
    means = np.asarray(means, dtype=np.float64)[:, None]
    var = np.asarray(variances, dtype=np.float64)[:, None] + sigma ** 2
    weights = np.asarray(weights, dtype=np.float64)[:, None]
    grid = np.asarray(grid, dtype=np.float64)[None, :]
    dens = weights * np.exp(-0.5 * (grid - means) ** 2 / var) / \
           np.sqrt(2.0 * np.pi * var)
    return dens.sum(axis=0)


def countLocalMaxima(values):
    """Strict interior local maxima of a sampled curve

    >>> countLocalMaxima([0, 2, 1, 3, 0])
    2

    """
    v = np.asarray(values, dtype=np.float64)
    return int(np.sum((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])))


LandscapeGrid = collections.namedtuple('LandscapeGrid',
                                       ['mus', 'sigmas', 'alphas', 'values'])


def _logMixture(x, means, variances, logw):
    return logsumexp(logw - 0.5 * (x - means) ** 2 / variances -
                     0.5 * np.log(2.0 * np.pi * variances))


def gaussianMixtureKl(mu, var, means, variances, weights, cell=None,
                      width=12.0):
    """KL(N(mu, var) || mixture) with the model entropy in closed form and
    the cross entropy by adaptive quadrature over mu +- width sd

    :raises:
        `QuadratureError`
            When the integrator reports non-convergence

    """
    means = np.asarray(means, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    logw = np.log(np.asarray(weights, dtype=np.float64))
    sd = math.sqrt(var)
    entropy = 0.5 * math.log(2.0 * math.pi * math.e * var)
    integrand = lambda x: math.exp(-0.5 * (x - mu) ** 2 / var) / \
                          math.sqrt(2.0 * math.pi * var) * \
                          _logMixture(x, means, variances, logw)
    result = quad(integrand, mu - width * sd, mu + width * sd, limit=200,
                  full_output=1)
    if len(result) > 3:
        raise QuadratureError({'msg': 'cross entropy quadrature did not '
                                      'converge: %s' % result[3].split('\n')[0],
                               'cell': cell})
    return max(0.0, -entropy - result[0])


def klLandscape(mus, sigmas, target, alphas=(1.0, 0.8, 0.5, 0.1), threads=1):
    """KL between a 1D Gaussian model N(mu, sigma^2) and a 1D mixture
    target, both convolved with the VP kernel N(alpha x, 1 - alpha^2), for
    every grid cell and noise level

    :param target:
        :type: `MoGTarget` of dimension 1

    :returns:
        `LandscapeGrid` whose `values` have shape
        ``(len(alphas), len(mus), len(sigmas))``

    """
    if target.dim != 1:
        raise ContractError({'op': 'klLandscape',
                             'msg': 'the landscape needs a 1D target'})
    mus = np.asarray(mus, dtype=np.float64)
    sigmas = np.asarray(sigmas, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    if np.any(sigmas <= 0) or np.any(alphas <= 0) or np.any(alphas > 1):
        raise ContractError({'op': 'klLandscape',
                             'msg': 'need sigma > 0 and alpha in (0, 1]'})
    means = target.means[:, 0]
    variances, weights = target.variances, target.weights
    cells = [(k, i, j) for k in range(len(alphas))
             for i in range(len(mus)) for j in range(len(sigmas))]

    def cell(index):
        k, i, j = index
        a = alphas[k]
        noise = 1.0 - a * a
        return gaussianMixtureKl(a * mus[i], a * a * sigmas[j] ** 2 + noise,
                                 a * means, a * a * variances + noise, weights,
                                 cell={'alpha': float(a), 'mu': float(mus[i]),
                                       'sigma': float(sigmas[j])})

    values = np.array(RowPool(threads).map(cell, cells)) \
               .reshape(len(alphas), len(mus), len(sigmas))
    return LandscapeGrid(mus, sigmas, alphas, values)


def evaluateMetrics(target, samples, reference, metrics, stream, repeats=10,
                    size=2000, min_frac=0.001, threads=1):
    """Every requested metric over `repeats` subsamples of `size` rows

    Each repeat draws the rows of `samples` and `reference` with the same
    derived stream, so a set compared with itself scores exactly 0.

    :returns:
        An ordered dict metric -> ``{'mean', 'std', 'values'}``

    :raises:
        `UnsupportedMetricError`
            If a metric does not apply to the target kind

    """
    for metric in metrics:
        if metric not in METRICS:
            raise UnsupportedMetricError({'msg': 'unknown metric',
                                          'metric': metric,
                                          'kind': target.kind,
                                          'key': 'eval.metrics'})
        if metric in ('mean_log_density', 'mode_coverage'):
            _requireMoG(target, metric)
        if metric == 'distance_tvd' and target.symmetry is None:
            raise UnsupportedMetricError({'msg': 'unsupported metric',
                                          'metric': metric,
                                          'kind': target.kind,
                                          'key': 'eval.metrics'})
    samples = np.asarray(samples, dtype=np.float64)
    if reference is not None:
        reference = np.asarray(reference, dtype=np.float64)
    sym = target.symmetry

    def repeat(r):
        sub = stream.derive(r)
        A = subsample(samples, size, sub.copy())
        B = None if reference is None else subsample(reference, size,
                                                     sub.copy())
        row = {}
        for metric in metrics:
            if metric == 'w2':
                if sym is not None:
                    row[metric] = wasserstein2(zeroCenterProject(A, sym.n,
                                                                 sym.d),
                                               zeroCenterProject(B, sym.n,
                                                                 sym.d),
                                               sub.derive(0), size)
                else:
                    row[metric] = wasserstein2(A, B, sub.derive(0), size)
            elif metric == 'energy_tvd':
                row[metric] = energyTvd(target, A, B)
            elif metric == 'distance_tvd':
                row[metric] = distanceTvd(A, B, sym.n, sym.d)
            elif metric == 'mean_log_density':
                row[metric] = meanLogDensity(target, A)
            elif metric == 'mode_coverage':
                row[metric] = float(modeCoverage(target, A, min_frac)[0])
        return row

    if reference is None and \
       any(m in ('w2', 'energy_tvd', 'distance_tvd') for m in metrics):
        raise ContractError({'op': 'evaluateMetrics',
                             'msg': 'sample comparisons need a reference set'})
    rows = RowPool(threads).map(repeat, range(int(repeats)))
    report = collections.OrderedDict()
    for metric in metrics:
        values = np.array([row[metric] for row in rows])
        report[metric] = {'mean': float(values.mean()),
                          'std': float(values.std()),
                          'values': values.tolist()}
    return report
