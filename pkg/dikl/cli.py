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

"""The ``dikl`` command

Every subcommand writes only below its output directory, always including
``resolved-config.json`` (a config that reruns the command) and
``metadata.json``. Exit codes: 0 ok, 2 config error, 3 runtime abort,
4 oracle failure.
"""

import os
import sys
import time
import logging
import argparse
from collections import OrderedDict

import numpy as np

from . import config as configuration
from . import platform
from .errors import ConfigError, DiklError, OracleFailure
from .file import (CsvRecords, readSamples, writeJson, writeMatrixCsv,
                   writeSamples)
from .networks import ModelPair, generate
from .numerics import RngStream, suspendTape
from .targets import ParticleTarget, gaussianTarget, bimodal1d
from .diffusion import buildVpLinear
from .posterior import (AisConfig, ChainState, PosteriorProblem,
                        aisRun, analyticGaussianPosterior, effectiveSampleSize,
                        getRecipe, hmcStep, isWeights, malaStep,
                        samplePosterior, sirResample)
from .evaluation import evaluateMetrics, klLandscape, referenceLogDensity
from .trainer import HISTORY_FIELDS, trainDikl, trainRklSm


STREAM_SAMPLE = 7
STREAM_EVAL = 8
STREAM_REFERENCE = 9
STREAM_CHECK = 10

DEFAULT_PRESET = 'gaussian1d-smoke'
LOG_FORMAT = '%(asctime)s %(name)s %(levelname)s: %(message)s'

logger = logging.getLogger('dikl.cli')


# Shared plumbing

def _overrides(cfg, args):
    if getattr(args, 'seed', None) is not None:
        cfg.run.seed = args.seed
    if getattr(args, 'threads', None) is not None:
        cfg.run.threads = args.threads
    if getattr(args, 'out', None) is not None:
        cfg.run.out = args.out
    if getattr(args, 'metrics', None):
        cfg.eval.metrics = [m.strip() for m in args.metrics.split(',')
                            if m.strip()]
    if cfg.run.threads < 1:
        raise ConfigError({'msg': 'need at least one thread',
                           'key': 'run.threads'})
    return cfg

def _configure(args, fallback=None):
    """Resolved config of a command: ``--config``, else `fallback` (a raw
    config dict), else the default preset"""
    source = None
    if args.config is not None:
        cfg, source = configuration.loadConfig(args.config)
    elif fallback is not None:
        cfg = configuration.resolve(fallback, environ=os.environ)
    else:
        cfg, source = configuration.loadConfig(DEFAULT_PRESET)
    return _overrides(cfg, args), source

def _setupLogging(args, cfg=None):
    if args.verbose:
        level = logging.DEBUG if args.verbose > 1 else logging.INFO
    else:
        name = cfg.run.log if cfg is not None else \
               os.environ.get('DIKL_LOG', 'WARNING')
        level = getattr(logging, str(name).upper(), None)
        if not isinstance(level, int):
            raise ConfigError({'msg': "unknown log level '%s'" % name,
                               'key': 'run.log'})
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)
    return level

def _outputDirectory(cfg):
    out = cfg.run.out
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as e:
        raise ConfigError({'msg': 'cannot create output directory: %s' % e,
                           'key': 'run.out'})
    return out

def _record(out, cfg, command, source=None, **extra):
    """Write the resolved config and the run metadata of `command`"""
    writeJson(os.path.join(out, 'resolved-config.json'),
              configuration.asDict(cfg))
    metadata = OrderedDict([('command', command),
                            ('config', source),
                            ('seed', cfg.run.seed),
                            ('threads', cfg.run.threads)])
    metadata.update(extra)
    metadata['platform'] = platform.describe()
    writeJson(os.path.join(out, 'metadata.json'), metadata)
    return metadata

def _referenceSamples(cfg, target, n_samples, stream):
    if isinstance(target, ParticleTarget):
        return target.groundTruthSamples(n_samples, stream,
                                         burn_in=cfg.targets.burn_in,
                                         thin=cfg.targets.thin)
    return target.groundTruthSamples(n_samples, stream)

def _loadCheckpoint(path):
    pair, metadata = ModelPair.load(path)
    logger.info('loaded checkpoint %s (iteration %s)', path,
                metadata.get('iteration'))
    return pair, metadata

def _generate(pair, count, stream, batch):
    """`count` one-step samples drawn `batch` rows at a time

    :returns:
        ``(samples, timings)`` with the wall-clock seconds of every batch

    """
    gen = pair.generator
    z = stream.normal((count, gen.latent_dim))
    parts, timings = [], []
    for start in range(0, count, batch):
        tic = time.perf_counter()
        with suspendTape():
            parts.append(generate(gen, z[start:start + batch]).numpy())
        timings.append(time.perf_counter() - tic)
        logger.info('batch of %d samples in %.4fs', len(parts[-1]),
                    timings[-1])
    if not parts:
        return np.zeros((0, gen.dim)), timings
    return np.concatenate(parts), timings


# Subcommands

def cmdTrain(args):
    cfg, source = _configure(args)
    _setupLogging(args, cfg)
    target = configuration.buildTargetFrom(cfg)
    schedule = configuration.buildScheduleFrom(cfg)
    recipe = configuration.buildRecipeFrom(cfg, target)
    tcfg = configuration.trainConfigFrom(cfg)
    out = _outputDirectory(cfg)
    _record(out, cfg, 'train', source, target=target.describe(),
            schedule=schedule.describe(), recipe=recipe.describe(),
            method=tcfg.method)
    train = trainDikl if tcfg.method == 'dikl' else trainRklSm
    log = logging.getLogger().isEnabledFor(logging.INFO)
    with CsvRecords(os.path.join(out, 'metrics.csv'), HISTORY_FIELDS) \
         as records:
        state = train(target, schedule, recipe, tcfg, out=out,
                      records=records, log=log,
                      metadata={'config': configuration.asDict(cfg)})
    summary = OrderedDict([('iterations', state.iteration),
                           ('initial_early_stop_tvd', state.initial_metric),
                           ('best_early_stop_tvd', state.best_metric),
                           ('best_iteration', state.best_iteration),
                           ('best_checkpoint', state.best_checkpoint)])
    writeJson(os.path.join(out, 'summary.json'), summary)
    print('trained %d iterations, best early stop TVD %s at iteration %s' %
          (state.iteration, summary['best_early_stop_tvd'],
           summary['best_iteration']))
    return 0

def cmdSample(args):
    _setupLogging(args)
    pair, metadata = _loadCheckpoint(args.checkpoint)
    cfg, source = _configure(args, metadata.get('config'))
    if args.count < 0:
        raise ConfigError({'msg': 'cannot draw a negative number of samples',
                           'key': '--n'})
    kind = cfg.targets.kind
    out = _outputDirectory(cfg)
    gen = pair.generator
    passes, rows = gen.passes, gen.rows
    samples, timings = _generate(pair, args.count,
                                 RngStream(cfg.run.seed, STREAM_SAMPLE),
                                 cfg.eval.sample_batch)
    path = os.path.join(out, 'samples')
    writeSamples(path, samples, kind)
    _record(out, cfg, 'sample', source, checkpoint=args.checkpoint,
            count=args.count,
            timing={'batch_seconds': timings,
                    'network_passes': gen.passes - passes,
                    'network_rows': gen.rows - rows})
    print('%d samples written to %s.bin' % (len(samples), path))
    return 0

def cmdEval(args):
    _setupLogging(args)
    pair = metadata = None
    if args.checkpoint is not None:
        pair, metadata = _loadCheckpoint(args.checkpoint)
    elif args.samples is None:
        raise ConfigError({'msg': 'give a checkpoint or a sample dump',
                           'key': '--checkpoint'})
    fallback = metadata.get('config') if metadata else None
    if args.config is None and fallback is None:
        raise ConfigError({'msg': 'evaluating a sample dump needs the '
                                  'config of its target',
                           'key': '--config'})
    cfg, source = _configure(args, fallback)
    target = configuration.buildTargetFrom(cfg)
    out = _outputDirectory(cfg)
    e = cfg.eval
    if pair is not None:
        samples, _ = _generate(pair, e.n_samples,
                               RngStream(cfg.run.seed, STREAM_SAMPLE),
                               e.sample_batch)
    else:
        samples, sidecar = readSamples(args.samples)
        if sidecar['dim'] != target.dim:
            raise ConfigError({'msg': 'dump of dimension %d does not match '
                                      'the %d-dimensional target' %
                                      (sidecar['dim'], target.dim),
                               'key': '--samples'})
    reference = None
    if args.reference is not None:
        reference, _ = readSamples(args.reference)
    elif any(m in ('w2', 'energy_tvd', 'distance_tvd') for m in e.metrics):
        reference = _referenceSamples(cfg, target, e.n_samples,
                                      RngStream(cfg.run.seed,
                                                STREAM_REFERENCE))
    report = evaluateMetrics(target, samples, reference, e.metrics,
                             RngStream(cfg.run.seed, STREAM_EVAL), e.repeats,
                             e.size, e.min_frac, cfg.run.threads)
    if 'mean_log_density' in e.metrics:
        level, se = referenceLogDensity(target, RngStream(cfg.run.seed,
                                                          STREAM_REFERENCE)
                                                .derive(1))
        report['reference_log_density'] = {'mean': level, 'std': se,
                                           'values': [level]}
    writeJson(os.path.join(out, 'metrics.json'), report)
    with CsvRecords(os.path.join(out, 'metrics.csv'),
                    ('metric', 'mean', 'std')) as records:
        records.write([{'metric': m, 'mean': r['mean'], 'std': r['std']}
                       for m, r in report.items()])
    _record(out, cfg, 'eval', source, target=target.describe(),
            checkpoint=args.checkpoint, samples=args.samples,
            reference=args.reference or 'ground truth',
            count=len(samples))
    for metric, row in report.items():
        print('%-22s %.6g +- %.6g' % (metric, row['mean'], row['std']))
    return 0

def cmdLandscape(args):
    cfg, source = _configure(args)
    _setupLogging(args, cfg)
    ls = cfg.landscape
    target = bimodal1d(ls.separation, ls.variance)
    mus = np.linspace(ls.mu_min, ls.mu_max, ls.mu_points)
    sigmas = np.linspace(ls.sigma_min, ls.sigma_max, ls.sigma_points)
    out = _outputDirectory(cfg)
    grid = klLandscape(mus, sigmas, target, ls.alphas, cfg.run.threads)
    minima = []
    for k, alpha in enumerate(grid.alphas):
        writeMatrixCsv(os.path.join(out, 'landscape-alpha-%g.csv' % alpha),
                       grid.values[k], mus, sigmas)
        i, j = np.unravel_index(np.argmin(grid.values[k]),
                                grid.values[k].shape)
        minima.append({'alpha': float(alpha), 'mu': float(mus[i]),
                       'sigma': float(sigmas[j]),
                       'kl': float(grid.values[k][i, j])})
        print('alpha %g: minimum KL %.4g at mu %g, sigma %g' %
              (alpha, minima[-1]['kl'], mus[i], sigmas[j]))
    writeJson(os.path.join(out, 'landscape.json'), {'minima': minima})
    _record(out, cfg, 'landscape', source, target=target.describe())
    return 0


# Posterior calibration against the exact Gaussian posterior

def _zScores(estimate, truth, se):
    """Root mean square of the per-dimension z-scores"""
    z = (np.asarray(estimate) - truth) / se
    return float(np.sqrt(np.mean(z * z)))

def _weightedMoments(samples, weights):
    mean = np.sum(weights[:, None] * samples, axis=0)
    var = np.sum(weights[:, None] * (samples - mean) ** 2, axis=0)
    return mean, var

def _chains(prob, state, kernel, steps, noise, n_leapfrog):
    for _ in range(steps):
        if kernel == 'hmc':
            state = hmcStep(prob, state, noise, n_leapfrog)
        else:
            state = malaStep(prob, state, noise)
    return state

def checkSampler(name, target, schedule, t, x_t, cc, stream):
    """Moments of sampler `name` on the posterior at step `t`, with their
    standard errors

    :returns:
        ``(mean, var, mean_se, var_se)``

    """
    n = cc.n_samples
    prob = PosteriorProblem(target, x_t, t, schedule)
    _, exact_var = analyticGaussianPosterior(prob)
    if name in ('mala', 'hmc'):
        batch = PosteriorProblem(target, np.tile(x_t, (n, 1)), t, schedule)
        step = cc.mala_step if name == 'mala' else cc.hmc_step
        state = ChainState.start(batch, batch.x_t / batch.alpha, step)
        state = _chains(batch, state, name, cc.burn_in, stream, cc.n_leapfrog)
        x = state.x
        ess = float(n)
        mean, var = x.mean(axis=0), x.var(axis=0, ddof=1)
    elif name == 'exact':
        x = samplePosterior(prob, getRecipe('exact-gaussian', keep_last=n),
                            stream).samples
        ess = float(n)
        mean, var = x.mean(axis=0), x.var(axis=0, ddof=1)
    elif name in ('is', 'sir'):
        samples, weights = isWeights(prob, n, stream)
        ess = float(effectiveSampleSize(weights))
        if name == 'sir':
            x = sirResample(samples, weights, stream, count=n)
            mean, var = x.mean(axis=0), x.var(axis=0, ddof=1)
            # resampling adds its own multinomial noise
            ess = 1.0 / (1.0 / ess + 1.0 / n)
        else:
            mean, var = _weightedMoments(samples, weights)
    elif name == 'ais':
        result = aisRun(prob, AisConfig(n, cc.ais_steps, 'mala',
                                        cc.mala_step), stream)
        ess = float(result.ess)
        mean, var = _weightedMoments(result.samples, result.weights)
    else:
        raise ConfigError({'msg': "unknown sampler '%s'" % name,
                           'key': 'check.samplers'})
    return mean, var, np.sqrt(exact_var / ess), exact_var * np.sqrt(2.0 / ess)

def posteriorCheck(cfg):
    """Run every configured sampler against N(alpha x_t, sigma^2 I) scaled
    for the standard Gaussian target

    :returns:
        A list of result rows, one per sampler and step

    """
    cc = cfg.check
    target = gaussianTarget(cc.dim)
    schedule = buildVpLinear(cc.T, cc.beta_min, cc.beta_max)
    root = RngStream(cfg.run.seed, STREAM_CHECK)
    x_t = root.derive(0).normal(cc.dim)
    rows = []
    for t in cc.steps:
        if not 1 <= t <= schedule.T:
            raise ConfigError({'msg': 'step %s outside 1..%d' %
                                      (t, schedule.T),
                               'key': 'check.steps'})
        exact_mean, exact_var = analyticGaussianPosterior(
            PosteriorProblem(target, x_t, t, schedule))
        for k, name in enumerate(cc.samplers):
            stream = root.derive(1 + t * len(cc.samplers) + k)
            with np.errstate(all='ignore'):
                mean, var, mean_se, var_se = checkSampler(
                    name, target, schedule, t, x_t, cc, stream)
            z_mean = _zScores(mean, exact_mean, mean_se)
            z_var = _zScores(var, exact_var, var_se)
            passed = bool(np.isfinite(z_mean) and np.isfinite(z_var) and
                          z_mean < cc.tolerance and z_var < cc.tolerance)
            rows.append(OrderedDict([('sampler', name), ('t', t),
                                     ('z_mean', z_mean), ('z_var', z_var),
                                     ('passed', passed)]))
            logger.info('%s at t=%d: z mean %.3f, z var %.3f', name, t,
                        z_mean, z_var)
    return rows

def cmdPosteriorCheck(args):
    cfg, source = _configure(args)
    _setupLogging(args, cfg)
    out = _outputDirectory(cfg)
    rows = posteriorCheck(cfg)
    with CsvRecords(os.path.join(out, 'posterior-check.csv'),
                    ('sampler', 't', 'z_mean', 'z_var', 'passed')) as records:
        records.write(rows)
    _record(out, cfg, 'posterior-check', source,
            tolerance=cfg.check.tolerance)
    for row in rows:
        print('%-5s %-6s t=%-3d z(mean) %.3f  z(var) %.3f' %
              ('PASS' if row['passed'] else 'FAIL', row['sampler'], row['t'],
               row['z_mean'], row['z_var']))
    failed = sorted(set(row['sampler'] for row in rows if not row['passed']))
    if failed:
        raise OracleFailure({'msg': 'posterior samplers disagree with the '
                                    'exact Gaussian posterior',
                             'failed': failed})
    return 0

def cmdPresets(args):
    for name in configuration.presets():
        print(name)
    return 0


# Parser

def buildParser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None,
                        help='config file (TOML or JSON) or preset name')
    common.add_argument('--seed', type=int, default=None,
                        help='overrides run.seed')
    common.add_argument('--threads', type=int, default=None,
                        help='overrides run.threads')
    common.add_argument('--out', default=None,
                        help='output directory, overrides run.out')
    common.add_argument('-v', '--verbose', action='count', default=0,
                        help='log INFO (twice: DEBUG) to stderr')

    parser = argparse.ArgumentParser(
        prog='dikl', description='One-step neural samplers trained with the '
                                 'diffusive KL divergence')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    p = sub.add_parser('train', parents=[common],
                       help='train a generator and its score network')
    p.set_defaults(func=cmdTrain)

    p = sub.add_parser('sample', parents=[common],
                       help='draw one-step samples from a checkpoint')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('-n', '--n', dest='count', type=int, default=1000,
                   help='number of samples (default: %(default)s)')
    p.set_defaults(func=cmdSample)

    p = sub.add_parser('eval', parents=[common],
                       help='evaluate a checkpoint or a sample dump')
    p.add_argument('--checkpoint', default=None)
    p.add_argument('--samples', default=None, help='sample dump to evaluate')
    p.add_argument('--reference', default=None,
                   help='reference dump (default: ground truth samples)')
    p.add_argument('--metrics', default=None,
                   help='comma separated, overrides eval.metrics')
    p.set_defaults(func=cmdEval)

    p = sub.add_parser('landscape', parents=[common],
                       help='KL landscape of a 1D Gaussian model')
    p.set_defaults(func=cmdLandscape)

    p = sub.add_parser('posterior-check', parents=[common],
                       help='calibrate the posterior samplers on a Gaussian')
    p.set_defaults(func=cmdPosteriorCheck)

    p = sub.add_parser('presets', help='list the shipped presets')
    p.set_defaults(func=cmdPresets)
    return parser


def main(argv=None):
    args = buildParser().parse_args(argv)
    try:
        return args.func(args)
    except DiklError as e:
        logger.debug('command failed', exc_info=True)
        print('dikl %s: %s' % (args.command, e), file=sys.stderr)
        return e.exit_code
