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

"""Run configuration

A run config is a TOML file (JSON when its name ends in ``.json``) with the
flat sections of `SCHEMA`. Every key is declared once with its allowed types
and default; unknown keys and missing required keys are errors naming the
key and, when it can be found, its line. Environment variables
``DIKL_<SECTION>__<KEY>`` override file values (parsed as JSON, else kept as
strings), as do ``DIKL_SEED``, ``DIKL_THREADS``, ``DIKL_OUT`` and
``DIKL_LOG``.
"""

import os
import re
import json
import copy
from collections import OrderedDict

from .errors import ConfigError, parseError
from .platform import toml
from .utils import VOID, Namespace
from .targets import buildTarget
from .diffusion import buildVpLinear
from .posterior import getRecipe
from .trainer import TrainConfig


PRESET_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)),
                          'presets')
ENV_PREFIX = 'DIKL_'
ENV_SHORTCUTS = {'DIKL_SEED': ('run', 'seed'),
                 'DIKL_THREADS': ('run', 'threads'),
                 'DIKL_OUT': ('run', 'out'),
                 'DIKL_LOG': ('run', 'log')}

REQUIRED = VOID

_INT = (int,)
_FLOAT = (int, float)
_STR = (str,)
_BOOL = (bool,)
_LIST = (list,)


class UserValue(object):
    """A typed config value

    >>> uv = UserValue('trainer.iterations', 10, (int,))
    >>> uv(), uv.name()
    (10, 'trainer.iterations')
    >>> uv('many')
    Traceback (most recent call last):
        ...
    dikl.errors.ConfigError: 'trainer.iterations' value must be of type `int`

    """
    def __init__(self, name, value, allowed_types, line=None):
        if not isinstance(name, str):
            raise TypeError("'name' argument must be a string")
        self.__name = name
        self.__allowed_types = allowed_types
        self.__line = line
        self.__checkType(value)
        self.__value = value

    def __checkType(self, value):
        if value is None:
            return
        if isinstance(value, bool) and bool not in self.__allowed_types or \
           not isinstance(value, self.__allowed_types):
            error = {'msg': "'{}' value must be of type {}".format(
                         self.__name,
                         ' or '.join('`' + it.__name__ + '`'
                                     for it in self.__allowed_types))}
            if self.__line is not None:
                error['line'] = self.__line
            raise ConfigError(error)

    def name(self):
        return self.__name

    def __call__(self, value=VOID):
        if value is VOID:
            return self.__value
        else:
            self.__checkType(value)
            self.__value = value


SCHEMA = OrderedDict([
    ('run', OrderedDict([
        ('seed', (_INT, 0)),
        ('threads', (_INT, 1)),
        ('out', (_STR, 'runs')),
        ('log', (_STR, 'WARNING')),
    ])),
    ('targets', OrderedDict([
        ('kind', (_STR, REQUIRED)),
        ('dim', (_INT, None)),
        ('mean', (_FLOAT, None)),
        ('variance', (_FLOAT, None)),
        ('n_modes', (_INT, None)),
        ('bound', (_FLOAT, None)),
        ('layout_seed', (_INT, None)),
        ('n_particles', (_INT, None)),
        ('spatial_dim', (_INT, None)),
        ('a', (_FLOAT, None)),
        ('b', (_FLOAT, None)),
        ('c', (_FLOAT, None)),
        ('d0', (_FLOAT, None)),
        ('tau', (_FLOAT, None)),
        ('rm', (_FLOAT, None)),
        ('eps', (_FLOAT, None)),
        ('oscillator', (_FLOAT, None)),
        ('cutoff', (_FLOAT, None)),
        ('burn_in', (_INT, 2000)),
        ('thin', (_INT, 10)),
    ])),
    ('diffusion', OrderedDict([
        ('T', (_INT, 30)),
        ('beta_min', (_FLOAT, 1e-4)),
        ('beta_max', (_FLOAT, 0.7)),
        ('weighting', (_STR, 'inv_alpha')),
    ])),
    ('networks', OrderedDict([
        ('latent_dim', (_INT, None)),
        ('generator_hidden', (_LIST, [256] * 5)),
        ('score_hidden', (_LIST, [256] * 3)),
        ('activation', (_STR, 'silu')),
        ('embed_size', (_INT, 64)),
    ])),
    ('posterior', OrderedDict([
        ('recipe', (_STR, 'mog')),
        ('init', (_STR, None)),
        ('n_importance', (_INT, None)),
        ('ais_steps', (_INT, None)),
        ('ais_kernel', (_STR, None)),
        ('ais_step', (_FLOAT, None)),
        ('n_leapfrog', (_INT, None)),
        ('mass', (_FLOAT, None)),
        ('mala_steps', (_INT, None)),
        ('mala_step', (_FLOAT, None)),
        ('adaptive', (_BOOL, None)),
        ('adapt_every', (_INT, None)),
        ('keep_last', (_INT, None)),
    ])),
    ('trainer', OrderedDict([
        ('method', (_STR, 'dikl')),
        ('iterations', (_INT, 2000)),
        ('inner_steps', (_INT, 50)),
        ('batch_size', (_INT, 256)),
        ('score_batch_size', (_INT, 256)),
        ('lr_generator', (_FLOAT, 1e-3)),
        ('lr_score', (_FLOAT, 1e-3)),
        ('grad_clip', (_FLOAT, 10.0)),
        ('eval_every', (_INT, 250)),
        ('n_eval', (_INT, 2000)),
        ('refine_steps', (_INT, 50)),
        ('refine_step', (_FLOAT, 1e-2)),
        ('clean_sigma', (_FLOAT, 1e-2)),
    ])),
    ('eval', OrderedDict([
        ('metrics', (_LIST, ['w2', 'energy_tvd'])),
        ('repeats', (_INT, 10)),
        ('size', (_INT, 2000)),
        ('n_samples', (_INT, 10000)),
        ('min_frac', (_FLOAT, 0.001)),
        ('sample_batch', (_INT, 1000)),
    ])),
    ('landscape', OrderedDict([
        ('mu_min', (_FLOAT, -5.0)),
        ('mu_max', (_FLOAT, 5.0)),
        ('mu_points', (_INT, 51)),
        ('sigma_min', (_FLOAT, 0.05)),
        ('sigma_max', (_FLOAT, 2.0)),
        ('sigma_points', (_INT, 40)),
        ('alphas', (_LIST, [1.0, 0.8, 0.5, 0.1])),
        ('separation', (_FLOAT, 3.0)),
        ('variance', (_FLOAT, 0.01)),
    ])),
    ('check', OrderedDict([
        ('dim', (_INT, 2)),
        ('T', (_INT, 30)),
        ('beta_min', (_FLOAT, 1e-4)),
        ('beta_max', (_FLOAT, 0.7)),
        ('steps', (_LIST, [3, 8, 15])),
        ('samplers', (_LIST, ['exact', 'mala', 'hmc', 'is', 'sir', 'ais'])),
        ('n_samples', (_INT, 10000)),
        ('burn_in', (_INT, 1000)),
        ('mala_step', (_FLOAT, 0.1)),
        ('hmc_step', (_FLOAT, 0.3)),
        ('n_leapfrog', (_INT, 3)),
        ('ais_steps', (_INT, 10)),
        ('tolerance', (_FLOAT, 3.0)),
    ])),
])


def _locate(text, section, key=None):
    """Line number of `key` in `section` (or of the section header)"""
    if text is None:
        return None
    lines = text.splitlines()
    header = re.compile(r'^\s*\[\s*%s\s*\]' % re.escape(section))
    start = None
    for number, line in enumerate(lines, 1):
        if header.match(line):
            start = number
            if key is None:
                return number
        elif start is not None and re.match(r'^\s*\[', line):
            start = None
        elif start is not None and \
             re.match(r'^\s*"?%s"?\s*=' % re.escape(key), line):
            return number
    if key is not None:
        # JSON layout: the first occurrence of the quoted key
        for number, line in enumerate(lines, 1):
            if '"%s"' % key in line:
                return number
    return None


def presets():
    """Names of the shipped presets"""
    return sorted(os.path.splitext(f)[0] for f in os.listdir(PRESET_DIR)
                  if f.endswith('.toml'))


def resolveSource(source):
    """A config path, or the path of the preset named `source`"""
    if os.path.isfile(source):
        return source
    preset = os.path.join(PRESET_DIR, source + '.toml')
    if os.path.isfile(preset):
        return preset
    raise ConfigError({'msg': "no config file or preset named '%s' "
                              "(presets: %s)" % (source, ', '.join(presets())),
                       'key': '--config'})


def parseText(text, json_format=False):
    try:
        if json_format:
            return json.loads(text)
        return toml.loads(text)
    except (ValueError, toml.TOMLDecodeError) as e:
        error = parseError(str(e)) or {'msg': str(e)}
        raise ConfigError(error)


def _envValue(raw):
    try:
        return json.loads(raw)
    except ValueError:
        return raw

def environmentOverrides(environ):
    """(section, key, value) triples from ``DIKL_*`` variables

    >>> environmentOverrides({'DIKL_TRAINER__ITERATIONS': '5',
    ...                       'DIKL_OUT': '/tmp/x', 'HOME': '/root'})
    [('run', 'out', '/tmp/x'), ('trainer', 'iterations', 5)]

    """
    overrides = []
    for name in sorted(environ):
        if name in ENV_SHORTCUTS:
            section, key = ENV_SHORTCUTS[name]
        elif name.startswith(ENV_PREFIX) and '__' in name[len(ENV_PREFIX):]:
            section, key = name[len(ENV_PREFIX):].lower().split('__', 1)
        else:
            continue
        if name in ('DIKL_OUT', 'DIKL_LOG'):
            value = environ[name]
        else:
            value = _envValue(environ[name])
        overrides.append((section, key, value))
    return overrides


def resolve(raw, text=None, environ=None):
    """Check `raw` against `SCHEMA` and fill in defaults

    :param raw:
        :type: `dict`
        Parsed config, section -> key -> value
    :param text:
        :type: `str or None`
        Source text, to report line numbers
    :param environ:
        :type: mapping or None
        Environment for the ``DIKL_*`` overrides

    :returns:
        A `Namespace` of section `Namespace` objects

    >>> cfg = resolve({'targets': {'kind': 'gaussian', 'dim': 1}})
    >>> cfg.targets.kind, cfg.diffusion.T, cfg.run.seed
    ('gaussian', 30, 0)
    >>> try:
    ...     resolve({'targets': {'kind': 'mog'}, 'trainer': {'itrations': 5}})
    ... except ConfigError as e:
    ...     print(e.key)
    trainer.itrations

    """
    raw = copy.deepcopy(raw) if raw is not None else {}
    if not isinstance(raw, dict):
        raise ConfigError({'msg': 'a config must be a table of sections'})
    for section, key, value in environmentOverrides(environ or {}):
        raw.setdefault(section, {})[key] = value
    for section, values in raw.items():
        if section not in SCHEMA:
            raise ConfigError({'msg': 'unknown section', 'key': section,
                               'line': _locate(text, section)})
        if not isinstance(values, dict):
            raise ConfigError({'msg': 'a section must be a table',
                               'key': section, 'line': _locate(text, section)})
        for key in values:
            if key not in SCHEMA[section]:
                raise ConfigError({'msg': 'unknown key',
                                   'key': '%s.%s' % (section, key),
                                   'line': _locate(text, section, key)})
    resolved = Namespace()
    for section, keys in SCHEMA.items():
        given = raw.get(section, {})
        values = Namespace()
        for key, (types, default) in keys.items():
            name = '%s.%s' % (section, key)
            if key in given:
                value = UserValue(name, given[key], types,
                                  _locate(text, section, key))()
            elif default is REQUIRED:
                raise ConfigError({'msg': 'missing required key', 'key': name,
                                   'line': _locate(text, section)})
            else:
                value = copy.deepcopy(default)
            values[key] = value
        resolved[section] = values
    return resolved


def loadConfig(source, environ=None):
    """Read, override and resolve a config path or preset name

    :returns:
        ``(config, path)``

    :raises:
        `ConfigError`

    """
    path = resolveSource(source)
    try:
        with open(path, 'r') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError({'msg': 'cannot read config: %s' % e,
                           'key': '--config'})
    raw = parseText(text, path.endswith('.json'))
    return resolve(raw, text, os.environ if environ is None else environ), path


def asDict(cfg):
    """Plain JSON-able copy of a resolved config, rerunnable as a JSON
    config"""
    return OrderedDict((section, OrderedDict(
                           (k, v) for k, v in cfg[section].items()
                           if v is not None))
                       for section in SCHEMA)


# Builders

def targetOptions(cfg):
    return dict((k, v) for k, v in cfg.targets.items()
                if k not in ('kind', 'burn_in', 'thin') and v is not None)

def buildTargetFrom(cfg):
    return buildTarget(cfg.targets.kind, **targetOptions(cfg))

def buildScheduleFrom(cfg):
    d = cfg.diffusion
    return buildVpLinear(d.T, d.beta_min, d.beta_max, d.weighting)

def buildRecipeFrom(cfg, target=None):
    overrides = dict((k, v) for k, v in cfg.posterior.items()
                     if k != 'recipe' and v is not None)
    recipe = getRecipe(cfg.posterior.recipe, **overrides)
    if recipe.init == 'exact' and target is not None and \
       not getattr(target, 'isGaussian', False):
        raise ConfigError({'msg': "recipe '%s' needs a single Gaussian "
                                  "target" % recipe.name,
                           'key': 'posterior.recipe'})
    return recipe

def trainConfigFrom(cfg):
    settings = dict(cfg.trainer)
    settings.update(cfg.networks)
    settings['seed'] = cfg.run.seed
    return TrainConfig(**settings)
