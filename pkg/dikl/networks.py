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

"""The one-step generator g(z) and the time conditioned score network s(x_t, t)

Both are plain MLPs over flattened coordinates. For particle targets the
outputs are multiplied by the zero center of mass projector, so they always
lie in the subspace where the particle mean vanishes.
"""

import hashlib

import numpy as np

from .errors import ContractError
from .numerics import Tensor, affine, concat, matmul, suspendTape
from .diffusion import timeEmbedding
from .targets import ProductGroup
from . import file


ACTIVATIONS = ('silu', 'relu')


def centeringMatrix(n, d):
    """The symmetric projector I - (1/n) 11^T (x) I_d on flattened particle
    coordinates

    >>> P = centeringMatrix(2, 1)
    >>> P
    array([[ 0.5, -0.5],
           [-0.5,  0.5]])

    """
    return np.eye(n * d) - np.kron(np.full((n, n), 1.0 / n), np.eye(d))


class MLP(object):
    """A fully connected network with `activation` between layers

    :param sizes:
        :type: `list of int`
        Layer widths, input first and output last
    :param stream:
        :type: `RngStream or None`
        Initialization draws; ``None`` leaves every parameter at zero
    :param zero_last:
        :type: `bool`
        Zero initialize the output layer

    Weights use the fan-in scaled uniform initialization
    U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases too.

    """
    def __init__(self, sizes, activation='silu', stream=None, zero_last=False):
        super(MLP, self).__init__()
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise ContractError({'op': 'MLP',
                                 'msg': 'invalid layer sizes %s' % (sizes,)})
        if activation not in ACTIVATIONS:
            raise ContractError({'op': 'MLP',
                                 'msg': "unknown activation '%s'" % activation})
        self.__sizes = [int(s) for s in sizes]
        self.__activation = activation
        self.__params = []
        for k, (fan_in, fan_out) in enumerate(zip(self.__sizes[:-1],
                                                  self.__sizes[1:])):
            last = k == len(self.__sizes) - 2
            if stream is None or (last and zero_last):
                w, b = np.zeros((fan_in, fan_out)), np.zeros(fan_out)
            else:
                bound = 1.0 / np.sqrt(fan_in)
                w = bound * (2.0 * stream.uniform((fan_in, fan_out)) - 1.0)
                b = bound * (2.0 * stream.uniform(fan_out) - 1.0)
            self.__params += [Tensor(w, requires_grad=True, copy=False),
                              Tensor(b, requires_grad=True, copy=False)]

    sizes = property(lambda self: list(self.__sizes))
    activation = property(lambda self: self.__activation)

    def parameterCount(self):
        """sum over layers of fan_in * fan_out + fan_out

        >>> MLP([3, 5, 2]).parameterCount()
        32

        """
        return sum(a * b + b for a, b in zip(self.__sizes[:-1],
                                             self.__sizes[1:]))

    def parameters(self):
        return list(self.__params)

    def setParameters(self, params):
        params = list(params)
        if [p.shape for p in params] != [p.shape for p in self.__params]:
            raise ContractError({'op': 'setParameters',
                                 'msg': 'parameter shapes disagree'})
        self.__params = [p if isinstance(p, Tensor) and p.requires_grad
                         else Tensor(getattr(p, 'data', p), requires_grad=True)
                         for p in params]

    def namedParameters(self, prefix):
        for k, p in enumerate(self.__params):
            yield '%s.%d.%s' % (prefix, k // 2, 'bias' if k % 2 else 'weight'), p

    def forward(self, h):
        n_layers = len(self.__params) // 2
        for k in range(n_layers):
            h = affine(h, self.__params[2 * k], self.__params[2 * k + 1])
            if k < n_layers - 1:
                h = h.silu() if self.__activation == 'silu' else h.relu()
        return h


class _Network(object):

    def __init__(self, mlp, symmetry):
        super(_Network, self).__init__()
        self._mlp = mlp
        self.__symmetry = symmetry
        self.__projector = None if symmetry is None else \
                           Tensor(centeringMatrix(symmetry.n, symmetry.d),
                                  copy=False)

    symmetry = property(lambda self: self.__symmetry)
    mlp = property(lambda self: self._mlp)

    def parameters(self):
        return self._mlp.parameters()

    def setParameters(self, params):
        self._mlp.setParameters(params)

    def parameterCount(self):
        return self._mlp.parameterCount()

    def fingerprint(self):
        """A digest of the current parameter values"""
        digest = hashlib.sha256()
        for p in self._mlp.parameters():
            digest.update(np.ascontiguousarray(p.data).tobytes())
        return digest.hexdigest()

    def _project(self, out):
        if self.__projector is None:
            return out
        return matmul(out, self.__projector)

    def _architecture(self):
        sizes = self._mlp.sizes
        arch = {'sizes': sizes, 'activation': self._mlp.activation,
                'symmetry': None}
        if self.__symmetry is not None:
            arch['symmetry'] = [self.__symmetry.n, self.__symmetry.d]
        return arch


class GeneratorNet(_Network):
    """x = g(z), the implicit one-step sampler

    :param latent_dim:
        :type: `int`
    :param dim:
        :type: `int`
        Target dimension
    :param hidden:
        :type: `list of int`

    """
    def __init__(self, latent_dim, dim, hidden=(256,) * 5, activation='silu',
                 symmetry=None, stream=None):
        mlp = MLP([latent_dim] + list(hidden) + [dim], activation, stream)
        super(GeneratorNet, self).__init__(mlp, symmetry)
        self.__latent_dim = int(latent_dim)
        self.__dim = int(dim)
        self.passes = 0
        self.rows = 0

    latent_dim = property(lambda self: self.__latent_dim)
    dim = property(lambda self: self.__dim)

    def describe(self):
        return dict(self._architecture(), latent_dim=self.__latent_dim,
                    dim=self.__dim)

    def __call__(self, z):
        return generate(self, z)


def generate(gen, z):
    """One forward pass over a batch of latents

    >>> gen = GeneratorNet(2, 2, hidden=[4])
    >>> generate(gen, np.ones((3, 2))).data
    array([[0., 0.],
           [0., 0.],
           [0., 0.]])

    """
    z = z if isinstance(z, Tensor) else Tensor(z, copy=False)
    if z.ndim != 2 or z.shape[1] != gen.latent_dim:
        raise ContractError({'op': 'generate',
                             'msg': 'expected latents of shape (B, %d), '
                                    'given %s' % (gen.latent_dim, z.shape)})
    gen.passes += 1
    gen.rows += z.shape[0]
    return gen._project(gen.mlp.forward(z))


class ScoreNet(_Network):
    """s(x_t, t) over ``[x_t, embed(t/T)]``; the output layer starts at zero

    :param dim:
        :type: `int`
    :param horizon:
        :type: `int`
        Step count T of the schedule the network is conditioned on
    :param embed_size:
        :type: `int`
        Width of the sinusoidal time embedding

    """
    def __init__(self, dim, horizon, hidden=(256,) * 3, activation='silu',
                 embed_size=64, symmetry=None, stream=None, zero_last=True):
        mlp = MLP([dim + embed_size] + list(hidden) + [dim], activation, stream,
                  zero_last=zero_last)
        super(ScoreNet, self).__init__(mlp, symmetry)
        self.__dim = int(dim)
        self.__horizon = int(horizon)
        self.__embed_size = int(embed_size)

    dim = property(lambda self: self.__dim)
    horizon = property(lambda self: self.__horizon)
    embed_size = property(lambda self: self.__embed_size)

    def describe(self):
        return dict(self._architecture(), dim=self.__dim,
                    horizon=self.__horizon, embed_size=self.__embed_size)

    def forward(self, x_t, t):
        x_t = x_t if isinstance(x_t, Tensor) else Tensor(x_t, copy=False)
        if x_t.ndim != 2 or x_t.shape[1] != self.__dim:
            raise ContractError({'op': 'scoreEval',
                                 'msg': 'expected inputs of shape (B, %d), '
                                        'given %s' % (self.__dim, x_t.shape)})
        emb = np.broadcast_to(timeEmbedding(t, self.__horizon,
                                            self.__embed_size),
                              (x_t.shape[0], self.__embed_size))
        h = concat([x_t, Tensor(emb)], axis=1)
        return self._project(self._mlp.forward(h))

    def __call__(self, x_t, t):
        """Detached evaluation returning a numpy array"""
        with suspendTape():
            return self.forward(np.atleast_2d(x_t), t).numpy() \
                       .reshape(np.shape(x_t))


def scoreEval(net, x_t, t, schedule):
    """The score network at step `t` of `schedule`

    >>> from dikl.diffusion import buildVpLinear
    >>> s = buildVpLinear(10, 1e-4, 0.2)
    >>> scoreEval(ScoreNet(3, 10, hidden=[8]), np.ones((2, 3)), 4, s).shape
    (2, 3)

    """
    if not 1 <= t <= schedule.T:
        raise ContractError({'op': 'scoreEval',
                             'msg': 'step %s outside 1..%d' % (t, schedule.T)})
    return net.forward(x_t, t)


class ModelPair(object):
    """The generator and its score network, saved and loaded together"""

    def __init__(self, generator, scorenet):
        super(ModelPair, self).__init__()
        self.generator = generator
        self.scorenet = scorenet

    def describe(self):
        return {'generator': self.generator.describe(),
                'scorenet': self.scorenet.describe()}

    def namedParameters(self):
        return list(self.generator.mlp.namedParameters('generator')) + \
               list(self.scorenet.mlp.namedParameters('scorenet'))

    def save(self, path, metadata=None):
        named = [(name, p.data) for name, p in self.namedParameters()]
        return file.saveParameters(path, named,
                                   dict(metadata or {},
                                        architecture=self.describe()))

    @classmethod
    def load(cls, path):
        """Rebuild a pair from a checkpoint; the forward passes are
        bit-identical to the saved pair's"""
        tensors, metadata = file.loadParameters(path)
        try:
            arch = metadata['architecture']
            g, s = arch['generator'], arch['scorenet']
            sym = lambda a: None if a['symmetry'] is None \
                            else ProductGroup(*a['symmetry'])
            gen = GeneratorNet(g['latent_dim'], g['dim'], g['sizes'][1:-1],
                               g['activation'], sym(g))
            net = ScoreNet(s['dim'], s['horizon'], s['sizes'][1:-1],
                           s['activation'], s['embed_size'], sym(s))
            pair = cls(gen, net)
            for prefix, network in (('generator', gen), ('scorenet', net)):
                network.setParameters(
                    [Tensor(tensors[name], requires_grad=True, copy=False)
                     for name, _ in network.mlp.namedParameters(prefix)])
        except (KeyError, TypeError, ContractError) as e:
            raise ContractError({'op': 'ModelPair.load',
                                 'msg': 'checkpoint %s does not describe a '
                                        'model pair: %s' % (path, e)})
        return pair, metadata
