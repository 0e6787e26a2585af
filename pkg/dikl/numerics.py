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

"""Dense float64 tensors with tape-based reverse-mode differentiation,
counter-based random streams, Adam and gradient clipping.

Recording is explicit: operations are written to the innermost active
`GradTape` only when one of their inputs is a leaf marked ``requires_grad``
or an output already recorded on that tape. Outside a tape, or inside
`suspendTape`, tensors are plain value carriers.

>>> w = Tensor([1., 2.])
>>> x = Tensor([3., 4.], requires_grad=True)
>>> with GradTape() as tape:
...     root = (w * x).sum()
>>> float(root.data)
11.0
>>> backward(root, tape)[x].data
array([1., 2.])

"""

import threading
import contextlib

import numpy as np
from scipy.special import expit

from .errors import ContractError


_local = threading.local()

def _stack():
    if not hasattr(_local, 'tapes'):
        _local.tapes = []
    return _local.tapes

def currentTape():
    """The innermost active tape of the calling thread, if any"""
    stack = _stack()
    return stack[-1] if stack else None


class GradTape(object):
    """An ordered record of primitive operations and the closures computing
    their vector-Jacobian products

    A tape belongs to the thread that entered it.

    """
    def __init__(self):
        super(GradTape, self).__init__()
        self.__entries = []
        self.__leaves = []
        self.__leaf_ids = set()

    entries = property(lambda self: tuple(self.__entries))
    leaves = property(lambda self: tuple(self.__leaves))

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        _stack().pop()
        return None

    def __len__(self):
        return len(self.__entries)

    def tracks(self, tensor):
        if tensor._tape is self:
            return True
        return tensor.requires_grad and tensor._tape is None

    def record(self, name, inputs, output, vjp):
        for tensor in inputs:
            if tensor.requires_grad and tensor._tape is None and \
               id(tensor) not in self.__leaf_ids:
                self.__leaf_ids.add(id(tensor))
                self.__leaves.append(tensor)
        output._tape = self
        self.__entries.append((name, inputs, output, vjp))


@contextlib.contextmanager
def suspendTape():
    """Evaluate without recording, whatever tape is active

    >>> x = Tensor([1.], requires_grad=True)
    >>> with GradTape() as tape:
    ...     with suspendTape():
    ...         y = x * x
    >>> len(tape)
    0

    """
    _stack().append(None)
    try:
        yield
    finally:
        _stack().pop()


class Tensor(object):
    """A dense n-dimensional array of 64-bit floats

    :param data:
        :type: array-like
        Values, copied and converted to float64 (row-major)
    :param requires_grad:
        :type: `bool`
        Marks the tensor as a leaf whose gradient `backward` reports

    """
    # Let numpy defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, copy=True):
        super(Tensor, self).__init__()
        if copy:
            self.__data = np.array(data, dtype=np.float64)
        else:
            self.__data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self._tape = None

    data = property(lambda self: self.__data)
    shape = property(lambda self: self.__data.shape)
    size = property(lambda self: self.__data.size)
    ndim = property(lambda self: self.__data.ndim)

    def __repr__(self):
        grad = ', requires_grad=True' if self.requires_grad else ''
        return 'Tensor(%s%s)' % (np.array2string(self.__data, precision=6),
                                 grad)

    def __len__(self):
        return len(self.__data)

    def numpy(self):
        return self.__data.copy()

    def detach(self):
        return Tensor(self.__data, copy=False)

    def item(self):
        if self.__data.size != 1:
            raise ContractError({'op': 'item',
                                 'msg': 'tensor of shape %s is not a scalar' \
                                        % (self.shape,)})
        return float(self.__data.reshape(()))

    __add__ = lambda self, other: add(self, other)
    __radd__ = lambda self, other: add(other, self)
    __sub__ = lambda self, other: sub(self, other)
    __rsub__ = lambda self, other: sub(other, self)
    __mul__ = lambda self, other: mul(self, other)
    __rmul__ = lambda self, other: mul(other, self)
    __matmul__ = lambda self, other: matmul(self, other)
    __rmatmul__ = lambda self, other: matmul(other, self)
    __neg__ = lambda self: mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ContractError({'op': 'div',
                                 'msg': 'only division by constants is '
                                        'differentiable here'})
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def sumSquares(self, axis=None):
        return sumSquares(self, axis)

    def reshape(self, shape):
        return reshape(self, shape)

    def silu(self):
        return silu(self)

    def relu(self):
        return relu(self)


def _asTensor(obj):
    if isinstance(obj, Tensor):
        return obj
    return Tensor(obj, copy=False)

def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad

def _apply(name, inputs, value, vjp):
    out = Tensor(value, copy=False)
    tape = currentTape()
    if tape is not None and any(tape.tracks(t) for t in inputs):
        tape.record(name, inputs, out, vjp)
    return out


# Primitives

def add(a, b):
    a, b = _asTensor(a), _asTensor(b)
    return _apply('add', (a, b), a.data + b.data,
                  lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))

def sub(a, b):
    a, b = _asTensor(a), _asTensor(b)
    return _apply('sub', (a, b), a.data - b.data,
                  lambda g: (_unbroadcast(g, a.shape),
                             _unbroadcast(-g, b.shape)))

def mul(a, b):
    """Elementwise product with numpy broadcasting

    >>> x = Tensor([3.], requires_grad=True)
    >>> with GradTape() as tape:
    ...     root = (x * x).sum()
    >>> backward(root, tape)[x].data
    array([6.])

    """
    a, b = _asTensor(a), _asTensor(b)
    return _apply('mul', (a, b), a.data * b.data,
                  lambda g: (_unbroadcast(g * b.data, a.shape),
                             _unbroadcast(g * a.data, b.shape)))

def matmul(a, b):
    a, b = _asTensor(a), _asTensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ContractError({'op': 'matmul',
                             'msg': 'cannot multiply shapes %s and %s' \
                                    % (a.shape, b.shape)})
    return _apply('matmul', (a, b), a.data @ b.data,
                  lambda g: (g @ b.data.T, a.data.T @ g))

def affine(x, weight, bias):
    """The affine map ``x @ weight + bias`` over a batch of rows"""
    return add(matmul(x, weight), bias)

def silu(x):
    x = _asTensor(x)
    s = expit(x.data)
    return _apply('silu', (x,), x.data * s,
                  lambda g: (g * s * (1.0 + x.data * (1.0 - s)),))

def relu(x):
    x = _asTensor(x)
    return _apply('relu', (x,), np.maximum(x.data, 0.0),
                  lambda g: (g * (x.data > 0.0),))

def _expand(g, shape, axis, keepdims):
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape).copy()

def tsum(x, axis=None, keepdims=False):
    x = _asTensor(x)
    return _apply('sum', (x,), np.sum(x.data, axis=axis, keepdims=keepdims),
                  lambda g: (_expand(g, x.shape, axis, keepdims),))

def mean(x, axis=None, keepdims=False):
    x = _asTensor(x)
    count = x.size if axis is None else \
            int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return _apply('mean', (x,),
                  np.mean(x.data, axis=axis, keepdims=keepdims),
                  lambda g: (_expand(g, x.shape, axis, keepdims) / count,))

def sumSquares(x, axis=None):
    """Squared L2 norm, over everything or along `axis`"""
    x = _asTensor(x)
    return _apply('sumSquares', (x,), np.sum(x.data * x.data, axis=axis),
                  lambda g: (2.0 * x.data * _expand(g, x.shape, axis, False),))

def concat(tensors, axis=-1):
    tensors = tuple(_asTensor(t) for t in tensors)
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _apply('concat', tensors,
                  np.concatenate([t.data for t in tensors], axis=axis),
                  lambda g: tuple(np.split(g, sizes, axis=axis)))

def reshape(x, shape):
    x = _asTensor(x)
    return _apply('reshape', (x,), x.data.reshape(shape),
                  lambda g: (g.reshape(x.shape),))


def backward(root, tape):
    """Replay `tape` backward from the scalar `root`

    :param root:
        :type: `Tensor`
        A scalar produced by operations recorded on `tape`
    :param tape:
        :type: `GradTape`

    :returns:
        A dict mapping every ``requires_grad`` leaf seen by the tape to its
        gradient `Tensor` (zeros when the root does not depend on it)

    :raises:
        `ContractError`
            If `root` is not a scalar

    >>> x = Tensor([1., 2.], requires_grad=True)
    >>> with GradTape() as tape:
    ...     root = x.sum()
    ...     unused = Tensor([0.], requires_grad=True) * 2.0
    >>> sorted(g.shape for g in backward(root, tape).values())
    [(1,), (2,)]
    >>> backward(x, tape)
    Traceback (most recent call last):
        ...
    dikl.errors.ContractError: backward: root of shape (2,) is not a scalar

    """
    if root.size != 1:
        raise ContractError({'op': 'backward',
                             'msg': 'root of shape %s is not a scalar' \
                                    % (root.shape,)})
    grads = {}
    if root._tape is tape:
        grads[id(root)] = np.ones_like(root.data)
    for name, inputs, output, vjp in reversed(tape.entries):
        g = grads.pop(id(output), None)
        if g is None:
            continue
        for tensor, gin in zip(inputs, vjp(g)):
            if gin is None or not tape.tracks(tensor):
                continue
            key = id(tensor)
            grads[key] = grads[key] + gin if key in grads else gin
    return dict((leaf, Tensor(grads.get(id(leaf), np.zeros(leaf.shape)),
                              copy=False))
                for leaf in tape.leaves)


class RngStream(object):
    """A counter-based random stream

    Draw number `counter` of stream `id` under master `seed` is a Philox
    block keyed by (seed, id) with the counter in the high word, so any
    draw can be reproduced from the triple alone and streams with distinct
    ids never overlap.

    >>> a, b = RngStream(7, 1), RngStream(7, 1)
    >>> bool((a.normal(3) == b.normal(3)).all())
    True
    >>> a.counter
    1

    """
    __LIMIT = 2 ** 64

    def __init__(self, seed, id=0, counter=0):
        super(RngStream, self).__init__()
        for name, value in (('seed', seed), ('id', id), ('counter', counter)):
            if not (isinstance(value, (int, np.integer)) and \
                    0 <= value < self.__LIMIT):
                raise TypeError("'%s' argument must be an int in [0, 2**64)" \
                                % name)
        self.__seed = int(seed)
        self.__id = int(id)
        self.__counter = int(counter)

    seed = property(lambda self: self.__seed)
    id = property(lambda self: self.__id)
    counter = property(lambda self: self.__counter)

    def __repr__(self):
        return 'RngStream(seed=%d, id=%d, counter=%d)' % \
               (self.__seed, self.__id, self.__counter)

    def copy(self):
        return RngStream(self.__seed, self.__id, self.__counter)

    def generator(self):
        """A numpy Generator positioned at the current counter, which then
        advances by one"""
        bitgen = np.random.Philox(key=(self.__id << 64) | self.__seed,
                                  counter=self.__counter << 192)
        self.__counter += 1
        return np.random.Generator(bitgen)

    def derive(self, sub):
        """An independent child stream, a pure function of (seed, id, sub)"""
        seq = np.random.SeedSequence(entropy=[self.__seed, self.__id],
                                     spawn_key=(int(sub),))
        return RngStream(self.__seed,
                         int(seq.generate_state(1, dtype=np.uint64)[0]))

    def normal(self, shape):
        return self.generator().standard_normal(shape)

    def uniform(self, shape):
        return self.generator().random(shape)

    def integers(self, low, high, size=None):
        """Integers in [low, high]"""
        return self.generator().integers(low, high, size=size, endpoint=True)


def gaussian(stream, shape):
    """I.i.d. standard normal entries drawn from `stream`

    >>> gaussian(RngStream(0, 3), (2, 3)).shape
    (2, 3)

    """
    return Tensor(stream.normal(shape), copy=False)


class AdamState(object):
    """Moment accumulators and hyper-parameters of Adam

    :param shapes:
        :type: `iterable of tuple`
        Shapes of the optimized parameters, in order

    """
    def __init__(self, shapes, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 step=0, m=None, v=None):
        super(AdamState, self).__init__()
        self.shapes = [tuple(s) for s in shapes]
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step = int(step)
        self.m = [np.zeros(s) for s in self.shapes] if m is None else m
        self.v = [np.zeros(s) for s in self.shapes] if v is None else v

    @classmethod
    def forParameters(cls, params, **kwargs):
        return cls([p.shape for p in params], **kwargs)

    def copy(self):
        return AdamState(self.shapes, self.lr, self.beta1, self.beta2, self.eps,
                         self.step, [m.copy() for m in self.m],
                         [v.copy() for v in self.v])


def _values(tensors):
    return [t.data if isinstance(t, Tensor) else np.asarray(t, np.float64)
            for t in tensors]

def adamStep(params, grads, state):
    """One bias-corrected Adam update

    :returns:
        ``(params, state)``, new leaf tensors and a new `AdamState`; the
        inputs are left untouched

    >>> p = [Tensor([1., -1.], requires_grad=True)]
    >>> state = AdamState.forParameters(p, lr=0.1, eps=0.0)
    >>> new, state = adamStep(p, [np.array([3., -0.5])], state)
    >>> new[0].data - p[0].data
    array([-0.1,  0.1])
    >>> state.step
    1

    """
    values, gvalues = _values(params), _values(grads)
    if len(values) != len(gvalues) or len(values) != len(state.shapes) or \
       any(p.shape != g.shape or p.shape != s
           for p, g, s in zip(values, gvalues, state.shapes)):
        raise ContractError({'op': 'adamStep',
                             'msg': 'parameter, gradient and state shapes '
                                    'disagree'})
    new = state.copy()
    new.step += 1
    c1 = 1.0 - new.beta1 ** new.step
    c2 = 1.0 - new.beta2 ** new.step
    out = []
    for i, (p, g) in enumerate(zip(values, gvalues)):
        new.m[i] = new.beta1 * new.m[i] + (1.0 - new.beta1) * g
        new.v[i] = new.beta2 * new.v[i] + (1.0 - new.beta2) * g * g
        denom = np.sqrt(new.v[i] / c2) + new.eps
        update = np.divide(new.m[i] / c1, denom, out=np.zeros_like(p),
                           where=denom > 0)
        out.append(Tensor(p - new.lr * update, requires_grad=True, copy=False))
    return out, new


def globalNorm(grads):
    return float(np.sqrt(sum(np.sum(g * g) for g in _values(grads))))

def clipGradNorm(grads, max_norm):
    """Rescale gradients whose global L2 norm exceeds `max_norm`

    Gradients within the bound (plus rounding slack, so clipping twice
    changes nothing) are returned as given.

    >>> g = clipGradNorm([np.array([12., 16.])], 10.0)
    >>> g[0]
    array([6., 8.])
    >>> clipGradNorm(g, 10.0)[0] is g[0]
    True

    """
    if not max_norm > 0:
        raise ContractError({'op': 'clipGradNorm',
                             'msg': "'max_norm' must be > 0"})
    norm = globalNorm(grads)
    if norm <= max_norm * (1.0 + 1e-12):
        return list(grads)
    scale = max_norm / norm
    return [Tensor(g.data * scale, copy=False) if isinstance(g, Tensor) \
            else np.asarray(g) * scale for g in grads]
