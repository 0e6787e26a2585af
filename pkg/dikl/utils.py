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


import numbers


VOID = type('VOID', (object,), {})()

def CallableGenerator(gen):
    """Turn a generator into a callable

    :param gen:
        :type: `genexpr`
        The generator to convert

    :returns:
        The `__next__` method of the given generator

    """
    return gen.__next__

def isnumber(obj):
    """Check if an object is a real number (booleans excluded)

    >>> isnumber(1), isnumber(2.5), isnumber(True), isnumber('3')
    (True, True, False, False)

    """
    return isinstance(obj, numbers.Real) and not isinstance(obj, bool)

def ispositive(obj):
    return isnumber(obj) and obj > 0

def iterable(obj):
    """Check if an object is iterable

    :param obj:
        :type: `object`
        The object to check

    :returns:
        ``True`` if `obj` is an iterable, ``False`` otherwise

    """
    return hasattr(obj, '__iter__') or hasattr(obj, '__getitem__')


class NoOp(object):
    """Swallows any method call, used in place of a disabled logger

    >>> NoOp().info('ignored %s', 'message')

    """
    def __getattr__(self, name, default=None):
        return self.noOp

    def noOp(self, *args, **kwargs):
        pass


class Namespace(dict):
    """A dict whose items are reachable as attributes

    Names given as ``__name`` are mangled with the class name, so subclasses
    can stash private state next to their public items.

    >>> ns = Namespace(kind='mog', dim=2)
    >>> ns.kind, ns['dim']
    ('mog', 2)
    >>> ns.seed = 7
    >>> sorted(ns)
    ['dim', 'kind', 'seed']
    >>> ns.missing
    Traceback (most recent call last):
        ...
    AttributeError: Namespace has no attribute missing

    """
    def __init__(self, **kwargs):
        super(Namespace, self).__init__()
        for name, value in kwargs.items():
            if name.startswith('__') and not name.endswith('__'):
                name = '_' + type(self).__name__ + name
            self.__setattr__(name, value)

    def __setattr__(self, name, value):
        self[name] = value

    def __getattr__(self, name):
        if name in self:
            return self[name]
        raise AttributeError("%s has no attribute %s" % \
                             (type(self).__name__, name))
