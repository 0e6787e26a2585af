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


import queue
import threading

from .utils import VOID


def LockedGenerator(gen):
    """Turn a generator into a thread-safe one

    :param gen:
        :type: `genexpr`
        The generator to convert

    :returns:
        A new generator that protects the use of the given generator with a lock

    >>> import itertools
    >>> ids = LockedGenerator(itertools.count(1))
    >>> next(ids), next(ids)
    (1, 2)

    """
    lock = threading.RLock()
    def locked():
        it = VOID
        while True:
            with lock:
                it = next(gen)
            yield it
    return locked()


class RowPool(object):
    """Maps a function over independent work items with a fixed number of
    threads, returning results in item order

    Items must not share mutable state (each carries its own random stream),
    so the result does not depend on the thread count. With ``threads=1``
    everything runs on the calling thread.

    :param threads:
        :type: `int`
        Number of worker threads, >= 1

    >>> RowPool(3).map(lambda x: x * x, range(6))
    [0, 1, 4, 9, 16, 25]
    >>> RowPool(1).map(str, [1, 2])
    ['1', '2']

    """
    def __init__(self, threads=1):
        if not (isinstance(threads, int) and threads >= 1):
            raise TypeError("'threads' argument must be an int >= 1")
        self.__threads = threads

    threads = property(lambda self: self.__threads)

    def map(self, fun, items):
        items = list(items)
        if self.__threads == 1 or len(items) < 2:
            return [fun(item) for item in items]
        results = [VOID] * len(items)
        errors = []
        todo = queue.Queue()
        for i, item in enumerate(items):
            todo.put((i, item))
        abort = threading.Event()

        def work():
            while not abort.is_set():
                try:
                    i, item = todo.get_nowait()
                except queue.Empty:
                    return
                try:
                    results[i] = fun(item)
                except BaseException as e:
                    errors.append((i, e))
                    abort.set()

        workers = [threading.Thread(target=work,
                                    name='RowPool-%d' % k, daemon=True)
                   for k in range(min(self.__threads, len(items)))]
        for worker in workers:
            worker.start()
        for worker in workers:
            worker.join()
        if errors:
            # Report the failure of the first item in order
            raise sorted(errors, key=lambda e: e[0])[0][1]
        return results
