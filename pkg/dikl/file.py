#-*- coding: utf-8 -*-

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

"""On-disk formats

Parameter checkpoints are a JSON manifest ``<name>.json`` listing
``{name, shape, offset}`` per tensor plus one blob ``<name>.bin`` of
little-endian float64 values. Sample dumps are a raw little-endian float64
``<name>.bin`` with a JSON sidecar ``<name>.json`` holding
``{dim, count, kind}``. Every write goes to a temporary file in the target
directory and is renamed into place.
"""

import os
import csv
import json
import tempfile
import contextlib
from collections import OrderedDict

import numpy as np

from .errors import ContractError


FORMAT = 'dikl-checkpoint-1'
DTYPE = np.dtype('<f8')


def _stem(path):
    root, ext = os.path.splitext(path)
    return root if ext in ('.json', '.bin') else path


@contextlib.contextmanager
def atomicWrite(path, mode='w'):
    """Open a temporary sibling of `path`, renamed onto it on success"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix='.' + os.path.basename(path) + '-',
                               dir=directory)
    try:
        with os.fdopen(fd, mode) as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def writeJson(path, obj):
    with atomicWrite(path) as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write(os.linesep)

def readJson(path):
    with open(path, 'r') as f:
        return json.load(f)


def saveParameters(path, named, metadata=None):
    """Write a checkpoint

    :param path:
        :type: `str`
        Checkpoint stem; ``.json`` and ``.bin`` are appended
    :param named:
        :type: `iterable of (str, array)`
        Tensors in order
    :param metadata:
        :type: `dict`
        Extra JSON-able record (architecture, config, ...)

    :returns:
        The manifest path

    """
    stem = _stem(path)
    entries, blobs, offset = [], [], 0
    for name, value in named:
        value = np.ascontiguousarray(value, dtype=DTYPE)
        entries.append({'name': name, 'shape': list(value.shape),
                        'offset': offset})
        blobs.append(value.tobytes())
        offset += value.size
    with atomicWrite(stem + '.bin', 'wb') as f:
        for blob in blobs:
            f.write(blob)
    writeJson(stem + '.json', {'format': FORMAT,
                               'blob': os.path.basename(stem) + '.bin',
                               'tensors': entries,
                               'metadata': metadata or {}})
    return stem + '.json'


def loadParameters(path):
    """Read a checkpoint written by `saveParameters`, bit for bit

    :returns:
        ``(tensors, metadata)`` with `tensors` an `OrderedDict` name -> array

    :raises:
        `ContractError`
            If the manifest or the blob is malformed

    """
    stem = _stem(path)
    try:
        manifest = readJson(stem + '.json')
        if manifest.get('format') != FORMAT:
            raise ValueError('unknown format %r' % manifest.get('format'))
        blob = np.fromfile(os.path.join(os.path.dirname(stem + '.json'),
                                        manifest['blob']), dtype=DTYPE)
        tensors = OrderedDict()
        for entry in manifest['tensors']:
            size = int(np.prod(entry['shape'], dtype=np.int64))
            start = int(entry['offset'])
            if start + size > blob.size:
                raise ValueError("tensor '%s' runs past the blob end" \
                                 % entry['name'])
            tensors[entry['name']] = \
                blob[start:start + size].astype(np.float64) \
                                        .reshape(entry['shape'])
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise ContractError({'op': 'loadParameters',
                             'msg': 'corrupt checkpoint %s: %s' % (stem, e)})
    return tensors, manifest.get('metadata', {})


def writeSamples(path, samples, kind):
    """Dump a (count, dim) sample batch with its sidecar

    >>> import tempfile, os
    >>> d = tempfile.mkdtemp()
    >>> writeSamples(os.path.join(d, 'x'), np.zeros((0, 2)), 'mog')['count']
    0

    """
    stem = _stem(path)
    samples = np.ascontiguousarray(samples, dtype=DTYPE)
    if samples.ndim != 2:
        raise ContractError({'op': 'writeSamples',
                             'msg': 'samples must be a (count, dim) array'})
    with atomicWrite(stem + '.bin', 'wb') as f:
        f.write(samples.tobytes())
    sidecar = {'dim': int(samples.shape[1]), 'count': int(samples.shape[0]),
               'kind': kind}
    writeJson(stem + '.json', sidecar)
    return sidecar

def readSamples(path):
    stem = _stem(path)
    try:
        sidecar = readJson(stem + '.json')
        data = np.fromfile(stem + '.bin', dtype=DTYPE)
        data = data.astype(np.float64).reshape(sidecar['count'],
                                               sidecar['dim'])
    except (OSError, ValueError, KeyError) as e:
        raise ContractError({'op': 'readSamples',
                             'msg': 'corrupt sample dump %s: %s' % (stem, e)})
    return data, sidecar


class CsvRecords(object):
    """A CSV sink for metric rows

    :param backend:
        :type: `str`, `int` or file-like
        A path, a file descriptor or an object with `write`, `flush` and
        `close`
    :param fields:
        :type: `iterable of str`
        Column names, written once as the header

    >>> import io
    >>> out = io.StringIO()
    >>> with CsvRecords(out, ['iteration', 'loss']) as records:
    ...     records.write([{'iteration': 1, 'loss': 0.5}])
    ...     print(out.getvalue().split())
    ['iteration,loss', '1,0.5']

    """
    def __init__(self, backend, fields, mode='w'):
        super(CsvRecords, self).__init__()
        if isinstance(backend, str):
            self.__backend = open(backend, mode=mode, newline='')
        elif isinstance(backend, int):
            self.__backend = os.fdopen(backend, mode=mode, newline='')
        elif not (hasattr(backend, 'write') and \
                  hasattr(backend, 'flush') and \
                  hasattr(backend, 'close')):
            raise TypeError("'backend' argument must be a file-like object, "
                            "given {}".format(backend))
        else:
            self.__backend = backend
        self.__owned = isinstance(backend, (str, int))
        self.__fields = list(fields)
        self.__writer = csv.DictWriter(self.__backend, self.__fields,
                                       extrasaction='ignore',
                                       lineterminator='\n')
        self.__writer.writeheader()

    fields = property(lambda self: list(self.__fields))

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.close()
        return None

    def write(self, rows):
        for row in rows:
            self.__writer.writerow(row)
        self.__backend.flush()

    def close(self):
        if self.__owned:
            self.__backend.close()


def writeMatrixCsv(path, matrix, rows, columns):
    """A labelled matrix: first column holds `rows`, header holds `columns`"""
    with atomicWrite(path) as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow([''] + ['%.17g' % c for c in columns])
        for label, values in zip(rows, matrix):
            writer.writerow(['%.17g' % label] + ['%.17g' % v for v in values])
