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


import re


# Decoder messages carrying a position, tomllib first then json
ERROR_PATTERNS = [
    re.compile(r'(?P<msg>.*?)\s*\(at line (?P<line>[0-9]+), '
               r'column (?P<column>[0-9]+)\)\s*$', re.S),
    re.compile(r'(?P<msg>.*?):\s+line (?P<line>[0-9]+) '
               r'column (?P<column>[0-9]+)', re.S),
]


def parseError(output):
    """Extract the message and position of a config decoder error

    >>> parseError("Invalid value (at line 3, column 9)")['line']
    '3'
    >>> parseError("Expecting ',' delimiter: line 4 column 2 (char 40)")['msg']
    "Expecting ',' delimiter"
    >>> parseError('no position here') is None
    True

    """
    for error_pattern in ERROR_PATTERNS:
        m = re.search(error_pattern, output)
        if m:
            fields = ['msg', 'line', 'column']
            return dict(zip(fields, (m.group(field) for field in fields)))
    return None


class DiklError(Exception):
    """Base class of every error raised by dikl"""

    exit_code = 3

    def __init__(self, error):
        if isinstance(error, str):
            error = {'msg': error}
        super(DiklError, self).__init__(error.get('msg'))
        self.msg = error.get('msg')

    def __str__(self):
        return self.msg


class ContractError(DiklError, ValueError):
    """A precondition of an operation does not hold"""

    def __init__(self, error):
        super(ContractError, self).__init__(error)
        if isinstance(error, dict):
            self.op = error.get('op')
        else:
            self.op = None

    def __str__(self):
        if self.op is not None:
            return '%s: %s' % (self.op, self.msg)
        return self.msg


class ConfigError(DiklError):
    """An invalid run configuration

    >>> str(ConfigError({'msg': 'unknown key', 'key': 'trainer.foo',
    ...                  'line': '12'}))
    'unknown key, line 12\\n\\tKey: trainer.foo'

    """
    exit_code = 2

    def __init__(self, error):
        super(ConfigError, self).__init__(error)
        error = error if isinstance(error, dict) else {}
        self.key = error.get('key')
        self.line = int(error['line']) if error.get('line') else None

    def __str__(self):
        s = self.msg
        if self.line is not None:
            s += ', line %d' % self.line
        if self.key is not None:
            s += '\n\tKey: %s' % self.key
        return s


class UnsupportedMetricError(ConfigError):

    def __init__(self, error):
        super(UnsupportedMetricError, self).__init__(error)
        self.metric = error.get('metric')
        self.kind = error.get('kind')

    def __str__(self):
        return "metric '%s' is not supported for target kind '%s'" % \
               (self.metric, self.kind)


class DegenerateWeightsError(DiklError, ArithmeticError):
    """All importance weights vanished, the noise level is too high for
    the proposal to reach the posterior mass"""

    def __init__(self, error):
        super(DegenerateWeightsError, self).__init__(error)
        self.t = error.get('t') if isinstance(error, dict) else None

    def __str__(self):
        s = self.msg
        if self.t is not None:
            s += ' (noise level t=%d)' % self.t
        return s


class TrainingAbortError(DiklError):
    exit_code = 3

    def __init__(self, error):
        super(TrainingAbortError, self).__init__(error)
        self.iteration = error.get('iteration')
        self.snapshot = error.get('snapshot')

    def __str__(self):
        s = '%s at iteration %s' % (self.msg, self.iteration)
        if self.snapshot is not None:
            s += '\n\tDiagnostic snapshot: %s' % self.snapshot
        return s


class QuadratureError(DiklError, ArithmeticError):

    def __init__(self, error):
        super(QuadratureError, self).__init__(error)
        self.cell = error.get('cell')

    def __str__(self):
        return '%s\n\tCell: %s' % (self.msg, self.cell)


class OracleFailure(DiklError):
    exit_code = 4

    def __init__(self, error):
        super(OracleFailure, self).__init__(error)
        self.failed = list(error.get('failed', ()))

    def __str__(self):
        return '%s\n\tFailing: %s' % (self.msg, ', '.join(self.failed))
