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


import platform as _platform

import numpy
import scipy

try:
    import tomllib as toml
except ImportError:
    import tomli as toml


def describe():
    """Versions and host information recorded in every run's metadata

    >>> sorted(describe())
    ['dikl', 'machine', 'numpy', 'python', 'scipy', 'system']

    """
    from . import __version__
    return {'dikl': __version__,
            'python': _platform.python_version(),
            'numpy': numpy.__version__,
            'scipy': scipy.__version__,
            'system': _platform.system(),
            'machine': _platform.machine()}
