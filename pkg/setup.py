#!/usr/bin/env python
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


"""Setup script for the dikl module distribution."""

import os
import re

from setuptools import find_packages, setup

# Package meta-data.
NAME = 'dikl'
DESCRIPTION = 'One-step neural samplers for unnormalized densities, ' \
              'trained with the diffusive KL divergence.'
URL = ''
REQUIRED = [
    'numpy>=1.22',
    'scipy>=1.9',
    'tomli>=1.1; python_version < "3.11"',
]
ROOT = os.path.abspath(os.path.dirname(__file__))
LONG_DESCRIPTION = ''
with open(os.path.join(ROOT, 'README.org'), 'r') as f:
    LONG_DESCRIPTION = os.linesep + f.read()

# Read without importing, the package needs numpy
with open(os.path.join(ROOT, NAME, '__init__.py'), 'r') as f:
    VERSION = re.search(r"^__version__ = '([^']+)'", f.read(), re.M).group(1)

setup(
    name=NAME,
    version=VERSION,
    description=DESCRIPTION,
    long_description=LONG_DESCRIPTION,
    author='The Dikl developers',
    url=URL,
    license='GPLv3+',
    packages=find_packages(exclude=('tests',)),
    install_requires=REQUIRED,
    python_requires='>=3.8',
    include_package_data=True,
    package_data={NAME: ['presets/*.toml']},
    entry_points={'console_scripts': ['dikl=dikl.cli:main']},
    classifiers=[
        # Trove classifiers
        # Full list: https://pypi.python.org/pypi?%3Aaction=list_classifiers
        'License :: OSI Approved :: GNU General Public License v3 or later (GPLv3+)',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12',
        'Programming Language :: Python :: Implementation :: CPython',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    test_suite='tests.suite',
)
