#!/usr/bin/env python
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


import os
import sys
import glob
import inspect
import doctest
import unittest
import importlib

TESTS_ROOT = os.path.abspath(os.path.dirname(__file__))
ROOT = os.path.dirname(TESTS_ROOT)

if not ROOT in sys.path:
    sys.path.append(ROOT)

from dikl.utils import Namespace

# Long training runs, opt-in
ACCEPTANCE = os.environ.get('DIKL_ACCEPTANCE') == '1'


class TestNamespace(Namespace, unittest.TestSuite):
    """A testsuite where subtests are reachable from attributes

    ex:
       self.posterior : the posterior module test suite
       self.posterior.ChainState : the ChainState class test suite
       self.test_posterior.TestKernels : a unittest case suite
    """
    def __init__(self, rel_path):
        super(TestNamespace, self).__init__(__rel_path=rel_path)

    def __suites(self):
        return ((k, v) for k, v in self.items()
                if isinstance(v, unittest.TestSuite))

    def addTest(self, test):
        prefix_len = len(self.__rel_path)+1
        test_id = test.id()
        test_rel_id = test_id[prefix_len:]
        id_parts = test_rel_id.split('.')
        id_prefix = id_parts[0]
        if id_prefix in self:
            self[id_prefix].addTest(test)
        elif id_prefix == test_rel_id:
            self[id_prefix] = unittest.TestSuite([test])
        else:
            self[id_prefix] = TestNamespace(test_id[:prefix_len+len(id_prefix)])
            self[id_prefix].addTest(test)

    def addTests(self, tests):
        for test in tests:
            if isinstance(test, unittest.TestSuite) and \
               not isinstance(test, TestNamespace):
                self.addTests(test)
            else:
                self.addTest(test)

    def countTestCases(self):
        return sum(v.countTestCases() for k, v in self.__suites())

    def run(self, result):
        for k, v in self.__suites():
            v.run(result)
        return result

    def debug(self):
        for k, v in self.__suites():
            v.debug()


def _modules(package, pattern):
    paths = sorted(glob.iglob(os.path.join(ROOT, package, pattern)))
    for path in paths:
        name = os.path.splitext(os.path.basename(path))[0]
        if name in ('__init__', '__main__'):
            continue
        yield name, importlib.import_module('%s.%s' % (package, name))

def load_tests(loader=None, tests=None, pattern=None):
    loader = unittest.defaultTestLoader if loader is None else loader
    doctests = TestNamespace('dikl')
    for name, mod in _modules('dikl', '*.py'):
        if inspect.getsource(mod).find('>>>') > -1:
            doctests.addTests(doctest.DocTestSuite(module=mod))
    units = TestNamespace('tests')
    for name, mod in _modules('tests', 'test_*.py'):
        units.addTests(loader.loadTestsFromModule(mod))
    return unittest.TestSuite([doctests, units])

suite = load_tests()

if __name__ == '__main__':

    unittest.main()
