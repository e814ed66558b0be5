# pytest collection wiring for boxrelax_tests.
#
# The suite is written for its own runner (boxrelax_tests/run.py). This file
# only lets pytest discover the same testsets: each BaseTestSet subclass in
# boxrelax_tests/testsets/*_tests.py becomes one pytest item, executed by
# testlib.run_testset exactly as run.py does (quick scale unless
# BOXRELAX_TEST_SCALE says otherwise; unmet requirements are reported as
# skips).

import inspect
import os
import sys

import pytest

ROOT_DIR = os.path.dirname(os.path.abspath(__file__))
TESTS_DIR = os.path.join(ROOT_DIR, 'boxrelax_tests')
TESTSETS_DIR = os.path.join(TESTS_DIR, 'testsets')

if TESTS_DIR not in sys.path:
    sys.path.insert(0, TESTS_DIR)

import testlib  # noqa: E402

sys.path.append(testlib.get_pylib_dir())

from boxrelax import util as boxrelax_util  # noqa: E402

# testlib prints with show_time=..., which only run.py's print override
# accepts
import run as boxrelax_run  # noqa: E402

SCALE = os.environ.get('BOXRELAX_TEST_SCALE', 'quick')
SEED = os.environ.get('BOXRELAX_TEST_SEED', 'pytest')

_env = None


def _get_env():
    global _env
    if _env is None:
        _env = testlib.TestEnvironment(SCALE)
    return _env


def pytest_configure(config):
    boxrelax_util.config['report_time'] = False
    testlib.config['report_time'] = False
    testlib.config['colors'] = False
    boxrelax_util.config['colors'] = False
    boxrelax_run.override_print()


def pytest_unconfigure(config):
    boxrelax_run.restore_print()
    if _env is not None:
        _env.teardown()


def pytest_collect_file(parent, file_path):
    if file_path.suffix == '.py' and file_path.name.endswith('_tests.py') \
            and os.path.normpath(str(file_path.parent)) == \
            os.path.normpath(TESTSETS_DIR):
        return TestsetModule.from_parent(parent, path=file_path)
    return None


class TestsetModule(pytest.File):
    def collect(self):
        import importlib
        module = importlib.import_module(f'testsets.{self.path.stem}')
        for name, cls in inspect.getmembers(module, inspect.isclass):
            if cls is testlib.BaseTestSet or \
                    not issubclass(cls, testlib.BaseTestSet) or \
                    cls.__module__ != module.__name__:
                continue
            tests = sorted(t for t in dir(cls) if t.endswith('_test'))
            if tests:
                yield TestsetItem.from_parent(self, name=name, testset_class=cls,
                                              tests=tests)


class TestsetFailed(Exception):
    pass


class TestsetItem(pytest.Item):
    def __init__(self, *, testset_class, tests, **kwargs):
        super().__init__(**kwargs)
        self.cls = testset_class
        self.tests = tests

    def runtest(self):
        env = _get_env()
        requirements = self.cls.requirements()
        unmet = requirements.get_unmet_requirements(env)
        if unmet:
            pytest.skip(str(testlib.UnmetRequirementsError(unmet)))
        testset = {'name': f'{self.name}/{requirements}',
                   'class': self.cls,
                   'test_name_list': [{'name': n, 'iter': 0}
                                      for n in self.tests],
                   'requirements': requirements,
                   'iter': 0,
                   '#': 1}
        executed, errors, not_ran = testlib.run_testset(testset, env, 1,
                                                        seed=SEED)
        if errors:
            raise TestsetFailed('\n'.join(f'{name} failed: {err}'
                                          for name, err in errors))
        if not_ran:
            pytest.skip('; '.join(f'{name}: {reason}'
                                  for name, reason in not_ran))

    def repr_failure(self, excinfo):
        if isinstance(excinfo.value, TestsetFailed):
            return str(excinfo.value)
        return super().repr_failure(excinfo)

    def reportinfo(self):
        return self.path, None, f'{self.parent.path.stem}::{self.name}'
