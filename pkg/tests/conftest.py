import functools
import sys

import pytest

from wingsched.bench import prepare_coa
from wingsched.greedy import GreedyConfig
from wingsched.workpart import benchmark_config


@functools.lru_cache(maxsize=None)
def _config():
    return benchmark_config()


@functools.lru_cache(maxsize=None)
def coa_context(name: str):
    return prepare_coa(_config(), name, 1.0, GreedyConfig())


@pytest.fixture(scope="session")
def config():
    return _config()


@pytest.fixture(scope="session")
def spec(config):
    return config.spec


@pytest.fixture(scope="session")
def geom(config):
    return config.geometry


@pytest.fixture(scope="session")
def coa1():
    return coa_context("COA1")


@pytest.fixture(scope="session")
def contexts(config):
    return [coa_context(c.name) for c in config.coas]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = [mod.VERDICTS[k] for k in sorted(mod.VERDICTS)] if mod else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
