"""Session-scoped scenario runs shared across test modules.

The two attack runs cost seconds of wall clock each, so every module that
needs a finished run (scenario behavior, evidence packaging, acceptance)
reuses these single executions rather than re-running the simulator.
"""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the refdissect helper

from railrange.evidence import package_dataset
from railrange.scenario import execute, get_builtin


@pytest.fixture(scope="session")
def as1_run():
    return execute(get_builtin("as1"))


@pytest.fixture(scope="session")
def as2_run():
    return execute(get_builtin("as2"))


@pytest.fixture(scope="session")
def benign_run():
    return execute(get_builtin("benign"))


@pytest.fixture(scope="session")
def as1_bundle(as1_run, tmp_path_factory):
    return package_dataset(as1_run, tmp_path_factory.mktemp("ds-as1"))


@pytest.fixture(scope="session")
def as2_bundle(as2_run, tmp_path_factory):
    return package_dataset(as2_run, tmp_path_factory.mktemp("ds-as2"))


@pytest.fixture(scope="session")
def benign_bundle(benign_run, tmp_path_factory):
    return package_dataset(benign_run, tmp_path_factory.mktemp("ds-benign"))
