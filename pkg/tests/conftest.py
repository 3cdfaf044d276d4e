from __future__ import annotations

import pytest

from foodcourt.config import bundled_path, load_config
from foodcourt.domain import build_units, load_roster
from foodcourt.engine import Engine
from foodcourt.runtime import TemplateSet
from foodcourt.scripted import ScriptedBackend, ScriptedPolicy


@pytest.fixture(scope="session")
def templates():
    return TemplateSet()


@pytest.fixture(scope="session")
def policy():
    return ScriptedPolicy.from_file(bundled_path("scripted_policy.yaml"))


@pytest.fixture(scope="session")
def scripted_backend(policy):
    return ScriptedBackend(policy)


@pytest.fixture(scope="session")
def default_config():
    return load_config(bundled_path("default_config.yaml"))


@pytest.fixture(scope="session")
def roster():
    return load_roster(bundled_path("roster.yaml"))


@pytest.fixture(scope="session")
def group_units(roster):
    customers, groups = roster
    return build_units(customers, groups, "group")


def run_scripted(config, log_path, backend, **run_kwargs):
    """Run one scripted simulation to completion; returns (engine, cause)."""
    engine = Engine(config, backend, log_path=log_path)
    cause = engine.run(**run_kwargs)
    return engine, cause


@pytest.fixture(scope="session")
def session_run(tmp_path_factory, default_config, scripted_backend):
    """One full default run shared by read-only tests."""
    log_path = tmp_path_factory.mktemp("session_run") / "run.ndjson"
    cfg = default_config.with_overrides(seed=7)
    engine, cause = run_scripted(cfg, log_path, scripted_backend)
    return engine, cause, log_path
