import pytest

from guardkit import bench
from guardkit.toolbox import (
    build_default_registry,
    load_permission_table,
    load_qa_rules,
    load_rules,
)


@pytest.fixture(scope="session")
def table():
    return load_permission_table()


@pytest.fixture(scope="session")
def rules():
    return load_rules()


@pytest.fixture(scope="session")
def qa():
    return load_qa_rules()


@pytest.fixture(scope="session")
def registry(table, rules, qa):
    return build_default_registry(table, rules, qa)


@pytest.fixture(scope="session")
def access_suite(table):
    return bench.generate_eicu_suite(table, seed=2024)


@pytest.fixture(scope="session")
def rules_suite(rules):
    return bench.generate_mind2web_suite(rules, seed=2024)


@pytest.fixture(scope="session")
def qa_suite(qa):
    return bench.generate_qa_suite(qa, seed=2024)
