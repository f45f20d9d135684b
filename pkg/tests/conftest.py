import numpy as np
import pytest

from artikit.ingest import ProceduralSpec, canonicalize, gen_procedural, procedural_dataset, voxelize


@pytest.fixture(scope="session")
def cabinet():
    return canonicalize(gen_procedural(1, ProceduralSpec("cabinet", 2, 0)))


@pytest.fixture(scope="session")
def cabinet_grid(cabinet):
    return voxelize(cabinet, 16)


@pytest.fixture(scope="session")
def drawer_grid():
    return voxelize(canonicalize(gen_procedural(3, ProceduralSpec("cabinet", 1, 0))), 12)


@pytest.fixture(scope="session")
def small_dataset():
    return procedural_dataset(7, 6, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config._criteria = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    detail = dict(item.user_properties).get("detail", "")
    item.config._criteria[mark.args[0]] = (call.excinfo is None, item.name, detail)


def pytest_terminal_summary(terminalreporter, config):
    results = getattr(config, "_criteria", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, name, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
