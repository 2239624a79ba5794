import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from convsel.harness import GridConfig, generate_shape_grid, run_sweep  # noqa: E402
from convsel.learners import train_decision_tree, train_naive_bayes  # noqa: E402


@pytest.fixture(scope="session")
def grid_shapes():
    return generate_shape_grid(GridConfig())


@pytest.fixture(scope="session")
def synthetic_records(grid_shapes):
    return run_sweep(grid_shapes, synthetic=True)


@pytest.fixture(scope="session")
def grid_xy(synthetic_records):
    X = np.array([r.shape.features() for r in synthetic_records])
    y = np.array([int(r.label) for r in synthetic_records])
    return X, y


@pytest.fixture(scope="session")
def grid_dt(grid_xy):
    return train_decision_tree(*grid_xy, max_depth=12)


@pytest.fixture(scope="session")
def grid_nb(grid_xy):
    return train_naive_bayes(*grid_xy)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one PASS/FAIL line per acceptance criterion at the end of the run
_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = dict(report.user_properties).get("criterion")
    if name is None:
        return
    if report.when == "call" or report.failed:
        prev = _acceptance.get(name, True)
        _acceptance[name] = prev and report.passed


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker:
            item.user_properties.append(("criterion", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in _acceptance.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")
