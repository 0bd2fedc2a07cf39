"""
Shared pytest fixtures and the opt-in switch for long training runs
"""

import pytest

from src.cholesky_dag import Task, TaskGraph, generate_cholesky_dag
from src.models import EnvConfig, TaskKind


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long training acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running training acceptance test")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def graph4():
    return generate_cholesky_dag(4)


@pytest.fixture
def graph8():
    return generate_cholesky_dag(8)


@pytest.fixture
def env_config4():
    return EnvConfig(tiles=4, processors=4, window=1)


def make_graph(durations, edges):
    """Small hand-made graph; the last entry of `durations` is the sink"""
    kinds = [TaskKind.GEMM] * (len(durations) - 1) + [TaskKind.VIRTUAL_SINK]
    tasks = [Task(id=i, kind=kind, indices=(i,) if kind is not TaskKind.VIRTUAL_SINK else ()) for i, kind in enumerate(kinds)]
    return TaskGraph(tiles=1, tasks=tasks, edges=edges, durations=durations)


@pytest.fixture
def fork_graph():
    """
    Source 0 (duration 3) feeding 1 (duration 2), 2 (duration 4) and 3 (duration 1)

    Started at clock 3, task 1 finishes at 5 and task 2 at 7.
    """
    return make_graph([3.0, 2.0, 4.0, 1.0, 0.0], [(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4)])


@pytest.fixture
def two_source_graph():
    """Two independent sources; 0 has a long successor, 1 has none"""
    tasks = [
        Task(id=0, kind=TaskKind.POTRF, indices=(0,)),
        Task(id=1, kind=TaskKind.SYRK, indices=(0, 1)),
        Task(id=2, kind=TaskKind.TRSM, indices=(0, 1)),
        Task(id=3, kind=TaskKind.VIRTUAL_SINK, indices=()),
    ]
    return TaskGraph(tiles=1, tasks=tasks, edges=[(0, 2), (1, 3), (2, 3)], durations=[1.0, 1.0, 10.0, 0.0])
