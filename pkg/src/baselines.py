"""
Reference list schedulers: ASAP (critical path priority), Greedy (most successors), Random
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
import structlog

from .cholesky_dag import TaskGraph, static_node_counts
from .models import Algorithm, Assignment
from .simulator import Simulator

logger = structlog.get_logger()

Chooser = Callable[[List[int]], int]


@dataclass(frozen=True)
class ScheduleResult:
    """Makespan and full trace of one baseline run"""
    algorithm: Algorithm
    processors: int
    makespan: float
    assignments: Tuple[Assignment, ...]
    seed: Optional[int] = None


def _list_schedule(graph: TaskGraph, processors: int, choose: Chooser) -> Tuple[float, Tuple[Assignment, ...]]:
    """Work-conserving list scheduling on the shared simulator"""
    sim = Simulator(graph, processors)
    while not sim.finished:
        while sim.free_processors and sim.available:
            sim.start(choose(sim.sorted_available()))
        if not sim.finished:
            sim.advance()
    return sim.makespan(), tuple(sim.assignments)


def asap_schedule(graph: TaskGraph, processors: int) -> ScheduleResult:
    """Start the available task farthest from the end; ties go to the lowest id"""
    cp = graph.cp_to_sink

    def choose(available: List[int]) -> int:
        return min(available, key=lambda t: (-cp[t], t))

    makespan, assignments = _list_schedule(graph, processors, choose)
    logger.debug("ASAP schedule finished", tiles=graph.tiles, processors=processors, makespan=makespan)
    return ScheduleResult(Algorithm.ASAP, processors, makespan, assignments)


def greedy_schedule(graph: TaskGraph, processors: int) -> ScheduleResult:
    """Start the available task with the most direct successors; ties go to the lowest id"""
    succ = static_node_counts(graph)[:, 0]

    def choose(available: List[int]) -> int:
        return min(available, key=lambda t: (-succ[t], t))

    makespan, assignments = _list_schedule(graph, processors, choose)
    logger.debug("Greedy schedule finished", tiles=graph.tiles, processors=processors, makespan=makespan)
    return ScheduleResult(Algorithm.GREEDY, processors, makespan, assignments)


def random_schedule(graph: TaskGraph, processors: int, seed: int = 0) -> ScheduleResult:
    """Start a uniformly chosen available task whenever a processor is free"""
    rng = np.random.default_rng(seed)

    def choose(available: List[int]) -> int:
        return available[int(rng.integers(len(available)))]

    makespan, assignments = _list_schedule(graph, processors, choose)
    logger.debug("Random schedule finished", tiles=graph.tiles, processors=processors, seed=seed, makespan=makespan)
    return ScheduleResult(Algorithm.RANDOM, processors, makespan, assignments, seed=seed)


def run_baseline(algorithm: Algorithm, graph: TaskGraph, processors: int, seed: int = 0) -> ScheduleResult:
    algorithm = Algorithm(algorithm)
    if algorithm is Algorithm.ASAP:
        return asap_schedule(graph, processors)
    if algorithm is Algorithm.GREEDY:
        return greedy_schedule(graph, processors)
    return random_schedule(graph, processors, seed)


def asap_makespan(graph: TaskGraph, processors: int) -> float:
    """Baseline duration used to normalize the episode reward"""
    return asap_schedule(graph, processors).makespan
