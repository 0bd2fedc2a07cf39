"""
Event-driven execution of a TaskGraph on homogeneous processors
"""

from typing import Dict, List, Optional, Sequence, Set

import numpy as np
import structlog

from .cholesky_dag import TaskGraph
from .errors import IllegalActionError
from .models import Assignment

logger = structlog.get_logger()


class Simulator:
    """
    Cluster state: clock, processor slots and the task lifecycle sets

    Tasks move pending -> available -> running -> done. The virtual sink is never
    started; it becomes done as soon as its last predecessor finishes.
    """

    def __init__(self, graph: TaskGraph, processors: int, duration_noise: float = 0.0, seed: int = 0):
        if processors < 1:
            raise ValueError("processors must be >= 1")
        self.graph = graph
        self.processors = processors

        if duration_noise > 0:
            rng = np.random.default_rng(seed)
            factors = rng.lognormal(mean=0.0, sigma=duration_noise, size=len(graph))
            self.durations = graph.duration * factors
        else:
            self.durations = graph.duration.copy()

        self.reset()

    def reset(self) -> None:
        self.clock = 0.0
        self.slots: List[Optional[int]] = [None] * self.processors
        self.finish_times: Dict[int, float] = {}
        self._missing_preds = np.array([len(p) for p in self.graph.predecessors], dtype=np.int64)

        self.pending: Set[int] = set(range(len(self.graph)))
        self.available: Set[int] = set()
        self.running: Set[int] = set()
        self.done: Set[int] = set()
        self.assignments: List[Assignment] = []

        for task in self.graph.real_tasks:
            if self._missing_preds[task] == 0:
                self.pending.discard(task)
                self.available.add(task)

    @property
    def free_processors(self) -> List[int]:
        return [i for i, slot in enumerate(self.slots) if slot is None]

    @property
    def finished(self) -> bool:
        return self.graph.sink in self.done

    def sorted_available(self) -> List[int]:
        return sorted(self.available)

    def start(self, task: int) -> Assignment:
        """Place an available task on the lowest-index free processor"""
        if task not in self.available:
            raise IllegalActionError(f"Task {task} is not available")
        free = self.free_processors
        if not free:
            raise IllegalActionError("No free processor")

        processor = free[0]
        finish = self.clock + float(self.durations[task])
        self.available.discard(task)
        self.running.add(task)
        self.slots[processor] = task
        self.finish_times[task] = finish

        assignment = Assignment(
            task=task,
            label=self.graph.tasks[task].label,
            processor=processor,
            start=self.clock,
            finish=finish,
        )
        self.assignments.append(assignment)
        return assignment

    def advance(self) -> List[int]:
        """Jump to the earliest finish time and retire every task ending then"""
        if not self.running:
            raise IllegalActionError("Cannot advance time with no running task")

        next_event = min(self.finish_times[t] for t in self.running)
        self.clock = next_event
        completed = sorted(t for t in self.running if self.finish_times[t] <= next_event)

        for task in completed:
            self.running.discard(task)
            self.done.add(task)
            self.slots[self.slots.index(task)] = None
            for succ in self.graph.successors[task]:
                self._missing_preds[succ] -= 1
                if self._missing_preds[succ] == 0:
                    self.pending.discard(succ)
                    if succ == self.graph.sink:
                        self.done.add(succ)
                    else:
                        self.available.add(succ)
        return completed

    def makespan(self) -> float:
        return max((a.finish for a in self.assignments), default=0.0)


def validate_schedule(graph: TaskGraph, assignments: Sequence[Assignment], processors: int) -> List[str]:
    """
    Check a finished schedule

    Returns:
        Human-readable violations; empty when the schedule is valid
    """
    problems: List[str] = []
    by_task: Dict[int, Assignment] = {}
    for a in assignments:
        if a.task in by_task:
            problems.append(f"{a.label} executed more than once")
        by_task[a.task] = a
        if not 0 <= a.processor < processors:
            problems.append(f"{a.label} placed on unknown processor {a.processor}")

    for task in graph.real_tasks:
        if task not in by_task:
            problems.append(f"{graph.tasks[task].label} never executed")

    for src, dst in graph.edges:
        if src in by_task and dst in by_task and by_task[dst].start < by_task[src].finish:
            problems.append(f"{by_task[dst].label} starts before {by_task[src].label} finishes")

    per_processor: Dict[int, List[Assignment]] = {}
    for a in assignments:
        per_processor.setdefault(a.processor, []).append(a)
    for proc, items in per_processor.items():
        items.sort(key=lambda a: a.start)
        for prev, cur in zip(items, items[1:]):
            if cur.start < prev.finish:
                problems.append(f"processor {proc} runs {prev.label} and {cur.label} simultaneously")

    return problems


def work_conserving_violations(graph: TaskGraph, assignments: Sequence[Assignment], processors: int) -> List[str]:
    """Report tasks that waited while some processor sat idle"""
    by_task = {a.task: a for a in assignments}
    breakpoints = sorted({a.start for a in assignments} | {a.finish for a in assignments})
    problems: List[str] = []

    for a in assignments:
        preds = graph.predecessors[a.task]
        ready = max((by_task[p].finish for p in preds if p in by_task), default=0.0)
        if a.start <= ready:
            continue
        for t in breakpoints:
            if t < ready or t >= a.start:
                continue
            busy = sum(1 for b in assignments if b.start <= t < b.finish)
            if busy < processors:
                problems.append(f"{a.label} ready at {ready} but a processor idles at {t}")
                break
    return problems
