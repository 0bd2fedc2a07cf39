"""
Scheduling environment: the simulator exposed as an episodic MDP with window observations
"""

from dataclasses import dataclass
from typing import List, Optional, Set, Tuple, Union

import numpy as np
import structlog

from .baselines import asap_makespan
from .cholesky_dag import KERNEL_ORDER, TaskGraph, generate_cholesky_dag, static_node_counts
from .errors import EpisodeNotFinishedError, IllegalActionError
from .models import DecisionRecord, EnvConfig, EpisodeTrace
from .simulator import Simulator

logger = structlog.get_logger()

# [succ, pred, POTRF, SYRK, TRSM, GEMM, avail, run, cp]
FEATURE_DIM = 9
_KIND_COLUMN = {kind: 2 + i for i, kind in enumerate(KERNEL_ORDER)}
_AVAIL, _RUN, _CP = 6, 7, 8
_CONFIGURED = object()


@dataclass(frozen=True)
class SelectTask:
    """Start the task at this position of the action map"""
    index: int


@dataclass(frozen=True)
class Pass:
    """Wait for the next completion event"""


Action = Union[SelectTask, Pass]


@dataclass(frozen=True)
class Observation:
    """Window sub-DAG around the running and available tasks"""
    node_ids: np.ndarray
    features: np.ndarray
    edges: np.ndarray
    action_map: Tuple[int, ...]
    available_rows: np.ndarray
    pass_allowed: bool
    clock: float = 0.0

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def num_actions(self) -> int:
        """Available tasks plus the pass slot"""
        return len(self.action_map) + 1

    def action_mask(self) -> np.ndarray:
        mask = np.ones(self.num_actions, dtype=bool)
        mask[-1] = self.pass_allowed
        return mask


def _empty_observation(clock: float) -> Observation:
    return Observation(
        node_ids=np.zeros(0, dtype=np.int64),
        features=np.zeros((0, FEATURE_DIM)),
        edges=np.zeros((2, 0), dtype=np.int64),
        action_map=(),
        available_rows=np.zeros(0, dtype=np.int64),
        pass_allowed=False,
        clock=clock,
    )


def window_nodes(sim: Simulator, window: Optional[int]) -> List[int]:
    """Running and available tasks plus their successors up to depth `window`"""
    graph = sim.graph
    frontier: Set[int] = sim.running | sim.available
    included = set(frontier)
    limit = graph.depth if window is None else window

    depth = 0
    while frontier and depth < limit:
        frontier = {
            succ
            for task in frontier
            for succ in graph.successors[task]
            if succ != graph.sink and succ not in included
        }
        included |= frontier
        depth += 1
    return sorted(included)


def extract_observation(
    sim: Simulator,
    window: Optional[int],
    use_cp_feature: bool = True,
    node_counts: Optional[np.ndarray] = None,
) -> Observation:
    """
    Build the observation of the current cluster state

    Args:
        sim: Simulator holding the state
        window: Descendant depth w, None for the full remaining DAG
        use_cp_feature: Whether to fill the critical-path column
        node_counts: Precomputed static successor/predecessor counts

    Returns:
        Observation with node features, message-passing edges and action map
    """
    graph = sim.graph
    if node_counts is None:
        node_counts = static_node_counts(graph)

    node_ids = np.array(window_nodes(sim, window), dtype=np.int64)
    row_of = {int(task): row for row, task in enumerate(node_ids)}

    features = np.zeros((len(node_ids), FEATURE_DIM), dtype=np.float64)
    for row, task in enumerate(node_ids):
        features[row, 0:2] = node_counts[task]
        kind = graph.tasks[task].kind
        if kind in _KIND_COLUMN:
            features[row, _KIND_COLUMN[kind]] = 1.0
        features[row, _AVAIL] = float(task in sim.available)
        features[row, _RUN] = float(task in sim.running)
        if use_cp_feature:
            features[row, _CP] = graph.cp_to_sink[task] / graph.critical_path

    src: List[int] = []
    dst: List[int] = []
    for row, task in enumerate(node_ids):
        src.append(row)
        dst.append(row)
        for succ in graph.successors[task]:
            if succ in row_of:
                src.extend((row, row_of[succ]))
                dst.extend((row_of[succ], row))
    edges = np.array([src, dst], dtype=np.int64).reshape(2, -1)

    action_map = tuple(sim.sorted_available())
    available_rows = np.array([row_of[t] for t in action_map], dtype=np.int64)

    return Observation(
        node_ids=node_ids,
        features=features,
        edges=edges,
        action_map=action_map,
        available_rows=available_rows,
        pass_allowed=bool(sim.running),
        clock=sim.clock,
    )


class SchedulingEnv:
    """
    Episodic scheduling MDP

    The agent acts only at decision points: at least one processor is free and at
    least one task is available. The terminal reward is
    (baseline_makespan - makespan) / baseline_makespan, every other reward is 0.
    """

    def __init__(self, config: EnvConfig, graph: Optional[TaskGraph] = None):
        self._graph_override = graph
        self.config = config
        self.sim: Optional[Simulator] = None
        self.reset(config)

    def reset(self, config: Optional[EnvConfig] = None) -> Observation:
        if config is not None:
            self.config = config
        config = self.config

        self.graph = self._graph_override or generate_cholesky_dag(config.tiles)
        self.node_counts = static_node_counts(self.graph)
        self.baseline_makespan = config.baseline_makespan or asap_makespan(self.graph, config.processors)
        self.sim = Simulator(self.graph, config.processors, config.duration_noise, config.seed)

        self.done = False
        self.steps = 0
        self.decisions: List[DecisionRecord] = []
        self._observation = self.extract_observation()
        return self._observation

    @property
    def observation(self) -> Observation:
        return self._observation

    def extract_observation(self, window=_CONFIGURED) -> Observation:
        """Observation of the current state; `window` defaults to the configured one"""
        if window is _CONFIGURED:
            window = self.config.window
        return extract_observation(self.sim, window, self.config.use_cp_feature, self.node_counts)

    def step(self, action: Action) -> Tuple[Observation, float, bool]:
        """
        Apply one decision

        Returns:
            (next observation, reward, done)
        """
        if self.done:
            raise IllegalActionError("Episode already finished; call reset()")

        obs = self._observation
        record = DecisionRecord(
            clock=self.sim.clock,
            action="pass",
            available=list(obs.action_map),
            assignments=list(self.sim.slots),
        )

        if isinstance(action, SelectTask):
            if not 0 <= action.index < len(obs.action_map):
                raise IllegalActionError(
                    f"Action index {action.index} outside action map of size {len(obs.action_map)}"
                )
            task = obs.action_map[action.index]
            self.sim.start(task)
            record.action = self.graph.tasks[task].label
            record.task = task
            if not (self.sim.free_processors and self.sim.available):
                self._advance()
        elif isinstance(action, Pass):
            if not obs.pass_allowed:
                raise IllegalActionError("Pass is not allowed while every processor is idle")
            self._advance()
        else:
            raise IllegalActionError(f"Unknown action {action!r}")

        self.decisions.append(record)
        self.steps += 1

        reward = 0.0
        if self.sim.finished:
            self.done = True
            makespan = self.sim.clock
            reward = (self.baseline_makespan - makespan) / self.baseline_makespan
            self._observation = _empty_observation(self.sim.clock)
            logger.debug(
                "Episode finished",
                tiles=self.config.tiles,
                processors=self.config.processors,
                makespan=makespan,
                baseline=self.baseline_makespan,
                steps=self.steps,
            )
        else:
            self._observation = self.extract_observation()

        return self._observation, reward, self.done

    def _advance(self) -> None:
        # Skip events that leave nothing to decide.
        self.sim.advance()
        while not self.sim.finished and not self.sim.available:
            self.sim.advance()

    def makespan(self) -> float:
        if not self.done:
            raise EpisodeNotFinishedError("Makespan is only defined once every task is done")
        return self.sim.clock

    def export_trace(self) -> EpisodeTrace:
        return EpisodeTrace(
            config=self.config.model_copy(update={"baseline_makespan": self.baseline_makespan}),
            decisions=list(self.decisions),
            schedule=list(self.sim.assignments),
            makespan=self.sim.clock if self.done else None,
        )
