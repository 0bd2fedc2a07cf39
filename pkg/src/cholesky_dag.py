"""
Task graph of the tiled Cholesky factorization
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import structlog

from .errors import InvalidGraphError
from .models import GraphExport, NodeExport, TaskKind

logger = structlog.get_logger()

TASK_DURATIONS: Dict[TaskKind, float] = {
    TaskKind.POTRF: 11.0,
    TaskKind.SYRK: 2.0,
    TaskKind.TRSM: 8.0,
    TaskKind.GEMM: 3.0,
    TaskKind.VIRTUAL_SINK: 0.0,
}

# Column order of the kind one-hot in node features; the sink maps to all zeros.
KERNEL_ORDER: Tuple[TaskKind, ...] = (TaskKind.POTRF, TaskKind.SYRK, TaskKind.TRSM, TaskKind.GEMM)


@dataclass(frozen=True)
class Task:
    """One kernel invocation, identified by its loop indices"""
    id: int
    kind: TaskKind
    indices: Tuple[int, ...]

    @property
    def label(self) -> str:
        if self.kind is TaskKind.VIRTUAL_SINK:
            return "SINK"
        return f"{self.kind.value}({','.join(str(i) for i in self.indices)})"


class TaskGraph:
    """Immutable DAG of typed tasks with durations and critical-path values"""

    def __init__(
        self,
        tiles: int,
        tasks: Sequence[Task],
        edges: Sequence[Tuple[int, int]],
        durations: Optional[Sequence[float]] = None,
    ):
        self.tiles = tiles
        self.tasks: Tuple[Task, ...] = tuple(tasks)
        self.edges: Tuple[Tuple[int, int], ...] = tuple(edges)

        n = len(self.tasks)
        successors: List[List[int]] = [[] for _ in range(n)]
        predecessors: List[List[int]] = [[] for _ in range(n)]
        for src, dst in self.edges:
            successors[src].append(dst)
            predecessors[dst].append(src)
        self.successors: Tuple[Tuple[int, ...], ...] = tuple(tuple(s) for s in successors)
        self.predecessors: Tuple[Tuple[int, ...], ...] = tuple(tuple(p) for p in predecessors)

        if durations is None:
            durations = [TASK_DURATIONS[t.kind] for t in self.tasks]
        durations = np.array(durations, dtype=np.float64)
        durations.setflags(write=False)
        self.duration = durations

        cp = critical_path_lengths(self.to_networkx(), durations)
        cp.setflags(write=False)
        self.cp_to_sink = cp

        self.sink = n - 1
        self.source = 0
        self.total_work = float(durations.sum())
        self.critical_path = float(cp[self.source])

    def __len__(self) -> int:
        return len(self.tasks)

    def __repr__(self) -> str:
        return f"TaskGraph(tiles={self.tiles}, nodes={len(self)}, edges={len(self.edges)})"

    @property
    def real_tasks(self) -> range:
        """Ids of every schedulable task (the sink is last)"""
        return range(self.sink)

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(t.id for t in self.tasks)
        graph.add_edges_from(self.edges)
        return graph

    @cached_property
    def depth(self) -> int:
        """Number of edges on the longest path, ignoring durations"""
        return nx.dag_longest_path_length(self.to_networkx())

    def lower_bound(self, processors: int) -> float:
        """max(CP, W/p), a lower bound on any makespan with p processors"""
        if processors < 1:
            raise ValueError("processors must be >= 1")
        return max(self.critical_path, self.total_work / processors)

    def to_export(self) -> GraphExport:
        return GraphExport(
            tiles=self.tiles,
            nodes=[
                NodeExport(
                    id=t.id,
                    kind=t.kind,
                    indices=list(t.indices),
                    duration=float(self.duration[t.id]),
                    cp=float(self.cp_to_sink[t.id]),
                )
                for t in self.tasks
            ],
            edges=list(self.edges),
            total_work=self.total_work,
            critical_path=self.critical_path,
        )


def critical_path_lengths(dag: nx.DiGraph, durations: np.ndarray) -> np.ndarray:
    """
    Longest duration-weighted path from every node to a sink, the node included

    Args:
        dag: Directed graph over nodes 0..n-1
        durations: Duration of each node

    Returns:
        Array of cp_to_sink values
    """
    try:
        order = list(nx.topological_sort(dag))
    except nx.NetworkXUnfeasible as e:
        raise InvalidGraphError("Task graph contains a cycle") from e

    cp = np.zeros(len(durations), dtype=np.float64)
    for node in reversed(order):
        tail = max((cp[s] for s in dag.successors(node)), default=0.0)
        cp[node] = durations[node] + tail
    return cp


@lru_cache(maxsize=32)
def generate_cholesky_dag(tiles: int) -> TaskGraph:
    """
    Build the task graph of the tiled Cholesky factorization

    Tasks are numbered in the loop order of the factorization (k-major), and every
    read of a tile depends on the most recent writer of that tile. A zero-duration
    sink closes the graph.

    Args:
        tiles: Number of tiles T per matrix dimension

    Returns:
        The TaskGraph
    """
    if not isinstance(tiles, (int, np.integer)) or tiles < 1:
        raise InvalidGraphError(f"tiles must be a positive integer, got {tiles!r}")
    tiles = int(tiles)

    tasks: List[Task] = []
    edges: Dict[Tuple[int, int], None] = {}
    last_writer: Dict[Tuple[int, int], int] = {}

    def add_task(kind: TaskKind, indices: Tuple[int, ...], reads: Sequence[Tuple[int, int]], writes: Tuple[int, int]) -> None:
        task = Task(id=len(tasks), kind=kind, indices=indices)
        tasks.append(task)
        for tile in reads:
            producer = last_writer.get(tile)
            if producer is not None:
                edges[(producer, task.id)] = None
        last_writer[writes] = task.id

    for k in range(tiles):
        add_task(TaskKind.POTRF, (k,), reads=[(k, k)], writes=(k, k))
        for m in range(k + 1, tiles):
            add_task(TaskKind.TRSM, (k, m), reads=[(k, k), (m, k)], writes=(m, k))
        for n in range(k + 1, tiles):
            add_task(TaskKind.SYRK, (k, n), reads=[(n, k), (n, n)], writes=(n, n))
            for m in range(n + 1, tiles):
                add_task(TaskKind.GEMM, (k, n, m), reads=[(m, k), (n, k), (m, n)], writes=(m, n))

    has_successor = {src for src, _ in edges}
    sink = Task(id=len(tasks), kind=TaskKind.VIRTUAL_SINK, indices=())
    for task in tasks:
        if task.id not in has_successor:
            edges[(task.id, sink.id)] = None
    tasks.append(sink)

    graph = TaskGraph(tiles, tasks, list(edges))
    logger.debug(
        "Cholesky DAG generated",
        tiles=tiles,
        nodes=len(graph),
        edges=len(graph.edges),
        total_work=graph.total_work,
        critical_path=graph.critical_path,
    )
    return graph


def compute_cp_to_sink(graph: TaskGraph) -> np.ndarray:
    """Per-node critical path to the sink, recomputed by a reverse topological sweep"""
    return critical_path_lengths(graph.to_networkx(), graph.duration)


def static_node_counts(graph: TaskGraph) -> np.ndarray:
    """Array of shape (n, 2): direct successor and predecessor counts per node"""
    counts = np.zeros((len(graph), 2), dtype=np.int64)
    for node in range(len(graph)):
        counts[node, 0] = len(graph.successors[node])
        counts[node, 1] = len(graph.predecessors[node])
    return counts


_DOT_COLORS = {
    TaskKind.POTRF: "#e41a1c",
    TaskKind.TRSM: "#377eb8",
    TaskKind.SYRK: "#4daf4a",
    TaskKind.GEMM: "#984ea3",
    TaskKind.VIRTUAL_SINK: "#999999",
}


def export_dot(graph: TaskGraph) -> str:
    """Graphviz source of the DAG, labelled POTRF(k), TRSM(k,m), SYRK(k,n), GEMM(k,n,m)"""
    lines = [f"digraph cholesky_T{graph.tiles} {{"]
    lines.append("  rankdir=TB;")
    lines.append('  node [shape=box, style="rounded,filled", fontname="Helvetica"];')
    for task in graph.tasks:
        shape = ", shape=point" if task.kind is TaskKind.VIRTUAL_SINK else ""
        lines.append(f'  n{task.id} [label="{task.label}", fillcolor="{_DOT_COLORS[task.kind]}"{shape}];')
    for src, dst in graph.edges:
        lines.append(f"  n{src} -> n{dst};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_json(graph: TaskGraph, indent: int = 2) -> str:
    return graph.to_export().model_dump_json(indent=indent)
