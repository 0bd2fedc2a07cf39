"""
Scheduling service behind the HTTP API
"""

import asyncio
from typing import Dict, Sequence

import structlog

from .baselines import run_baseline
from .cholesky_dag import TaskGraph, generate_cholesky_dag
from .config import Settings
from .errors import InvalidGraphError
from .models import DagRequest, DagResponse, ScheduleRequest, ScheduleResponse

logger = structlog.get_logger()


class ScheduleService:
    """Builds Cholesky DAGs and runs baseline schedulers on them"""

    def __init__(self, settings: Settings):
        self.settings = settings
        self.graphs: Dict[int, TaskGraph] = {}

    async def initialize(self, warm_tiles: Sequence[int] = (4, 8, 16)):
        """Pre-build the DAGs used by the reference experiments"""
        logger.info("Initializing schedule service", warm_tiles=list(warm_tiles))
        for tiles in warm_tiles:
            if tiles <= self.settings.max_api_tiles:
                await self.graph(tiles)
        logger.info("Schedule service initialized", cached_graphs=len(self.graphs))

    async def cleanup(self):
        self.graphs.clear()

    async def graph(self, tiles: int) -> TaskGraph:
        if tiles > self.settings.max_api_tiles:
            raise InvalidGraphError(f"tiles={tiles} exceeds the limit of {self.settings.max_api_tiles}")
        if tiles not in self.graphs:
            self.graphs[tiles] = await asyncio.to_thread(generate_cholesky_dag, tiles)
        return self.graphs[tiles]

    async def describe(self, request: DagRequest) -> DagResponse:
        graph = await self.graph(request.tiles)
        return DagResponse(
            tiles=graph.tiles,
            nodes=len(graph),
            edges=len(graph.edges),
            total_work=graph.total_work,
            critical_path=graph.critical_path,
            graph=graph.to_export() if request.include_graph else None,
        )

    async def schedule(self, request: ScheduleRequest) -> ScheduleResponse:
        """
        Run one baseline scheduler

        Args:
            request: Instance, algorithm and seed

        Returns:
            ScheduleResponse with makespan and lower bound
        """
        graph = await self.graph(request.tiles)
        result = await asyncio.to_thread(run_baseline, request.algorithm, graph, request.processors, request.seed)
        return ScheduleResponse(
            algorithm=request.algorithm,
            tiles=request.tiles,
            processors=request.processors,
            seed=request.seed,
            makespan=result.makespan,
            lower_bound=graph.lower_bound(request.processors),
            critical_path=graph.critical_path,
            total_work=graph.total_work,
            schedule=list(result.assignments) if request.include_schedule else [],
        )
