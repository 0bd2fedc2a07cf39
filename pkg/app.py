"""
Cholesky DAG Scheduling Lab API
FastAPI front end for DAG generation and baseline scheduling
"""

import time
from typing import List, Optional
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, Depends
import structlog

from src.config import configure_logging, get_settings
from src.errors import SchedLabError
from src.middleware import TimingMiddleware, new_stats_table
from src.models import Algorithm, DagRequest, DagResponse, ScheduleRequest, ScheduleResponse
from src.service import ScheduleService

logger = structlog.get_logger()

# Global service instance
service: Optional[ScheduleService] = None
route_stats = new_stats_table()


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan management"""
    global service

    settings = get_settings()
    configure_logging(settings.log_level, settings.log_json)
    logger.info("Starting Cholesky DAG Scheduling Lab API")

    service = ScheduleService(settings)
    await service.initialize()

    logger.info("API ready to serve requests")
    yield

    if service:
        await service.cleanup()
    service = None
    logger.info("API shutdown complete")


app = FastAPI(
    title="Cholesky DAG Scheduling Lab API",
    description="Task graphs of the tiled Cholesky factorization and reference list schedulers",
    version="1.0.0",
    lifespan=lifespan
)

app.add_middleware(TimingMiddleware, stats=route_stats)


def get_service() -> ScheduleService:
    """Dependency to get the service instance"""
    if service is None:
        raise HTTPException(status_code=503, detail="Service not ready")
    return service


@app.get("/health")
async def health_check():
    """Health check endpoint"""
    return {
        "status": "healthy",
        "timestamp": time.time(),
        "version": "1.0.0"
    }


@app.get("/algorithms")
async def get_algorithms():
    """List the available baseline schedulers"""
    return {
        "algorithms": [
            {"name": Algorithm.ASAP.value, "priority": "largest critical path to the sink"},
            {"name": Algorithm.GREEDY.value, "priority": "largest number of direct successors"},
            {"name": Algorithm.RANDOM.value, "priority": "uniform among available tasks"},
        ]
    }


@app.get("/stats")
async def get_stats():
    """Per-route request statistics"""
    return {
        route: {"requests": s.requests, "errors": s.errors, "mean_ms": s.mean_ms, "max_ms": s.max_ms}
        for route, s in route_stats.items()
    }


@app.post("/dag", response_model=DagResponse)
async def describe_dag(
    request: DagRequest,
    service: ScheduleService = Depends(get_service)
) -> DagResponse:
    """Generate the Cholesky DAG for T tiles and report |V|, W and the critical path"""
    try:
        return await service.describe(request)
    except SchedLabError as e:
        raise HTTPException(status_code=422, detail=str(e))


@app.post("/schedule", response_model=ScheduleResponse)
async def schedule(
    request: ScheduleRequest,
    service: ScheduleService = Depends(get_service)
) -> ScheduleResponse:
    """
    Schedule the Cholesky DAG with a baseline heuristic

    Args:
        request: Tiles, processors, algorithm and seed

    Returns:
        ScheduleResponse with makespan and lower bound
    """
    start_time = time.time()

    try:
        result = await service.schedule(request)
    except SchedLabError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error("Scheduling failed", error=str(e))
        raise HTTPException(status_code=500, detail="Scheduling failed")

    result.processing_time_ms = (time.time() - start_time) * 1000
    logger.info(
        "Schedule completed",
        tiles=request.tiles,
        processors=request.processors,
        algorithm=request.algorithm.value,
        makespan=result.makespan,
        processing_time_ms=result.processing_time_ms
    )
    return result


@app.post("/batch-schedule")
async def batch_schedule(
    requests: List[ScheduleRequest],
    service: ScheduleService = Depends(get_service)
) -> List[ScheduleResponse]:
    """Batch endpoint for several scheduling requests"""
    limit = get_settings().max_batch_size
    if len(requests) > limit:
        raise HTTPException(status_code=400, detail=f"Batch size too large (max {limit})")

    results = []
    for req in requests:
        try:
            results.append(await service.schedule(req))
        except SchedLabError as e:
            raise HTTPException(status_code=422, detail=str(e))
    return results


if __name__ == "__main__":
    import uvicorn
    settings = get_settings()
    uvicorn.run(app, host=settings.api_host, port=settings.api_port)
