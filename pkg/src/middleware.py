"""
Middleware for per-route latency statistics and request logging
"""

import time
import uuid
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict

from fastapi import Request
from starlette.middleware.base import BaseHTTPMiddleware
import structlog

logger = structlog.get_logger()


@dataclass
class RouteStats:
    requests: int = 0
    errors: int = 0
    total_ms: float = 0.0
    max_ms: float = 0.0

    @property
    def mean_ms(self) -> float:
        return self.total_ms / self.requests if self.requests else 0.0


class TimingMiddleware(BaseHTTPMiddleware):
    """Times every request, tags it with an id and keeps per-route statistics"""

    def __init__(self, app, stats: Dict[str, RouteStats]):
        super().__init__(app)
        self.stats = stats

    async def dispatch(self, request: Request, call_next):
        request_id = request.headers.get("X-Request-ID") or uuid.uuid4().hex[:12]
        route = f"{request.method} {request.url.path}"
        started = time.perf_counter()

        with structlog.contextvars.bound_contextvars(request_id=request_id):
            try:
                response = await call_next(request)
            except Exception as e:
                self._record(route, started, failed=True)
                logger.error("Request failed", route=route, error=str(e))
                raise

            elapsed_ms = self._record(route, started, failed=response.status_code >= 400)
            response.headers["X-Request-ID"] = request_id
            response.headers["X-Process-Time-Ms"] = f"{elapsed_ms:.3f}"
            logger.info("Request processed", route=route, status_code=response.status_code, duration_ms=elapsed_ms)
            return response

    def _record(self, route: str, started: float, failed: bool) -> float:
        elapsed_ms = (time.perf_counter() - started) * 1000
        entry = self.stats[route]
        entry.requests += 1
        entry.errors += int(failed)
        entry.total_ms += elapsed_ms
        entry.max_ms = max(entry.max_ms, elapsed_ms)
        return elapsed_ms


def new_stats_table() -> Dict[str, RouteStats]:
    return defaultdict(RouteStats)
