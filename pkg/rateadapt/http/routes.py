"""Starlette REST API mirroring evaluate/optimize/meta/simulate, health, and streamable MCP."""

import contextlib
import json
import logging
from collections.abc import AsyncIterator
from typing import Any, Awaitable, Callable, Dict, Tuple

from starlette.applications import Starlette
from starlette.middleware.cors import CORSMiddleware
from starlette.requests import Request
from starlette.responses import JSONResponse
from starlette.routing import Route

from rateadapt import __version__
from rateadapt.config import (
    CODE_SIMULATE_DISABLED,
    ERROR_SIMULATE_HTTP_DISABLED,
    MCP_STREAMABLE_ENABLED,
    MCP_STREAMABLE_PATH,
    SIMULATE_ENABLED,
)
from rateadapt.http.streamable import create_session_manager, streamable_asgi_app
from rateadapt.mcp.tools import build_tool_definitions, tools_to_json_list
from rateadapt.service import run_evaluate, run_meta, run_optimize, run_simulate

logger = logging.getLogger(__name__)

Runner = Callable[[Dict[str, Any]], Awaitable[Tuple[Dict[str, Any], int]]]


async def _dispatch(request: Request, runner: Runner) -> JSONResponse:
    try:
        data = await request.json()
    except json.JSONDecodeError:
        return JSONResponse({"error": "Invalid JSON body"}, status_code=400)
    if not isinstance(data, dict):
        return JSONResponse({"error": "JSON body must be an object"}, status_code=400)
    try:
        body, status = await runner(data)
        return JSONResponse(body, status_code=status)
    except Exception as e:
        logger.exception("Unhandled error in %s", request.url.path)
        return JSONResponse({"error": str(e)}, status_code=500)


async def evaluate_endpoint(request: Request) -> JSONResponse:
    return await _dispatch(request, run_evaluate)


async def optimize_endpoint(request: Request) -> JSONResponse:
    return await _dispatch(request, run_optimize)


async def meta_endpoint(request: Request) -> JSONResponse:
    return await _dispatch(request, run_meta)


async def simulate_endpoint(request: Request) -> JSONResponse:
    if not SIMULATE_ENABLED:
        return JSONResponse(
            {"error": ERROR_SIMULATE_HTTP_DISABLED, "code": CODE_SIMULATE_DISABLED},
            status_code=404,
        )
    return await _dispatch(request, run_simulate)


async def health_endpoint(request: Request) -> JSONResponse:
    return JSONResponse({"status": "healthy", "version": __version__})


async def tools_endpoint(request: Request) -> JSONResponse:
    tools = tools_to_json_list(build_tool_definitions(SIMULATE_ENABLED))
    return JSONResponse({"tools": tools})


def create_web_app() -> Starlette:
    """Starlette app: REST mirror routes and optional streamable MCP at MCP_STREAMABLE_PATH."""
    session_manager = create_session_manager() if MCP_STREAMABLE_ENABLED else None

    @contextlib.asynccontextmanager
    async def lifespan(app: Starlette) -> AsyncIterator[None]:
        if session_manager is not None:
            async with session_manager.run():
                yield
        else:
            yield

    routes = [
        Route("/evaluate", evaluate_endpoint, methods=["POST"]),
        Route("/optimize", optimize_endpoint, methods=["POST"]),
        Route("/meta", meta_endpoint, methods=["POST"]),
        Route("/simulate", simulate_endpoint, methods=["POST"]),
        Route("/health", health_endpoint, methods=["GET"]),
        Route("/tools", tools_endpoint, methods=["GET"]),
    ]

    if session_manager is not None:
        routes.append(
            Route(
                MCP_STREAMABLE_PATH,
                endpoint=streamable_asgi_app(session_manager),
            )
        )

    starlette_app = Starlette(routes=routes, lifespan=lifespan)

    if session_manager is not None:
        starlette_app = CORSMiddleware(
            starlette_app,
            allow_origins=["*"],
            allow_methods=["GET", "POST", "DELETE"],
            expose_headers=["Mcp-Session-Id"],
        )

    return starlette_app
