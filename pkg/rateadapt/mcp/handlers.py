"""MCP tool call handlers (evaluate, optimize, meta, simulate)."""

from typing import Any, Dict, List

from mcp.types import TextContent

from rateadapt.config import ERROR_SIMULATE_DISABLED, SIMULATE_ENABLED
from rateadapt.mcp.responses import create_error_response, create_json_response
from rateadapt.service import run_evaluate, run_meta, run_optimize, run_simulate


async def _respond(runner, arguments: Dict[str, Any]) -> List[TextContent]:
    body, status = await runner(arguments or {})
    if status >= 400:
        return create_error_response(str(body.get("error", "request failed")))
    return create_json_response(body)


async def handle_evaluate_tool(arguments: Dict[str, Any]) -> List[TextContent]:
    return await _respond(run_evaluate, arguments)


async def handle_optimize_tool(arguments: Dict[str, Any]) -> List[TextContent]:
    return await _respond(run_optimize, arguments)


async def handle_meta_tool(arguments: Dict[str, Any]) -> List[TextContent]:
    return await _respond(run_meta, arguments)


async def handle_simulate_tool(arguments: Dict[str, Any]) -> List[TextContent]:
    if not SIMULATE_ENABLED:
        return create_error_response(ERROR_SIMULATE_DISABLED)
    return await _respond(run_simulate, arguments)
