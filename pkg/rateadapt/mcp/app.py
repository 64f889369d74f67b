"""MCP stdio server: tool list and dispatch."""

from typing import Any, Dict, List

from mcp.server import Server
from mcp.types import TextContent, Tool

from rateadapt.config import ERROR_SIMULATE_DISABLED, ERROR_UNKNOWN_TOOL, SIMULATE_ENABLED
from rateadapt.mcp.handlers import (
    handle_evaluate_tool,
    handle_meta_tool,
    handle_optimize_tool,
    handle_simulate_tool,
)
from rateadapt.mcp.responses import create_error_response
from rateadapt.mcp.tools import build_tool_definitions

app = Server("rateadapt-mcp")


@app.list_tools()
async def list_tools() -> List[Tool]:
    return build_tool_definitions(SIMULATE_ENABLED)


@app.call_tool()
async def call_tool(name: str, arguments: Dict[str, Any]) -> List[TextContent]:
    """Dispatch tool calls to appropriate handlers."""
    if name == "simulate" and not SIMULATE_ENABLED:
        return create_error_response(ERROR_SIMULATE_DISABLED)

    tool_handlers = {
        "evaluate": handle_evaluate_tool,
        "optimize": handle_optimize_tool,
        "meta": handle_meta_tool,
    }
    if SIMULATE_ENABLED:
        tool_handlers["simulate"] = handle_simulate_tool

    handler = tool_handlers.get(name)
    if handler:
        return await handler(arguments)

    return create_error_response(ERROR_UNKNOWN_TOOL.format(name=name))
