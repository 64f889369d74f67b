"""Streamable HTTP MCP transport wiring for the low-level MCP Server."""

from mcp.server.fastmcp.server import StreamableHTTPASGIApp
from mcp.server.streamable_http_manager import StreamableHTTPSessionManager

from rateadapt.config import MCP_JSON_RESPONSE, MCP_STATELESS_HTTP
from rateadapt.mcp.app import app as mcp_server


def create_session_manager() -> StreamableHTTPSessionManager:
    return StreamableHTTPSessionManager(
        app=mcp_server,
        stateless=MCP_STATELESS_HTTP,
        json_response=MCP_JSON_RESPONSE,
    )


def streamable_asgi_app(session_manager: StreamableHTTPSessionManager) -> StreamableHTTPASGIApp:
    return StreamableHTTPASGIApp(session_manager)
