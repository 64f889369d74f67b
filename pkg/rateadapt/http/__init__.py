"""Starlette REST API and streamable HTTP MCP (same tool semantics as stdio)."""
