"""MCP text response helpers."""

import json
from typing import Any, Dict, List

from mcp.types import TextContent


def create_error_response(message: str) -> List[TextContent]:
    """Create a standardized error response."""
    return [TextContent(type="text", text=message)]


def create_json_response(body: Dict[str, Any]) -> List[TextContent]:
    return [TextContent(type="text", text=json.dumps(body, ensure_ascii=False))]
