"""stdio MCP transport: tool definitions, handlers, and Server wiring."""
