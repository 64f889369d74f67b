"""MCP tool schemas and JSON serialization for the HTTP /tools endpoint."""

from typing import Any, Dict, List

from mcp.types import Tool

from rateadapt.config import MAX_SIM_PACKETS

SCHEME_PROPERTY = {
    "type": "string",
    "enum": ["clra", "olra", "olra-es"],
    "description": (
        "Rate adaptation scheme: clra (closed loop, ACK per slot), olra (open loop, "
        "all T slots used, T mod n fragments get one extra copy) or olra-es (energy-saving "
        "open loop, floor(T/n) copies of each fragment, leftover slots silent)"
    ),
}

OVERRIDES_PROPERTY = {
    "type": "object",
    "description": (
        "Optional config overrides keyed by dotted path, values with unit suffixes "
        'where relevant, e.g. {"spatial.density": "300/km2", "radio.deadline": 20}'
    ),
}

FRAGMENTS_PROPERTY = {
    "type": "integer",
    "description": "Number of fragments n the packet is split into (1 <= n <= radio.deadline)",
}


def build_tool_definitions(simulate_enabled: bool) -> List[Tool]:
    """Single source of truth for MCP list_tools and HTTP /tools."""
    tools: List[Tool] = [
        Tool(
            name="evaluate",
            description=(
                "Packet success probability, latency and receiver energy of one scheme "
                "at fragment count n, averaged over the meta-distribution classes"
            ),
            inputSchema={
                "type": "object",
                "properties": {
                    "scheme": SCHEME_PROPERTY,
                    "n": FRAGMENTS_PROPERTY,
                    "p_ack": {
                        "type": "number",
                        "description": "Fixed ACK success probability in [0, 1] (default: from the model)",
                    },
                    "overrides": OVERRIDES_PROPERTY,
                },
                "required": ["scheme", "n"],
            },
        ),
        Tool(
            name="optimize",
            description="Scan n = 1..T and return the best fragment count for an objective",
            inputSchema={
                "type": "object",
                "properties": {
                    "scheme": SCHEME_PROPERTY,
                    "objective": {
                        "type": "string",
                        "enum": ["max-psd", "min-latency", "min-energy"],
                        "description": "Objective (default: max-psd)",
                    },
                    "target": {
                        "type": "number",
                        "description": "Minimum packet success probability a candidate must reach",
                    },
                    "p_ack": {
                        "type": "number",
                        "description": "Fixed ACK success probability in [0, 1]",
                    },
                    "overrides": OVERRIDES_PROPERTY,
                },
                "required": ["scheme"],
            },
        ),
        Tool(
            name="meta",
            description=(
                "Meta distribution of the fragment success probability at fragment count n: "
                "threshold, moments, beta shape, CCDF values and class medians"
            ),
            inputSchema={
                "type": "object",
                "properties": {
                    "n": FRAGMENTS_PROPERTY,
                    "deltas": {
                        "type": "array",
                        "items": {"type": "number"},
                        "description": "Reliability levels in [0, 1] (default: 0, 0.1, ..., 1)",
                    },
                    "overrides": OVERRIDES_PROPERTY,
                },
                "required": ["n"],
            },
        ),
    ]
    if simulate_enabled:
        tools.append(
            Tool(
                name="simulate",
                description=(
                    "Monte Carlo check of evaluate: simulate packets per class under the "
                    "protocol rules and return empirical KPIs with standard errors"
                ),
                inputSchema={
                    "type": "object",
                    "properties": {
                        "scheme": SCHEME_PROPERTY,
                        "n": FRAGMENTS_PROPERTY,
                        "packets": {
                            "type": "integer",
                            "description": f"Packets per class (max: {MAX_SIM_PACKETS})",
                        },
                        "seed": {"type": "integer", "description": "Master seed"},
                        "overrides": OVERRIDES_PROPERTY,
                    },
                    "required": ["scheme", "n"],
                },
            )
        )
    return tools


def tools_to_json_list(tools_list: List[Tool]) -> List[Dict[str, Any]]:
    return [
        {"name": t.name, "description": t.description, "inputSchema": t.inputSchema}
        for t in tools_list
    ]
