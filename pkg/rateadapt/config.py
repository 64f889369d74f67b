"""Configuration constants and environment-derived settings for the rate adaptation engine."""

import logging
import os

try:
    from dotenv import load_dotenv

    load_dotenv()
except ImportError:
    pass

logger = logging.getLogger(__name__)

# Analysis defaults
DEFAULT_CLASS_COUNT = 20
DEFAULT_TOLERANCE = 1e-10
DEFAULT_REALIZATIONS = 5000
DEFAULT_PACKETS = 20000  # per class, marginal mode
DEFAULT_PHYSICAL_PACKETS = 200  # per realization, physical mode
DEFAULT_SEED = 1
DEFAULT_WINDOW_RADIUS_M = 2000.0
DEFAULT_SLOT_SAMPLES = 1000  # per realization in slot-sampling meta mode
DEFAULT_META_POINTS = 101  # delta grid for meta_<n>.csv
DEFAULT_LATENCY_MODE = "unconditional"
DEFAULT_ASSIGNMENT_MODE = "first"
DEFAULT_WORKERS = 1
DEFAULT_OUTPUT_DIR = "out"
DEFAULT_LOG_LEVEL = "INFO"

LATENCY_MODES = ("unconditional", "conditional")
ASSIGNMENT_MODES = ("first", "average")
SIMULATION_MODES = ("marginal", "physical")
META_MODES = ("exact", "slots")
OUTPUT_FORMATS = ("pretty", "json", "simple")

# Packets share one RNG stream per batch
SIM_BATCH_PACKETS = 4096

# Window radius must dwarf the link distance
MIN_WINDOW_TO_LINK_RATIO = 10.0

# Safety Limits
MAX_ASSIGNMENTS = 10000
MAX_DEADLINE_SLOTS = 1000
MAX_CLASS_COUNT = 10000

# Logging
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# Error messages
ERROR_UNKNOWN_TOOL = "Unknown tool: {name}"
ERROR_SCHEME_REQUIRED = "Error: scheme is required"
ERROR_FRAGMENTS_REQUIRED = "Error: n (fragment count) is required"
ERROR_OVERRIDES_TYPE = "Error: overrides must be an object of dotted keys"
ERROR_EVALUATE_PREFIX = "Evaluate error: {error}"
ERROR_OPTIMIZE_PREFIX = "Optimize error: {error}"
ERROR_META_PREFIX = "Meta error: {error}"
ERROR_SIMULATE_PREFIX = "Simulate error: {error}"
ERROR_SIMULATE_DISABLED = "Error: simulate is disabled (set SIMULATE_ENABLED=true)"
ERROR_SIMULATE_HTTP_DISABLED = "simulate disabled"
CODE_SIMULATE_DISABLED = "SIMULATE_DISABLED"

# Environment
ENV_CONFIG = "RATEADAPT_CONFIG"
ENV_WORKERS = "RATEADAPT_WORKERS"
ENV_LOG_LEVEL = "RATEADAPT_LOG_LEVEL"
ENV_OUTPUT_DIR = "RATEADAPT_OUTPUT_DIR"
ENV_SIMULATE_ENABLED = "SIMULATE_ENABLED"
ENV_MAX_SIM_PACKETS = "MAX_SIM_PACKETS"

DEFAULT_SIMULATE_ENABLED = False
DEFAULT_MAX_SIM_PACKETS = 200000


def parse_env_bool(env_name: str, default: bool) -> bool:
    raw = os.environ.get(env_name)
    if raw is None or str(raw).strip() == "":
        return default
    v = str(raw).strip().lower()
    if v in ("1", "true", "yes"):
        return True
    if v in ("0", "false", "no"):
        return False
    logger.warning(
        "Invalid boolean for %s: %r; using default %s", env_name, raw, default
    )
    return default


def parse_env_int(env_name: str, default: int) -> int:
    raw = os.environ.get(env_name)
    if raw is None or str(raw).strip() == "":
        return default
    try:
        return int(str(raw).strip())
    except ValueError:
        logger.warning(
            "Invalid integer for %s: %r; using default %s", env_name, raw, default
        )
        return default


def parse_env_str(env_name: str, default):
    raw = os.environ.get(env_name)
    if raw is None or str(raw).strip() == "":
        return default
    return str(raw).strip()


CONFIG_PATH = parse_env_str(ENV_CONFIG, None)
WORKERS = max(1, parse_env_int(ENV_WORKERS, DEFAULT_WORKERS))
LOG_LEVEL = parse_env_str(ENV_LOG_LEVEL, DEFAULT_LOG_LEVEL).upper()
OUTPUT_DIR = parse_env_str(ENV_OUTPUT_DIR, DEFAULT_OUTPUT_DIR)
SIMULATE_ENABLED = parse_env_bool(ENV_SIMULATE_ENABLED, DEFAULT_SIMULATE_ENABLED)
MAX_SIM_PACKETS = parse_env_int(ENV_MAX_SIM_PACKETS, DEFAULT_MAX_SIM_PACKETS)

# Streamable HTTP MCP (web mode)
ENV_MCP_STREAMABLE_PATH = "MCP_STREAMABLE_PATH"
ENV_MCP_STATELESS_HTTP = "MCP_STATELESS_HTTP"
ENV_MCP_JSON_RESPONSE = "MCP_JSON_RESPONSE"
ENV_MCP_STREAMABLE_ENABLED = "MCP_STREAMABLE_ENABLED"

DEFAULT_MCP_STREAMABLE_PATH = "/mcp"
DEFAULT_MCP_STATELESS_HTTP = True
DEFAULT_MCP_JSON_RESPONSE = True
DEFAULT_MCP_STREAMABLE_ENABLED = True

MCP_STREAMABLE_PATH = os.environ.get(ENV_MCP_STREAMABLE_PATH, DEFAULT_MCP_STREAMABLE_PATH).strip()
if not MCP_STREAMABLE_PATH.startswith("/"):
    MCP_STREAMABLE_PATH = f"/{MCP_STREAMABLE_PATH}"

MCP_STATELESS_HTTP = parse_env_bool(ENV_MCP_STATELESS_HTTP, DEFAULT_MCP_STATELESS_HTTP)
MCP_JSON_RESPONSE = parse_env_bool(ENV_MCP_JSON_RESPONSE, DEFAULT_MCP_JSON_RESPONSE)
MCP_STREAMABLE_ENABLED = parse_env_bool(
    ENV_MCP_STREAMABLE_ENABLED, DEFAULT_MCP_STREAMABLE_ENABLED
)
