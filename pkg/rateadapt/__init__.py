"""Rate adaptation engine: spatial meta distribution, absorbing chains, KPIs, Monte Carlo, CLI, MCP and HTTP fronts."""

__version__ = "0.1.0"
