"""Parse configuration quantities with unit suffixes into SI base units."""

import math
import re
from typing import Any, Dict, Optional

from rateadapt.errors import ConfigurationError

_QUANTITY_RE = re.compile(
    r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z/µ0-9^]*)\s*$"
)

# kind -> suffix -> multiplier to SI
UNIT_SCALES: Dict[str, Dict[str, float]] = {
    "density": {"": 1.0, "/m2": 1.0, "/m^2": 1.0, "/km2": 1e-6, "/km^2": 1e-6},
    "length": {"": 1.0, "m": 1.0, "km": 1e3},
    "power": {"": 1.0, "W": 1.0, "mW": 1e-3, "uW": 1e-6, "µW": 1e-6},
    "time": {"": 1.0, "s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6},
    "bits": {"": 1.0, "b": 1.0, "bit": 1.0, "bits": 1.0, "B": 8.0, "kB": 8e3},
    "frequency": {"": 1.0, "Hz": 1.0, "kHz": 1e3, "MHz": 1e6},
}

DBM_SUFFIX = "dBm"


def parse_quantity(value: Any, kind: str, key_path: Optional[str] = None) -> float:
    """Convert ``value`` (number or string such as ``"200/km2"``, ``"10mW"``, ``"300B"``) to SI."""
    scales = UNIT_SCALES.get(kind)
    if scales is None:
        raise ValueError(f"unknown quantity kind: {kind}")
    if isinstance(value, bool):
        raise ConfigurationError(f"expected a {kind} quantity, got {value!r}", key_path)
    if isinstance(value, (int, float)):
        number = float(value)
    elif isinstance(value, str):
        match = _QUANTITY_RE.match(value)
        if not match:
            raise ConfigurationError(f"cannot parse {kind} quantity {value!r}", key_path)
        magnitude, suffix = float(match.group(1)), match.group(2)
        if kind == "power" and suffix == DBM_SUFFIX:
            number = 10.0 ** ((magnitude - 30.0) / 10.0)
        elif suffix in scales:
            number = magnitude * scales[suffix]
        else:
            allowed = ", ".join(s for s in scales if s)
            raise ConfigurationError(
                f"unknown unit {suffix!r} for {kind} (allowed: {allowed})", key_path
            )
    else:
        raise ConfigurationError(f"expected a {kind} quantity, got {value!r}", key_path)
    if not math.isfinite(number):
        raise ConfigurationError(f"{kind} quantity must be finite", key_path)
    return number
