"""Experiment configuration: built-in defaults, YAML files and dotted ``--set`` overrides."""

import copy
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple, Union

import yaml

from rateadapt.config import (
    DEFAULT_ASSIGNMENT_MODE,
    DEFAULT_CLASS_COUNT,
    DEFAULT_LATENCY_MODE,
    DEFAULT_META_POINTS,
    DEFAULT_PACKETS,
    DEFAULT_PHYSICAL_PACKETS,
    DEFAULT_REALIZATIONS,
    DEFAULT_SEED,
    DEFAULT_SLOT_SAMPLES,
    DEFAULT_TOLERANCE,
    DEFAULT_WINDOW_RADIUS_M,
    WORKERS,
)
from rateadapt.errors import ConfigurationError
from rateadapt.params import (
    AnalysisConfig,
    EnergyConfig,
    FeedbackConfig,
    NetworkConfig,
    RadioConfig,
    SpatialConfig,
)
from rateadapt.units import parse_quantity

logger = logging.getLogger(__name__)

# Table I operating point
DEFAULT_SETTINGS: Dict[str, Dict[str, Any]] = {
    "spatial": {
        "density": "200/km2",
        "path_loss_exponent": 4.0,
        "link_distance": "20m",
        "type_pmf": "uniform",
        "activity": [0.1, 0.3, 0.5],
        "interferer_power": ["10mW", "7mW", "5mW"],
        "test_power": "10mW",
    },
    "radio": {
        "packet_bits": "300B",
        "bandwidth": "250kHz",
        "slot_duration": "1ms",
        "deadline": 15,
        "fragments": 1,
    },
    "feedback": {
        "ack_bits": "5B",
        "ack_duration": "0.15ms",
        "p_ack": None,
    },
    "energy": {
        "receive_circuit_power": "45mW",
        "transmit_circuit_power": "38mW",
        "feedback_power": "10mW",
        "amplifier_factor": 4.0,
    },
    "analysis": {
        "class_count": DEFAULT_CLASS_COUNT,
        "tolerance": DEFAULT_TOLERANCE,
        "realizations": DEFAULT_REALIZATIONS,
        "packets": DEFAULT_PACKETS,
        "physical_packets": DEFAULT_PHYSICAL_PACKETS,
        "seed": DEFAULT_SEED,
        "window_radius": f"{DEFAULT_WINDOW_RADIUS_M:g}m",
        "latency": DEFAULT_LATENCY_MODE,
        "assignment": DEFAULT_ASSIGNMENT_MODE,
        "slot_samples": DEFAULT_SLOT_SAMPLES,
        "meta_points": DEFAULT_META_POINTS,
        "workers": WORKERS,
    },
}


def default_settings() -> Dict[str, Dict[str, Any]]:
    return copy.deepcopy(DEFAULT_SETTINGS)


def merge_settings(
    base: Dict[str, Any], update: Mapping[str, Any], prefix: str = ""
) -> Dict[str, Any]:
    """Deep-merge ``update`` into ``base`` in place; keys absent from ``base`` are rejected."""
    if not isinstance(update, Mapping):
        raise ConfigurationError("expected a mapping", prefix or "<root>")
    for key, value in update.items():
        key_path = f"{prefix}.{key}" if prefix else str(key)
        if key not in base:
            raise ConfigurationError("unknown configuration key", key_path)
        if isinstance(base[key], dict):
            merge_settings(base[key], value, key_path)
        else:
            base[key] = value
    return base


def read_settings_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file: {exc.strerror}", str(path)) from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid YAML: {exc}", str(path)) from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError("top level must be a mapping of sections", str(path))
    return data


def parse_override(text: str) -> Tuple[str, Any]:
    """Split ``section.key=value``; the value is read as a YAML scalar or list."""
    key_path, sep, raw = text.partition("=")
    key_path = key_path.strip()
    if not sep or not key_path:
        raise ConfigurationError(f"override {text!r} is not of the form key=value", "--set")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse value {raw!r}: {exc}", key_path) from exc
    return key_path, value


def apply_override(settings: Dict[str, Any], key_path: str, value: Any) -> None:
    node = settings
    parts = key_path.split(".")
    for depth, part in enumerate(parts):
        if not isinstance(node, dict) or part not in node:
            raise ConfigurationError("unknown configuration key", ".".join(parts[: depth + 1]))
        if depth == len(parts) - 1:
            if isinstance(node[part], dict):
                merge_settings(node[part], value, key_path)
            else:
                node[part] = value
        else:
            node = node[part]


def load_settings(
    path: Optional[Union[str, Path]] = None,
    overrides: Iterable[Union[str, Tuple[str, Any]]] = (),
) -> Dict[str, Any]:
    settings = default_settings()
    if path is not None:
        merge_settings(settings, read_settings_file(path))
        logger.info("Loaded experiment config from %s", path)
    for item in overrides:
        key_path, value = parse_override(item) if isinstance(item, str) else item
        apply_override(settings, key_path, value)
        logger.debug("Override %s=%r", key_path, value)
    return settings


def _as_list(value: Any, key_path: str) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    if isinstance(value, (int, float, str)) and not isinstance(value, bool):
        return [value]
    raise ConfigurationError(f"expected a list, got {value!r}", key_path)


def _as_int(value: Any, key_path: str) -> int:
    if isinstance(value, bool):
        raise ConfigurationError(f"expected an integer, got {value!r}", key_path)
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            pass
    raise ConfigurationError(f"expected an integer, got {value!r}", key_path)


def _as_float(value: Any, key_path: str) -> float:
    if isinstance(value, bool):
        raise ConfigurationError(f"expected a number, got {value!r}", key_path)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"expected a number, got {value!r}", key_path) from None


def _type_pmf(value: Any, type_count: int) -> Tuple[float, ...]:
    if isinstance(value, str) and value.strip().lower() == "uniform":
        return tuple(1.0 / type_count for _ in range(type_count))
    items = _as_list(value, "spatial.type_pmf")
    return tuple(_as_float(x, "spatial.type_pmf") for x in items)


def build_config(settings: Mapping[str, Any]) -> NetworkConfig:
    """Convert a merged settings tree (unit strings allowed) into a validated NetworkConfig."""
    s, r, f, e, a = (
        settings["spatial"],
        settings["radio"],
        settings["feedback"],
        settings["energy"],
        settings["analysis"],
    )
    powers = [
        parse_quantity(p, "power", "spatial.interferer_power")
        for p in _as_list(s["interferer_power"], "spatial.interferer_power")
    ]
    spatial = SpatialConfig(
        density=parse_quantity(s["density"], "density", "spatial.density"),
        path_loss_exponent=_as_float(s["path_loss_exponent"], "spatial.path_loss_exponent"),
        link_distance=parse_quantity(s["link_distance"], "length", "spatial.link_distance"),
        type_pmf=_type_pmf(s["type_pmf"], len(powers)),
        activity=tuple(
            _as_float(x, "spatial.activity") for x in _as_list(s["activity"], "spatial.activity")
        ),
        interferer_power=tuple(powers),
        test_power=parse_quantity(s["test_power"], "power", "spatial.test_power"),
    )
    radio = RadioConfig(
        packet_bits=parse_quantity(r["packet_bits"], "bits", "radio.packet_bits"),
        bandwidth=parse_quantity(r["bandwidth"], "frequency", "radio.bandwidth"),
        slot_duration=parse_quantity(r["slot_duration"], "time", "radio.slot_duration"),
        deadline=_as_int(r["deadline"], "radio.deadline"),
        fragments=_as_int(r["fragments"], "radio.fragments"),
    )
    p_ack = f["p_ack"]
    feedback = FeedbackConfig(
        ack_bits=parse_quantity(f["ack_bits"], "bits", "feedback.ack_bits"),
        ack_duration=parse_quantity(f["ack_duration"], "time", "feedback.ack_duration"),
        bandwidth=radio.bandwidth,
        p_ack_fixed=None if p_ack is None else _as_float(p_ack, "feedback.p_ack"),
    )
    energy = EnergyConfig(
        receive_circuit_power=parse_quantity(
            e["receive_circuit_power"], "power", "energy.receive_circuit_power"
        ),
        transmit_circuit_power=parse_quantity(
            e["transmit_circuit_power"], "power", "energy.transmit_circuit_power"
        ),
        feedback_power=parse_quantity(e["feedback_power"], "power", "energy.feedback_power"),
        amplifier_factor=_as_float(e["amplifier_factor"], "energy.amplifier_factor"),
    )
    analysis = AnalysisConfig(
        class_count=_as_int(a["class_count"], "analysis.class_count"),
        tolerance=_as_float(a["tolerance"], "analysis.tolerance"),
        realizations=_as_int(a["realizations"], "analysis.realizations"),
        packets=_as_int(a["packets"], "analysis.packets"),
        physical_packets=_as_int(a["physical_packets"], "analysis.physical_packets"),
        seed=_as_int(a["seed"], "analysis.seed"),
        window_radius=parse_quantity(a["window_radius"], "length", "analysis.window_radius"),
        latency=str(a["latency"]),
        assignment=str(a["assignment"]),
        slot_samples=_as_int(a["slot_samples"], "analysis.slot_samples"),
        meta_points=_as_int(a["meta_points"], "analysis.meta_points"),
        workers=_as_int(a["workers"], "analysis.workers"),
    )
    return NetworkConfig(spatial, radio, feedback, energy, analysis)


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Iterable[Union[str, Tuple[str, Any]]] = (),
) -> NetworkConfig:
    return build_config(load_settings(path, overrides))


def config_to_dict(config: NetworkConfig) -> Dict[str, Any]:
    """SI-valued echo of a config for report.json."""
    s, r, f, e, a = config.spatial, config.radio, config.feedback, config.energy, config.analysis
    return {
        "spatial": {
            "density": s.density,
            "path_loss_exponent": s.path_loss_exponent,
            "link_distance": s.link_distance,
            "type_pmf": list(s.type_pmf),
            "activity": list(s.activity),
            "interferer_power": list(s.interferer_power),
            "test_power": s.test_power,
        },
        "radio": {
            "packet_bits": r.packet_bits,
            "bandwidth": r.bandwidth,
            "slot_duration": r.slot_duration,
            "deadline": r.deadline,
        },
        "feedback": {
            "ack_bits": f.ack_bits,
            "ack_duration": f.ack_duration,
            "p_ack": f.p_ack_fixed,
            "threshold": f.threshold,
        },
        "energy": {
            "receive_circuit_power": e.receive_circuit_power,
            "transmit_circuit_power": e.transmit_circuit_power,
            "feedback_power": e.feedback_power,
            "amplifier_factor": e.amplifier_factor,
        },
        "analysis": {
            "class_count": a.class_count,
            "tolerance": a.tolerance,
            "realizations": a.realizations,
            "packets": a.packets,
            "physical_packets": a.physical_packets,
            "seed": a.seed,
            "window_radius": a.window_radius,
            "latency": a.latency,
            "assignment": a.assignment,
            "slot_samples": a.slot_samples,
            "meta_points": a.meta_points,
        },
    }
