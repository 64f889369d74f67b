"""Request pipeline shared by the MCP handlers and the REST routes."""

import asyncio
import logging
import math
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from rateadapt.config import (
    CONFIG_PATH,
    ERROR_EVALUATE_PREFIX,
    ERROR_FRAGMENTS_REQUIRED,
    ERROR_META_PREFIX,
    ERROR_OPTIMIZE_PREFIX,
    ERROR_OVERRIDES_TYPE,
    ERROR_SCHEME_REQUIRED,
    ERROR_SIMULATE_PREFIX,
    MAX_SIM_PACKETS,
)
from rateadapt.errors import ConfigurationError, DegenerateDistributionError, RateAdaptError
from rateadapt.loader import load_config
from rateadapt.metrics import Objective, evaluate_scheme, optimize_fragments
from rateadapt.params import NetworkConfig, Scheme, detection_threshold
from rateadapt.simcore import simulate_classes
from rateadapt.spatial import (
    discretize_classes,
    feedback_success_prob,
    meta_ccdf,
    meta_distribution,
)

logger = logging.getLogger(__name__)

Response = Tuple[Dict[str, Any], int]

DEFAULT_META_DELTAS = tuple(float(d) for d in np.linspace(0.0, 1.0, 11))


class RequestError(Exception):
    """Invalid request arguments; rendered as a 400 body."""


def _config(arguments: Dict[str, Any]) -> NetworkConfig:
    overrides = arguments.get("overrides") or {}
    if not isinstance(overrides, dict):
        raise RequestError(ERROR_OVERRIDES_TYPE)
    return load_config(CONFIG_PATH, list(overrides.items()))


def _scheme(arguments: Dict[str, Any]) -> Scheme:
    if not arguments.get("scheme"):
        raise RequestError(ERROR_SCHEME_REQUIRED)
    return Scheme.parse(arguments["scheme"])


def _fragments(arguments: Dict[str, Any], config: NetworkConfig) -> int:
    n = arguments.get("n")
    if n is None:
        raise RequestError(ERROR_FRAGMENTS_REQUIRED)
    if isinstance(n, bool) or not isinstance(n, int) or not 1 <= n <= config.deadline:
        raise ConfigurationError(f"must be an integer in [1, {config.deadline}]", "n")
    return n


def _optional_probability(arguments: Dict[str, Any], key: str) -> Optional[float]:
    value = arguments.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
        raise ConfigurationError("must be a number in [0, 1]", key)
    return float(value)


async def _respond(prefix: str, compute, arguments: Dict[str, Any]) -> Response:
    try:
        return await asyncio.to_thread(compute, arguments), 200
    except RequestError as exc:
        return {"error": str(exc)}, 400
    except (ConfigurationError, ValueError) as exc:
        return {"error": prefix.format(error=exc)}, 400
    except RateAdaptError as exc:
        logger.exception("Request failed")
        return {"error": prefix.format(error=exc)}, 500


def _evaluate(arguments: Dict[str, Any]) -> Dict[str, Any]:
    config = _config(arguments)
    scheme = _scheme(arguments)
    n = _fragments(arguments, config)
    p_ack = _optional_probability(arguments, "p_ack")
    return evaluate_scheme(config, scheme, n, p_ack=p_ack).to_dict()


def _optimize(arguments: Dict[str, Any]) -> Dict[str, Any]:
    config = _config(arguments)
    scheme = _scheme(arguments)
    objective = Objective.parse(arguments.get("objective") or Objective.MAX_PSD.value)
    target = _optional_probability(arguments, "target")
    p_ack = _optional_probability(arguments, "p_ack")
    return optimize_fragments(config, scheme, objective, target, p_ack=p_ack).to_dict()


def _is_probability(value: Any) -> bool:
    return (
        isinstance(value, (int, float))
        and not isinstance(value, bool)
        and math.isfinite(value)
        and 0.0 <= value <= 1.0
    )


def _meta(arguments: Dict[str, Any]) -> Dict[str, Any]:
    config = _config(arguments)
    n = _fragments(arguments, config)
    deltas: List[float] = arguments.get("deltas") or list(DEFAULT_META_DELTAS)
    if not isinstance(deltas, list) or not all(_is_probability(d) for d in deltas):
        raise ConfigurationError("must be a list of numbers in [0, 1]", "deltas")
    analysis = config.analysis
    theta = detection_threshold(config.radio, n)
    meta = meta_distribution(config.spatial, theta)
    try:
        shape = list(meta.shape)
        ccdf = [float(v) for v in np.atleast_1d(meta_ccdf(meta, deltas))]
    except DegenerateDistributionError:
        shape = None
        ccdf = [1.0 if float(d) < meta.m1 else 0.0 for d in deltas]
    classes = discretize_classes(meta, analysis.class_count, analysis.tolerance)
    return {
        "n": n,
        "theta": theta,
        "m1": meta.m1,
        "m2": meta.m2,
        "variance": meta.variance,
        "degenerate": meta.is_degenerate,
        "beta_shape": shape,
        "deltas": [float(d) for d in deltas],
        "ccdf": ccdf,
        "class_boundaries": [float(b) for b in classes.boundaries],
        "class_medians": [float(m) for m in classes.medians],
        "p_ack": feedback_success_prob(config.spatial, config.feedback),
    }


def _simulate(arguments: Dict[str, Any]) -> Dict[str, Any]:
    config = _config(arguments)
    scheme = _scheme(arguments)
    n = _fragments(arguments, config)
    packets = arguments.get("packets", config.analysis.packets)
    if isinstance(packets, bool) or not isinstance(packets, int) or packets < 1:
        raise ConfigurationError("must be a positive integer", "packets")
    packets = min(packets, MAX_SIM_PACKETS)
    seed = arguments.get("seed", config.analysis.seed)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigurationError("must be a nonnegative integer", "seed")
    report = evaluate_scheme(config, scheme, n)
    body = simulate_classes(config, report, packets=packets, seed=seed)
    body.update(
        {
            "scheme": scheme.value,
            "n": n,
            "T": config.deadline,
            "seed": seed,
            "packets_per_class": packets,
            "psd_analytic": report.psd,
        }
    )
    return body


async def run_evaluate(arguments: Dict[str, Any]) -> Response:
    return await _respond(ERROR_EVALUATE_PREFIX, _evaluate, arguments)


async def run_optimize(arguments: Dict[str, Any]) -> Response:
    return await _respond(ERROR_OPTIMIZE_PREFIX, _optimize, arguments)


async def run_meta(arguments: Dict[str, Any]) -> Response:
    return await _respond(ERROR_META_PREFIX, _meta, arguments)


async def run_simulate(arguments: Dict[str, Any]) -> Response:
    return await _respond(ERROR_SIMULATE_PREFIX, _simulate, arguments)
