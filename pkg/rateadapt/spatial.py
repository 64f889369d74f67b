"""
Stochastic-geometry layer.

Moments of the fragment success (FSD) probability over realizations of the
heterogeneous Poisson field, the beta approximation of its meta
distribution, equal-mass FSD classes, the mean-field acknowledgment
success probability, and the success probability conditioned on one
realization.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy import optimize, special

from rateadapt.config import DEFAULT_TOLERANCE
from rateadapt.errors import (
    ConfigurationError,
    DegenerateDistributionError,
    ModelError,
    NumericalError,
)
from rateadapt.params import FeedbackConfig, SpatialConfig

logger = logging.getLogger(__name__)

# Relative slack on M2 - M1^2 below which the FSD is treated as a point mass
DEGENERATE_VARIANCE_RTOL = 1e-12

ArrayLike = Union[float, np.ndarray]


def geometry_constant(path_loss_exponent: float) -> float:
    """2 pi^2 / (eta sin(2 pi / eta)), finite only for eta > 2."""
    eta = float(path_loss_exponent)
    if not eta > 2.0:
        raise ModelError(f"path-loss exponent must exceed 2, got {eta}")
    return 2.0 * math.pi**2 / (eta * math.sin(2.0 * math.pi / eta))


def _check_threshold(theta: float) -> float:
    theta = float(theta)
    if not theta >= 0.0 or not math.isfinite(theta):
        raise ModelError(f"SIR threshold must be finite and >= 0, got {theta}")
    return theta


def _moment_exponent(spatial: SpatialConfig, theta: float, second: bool) -> float:
    theta = _check_threshold(theta)
    eta = spatial.path_loss_exponent
    scale = geometry_constant(eta) * spatial.link_distance**2 * theta ** (2.0 / eta)
    alpha = spatial.activity_array
    weights = (spatial.power_array / spatial.test_power) ** (2.0 / eta)
    terms = weights * spatial.type_densities * alpha
    if second:
        terms = terms * (2.0 - alpha * (1.0 - 2.0 / eta))
    return scale * float(np.sum(terms))


def moment_m1(spatial: SpatialConfig, theta: float) -> float:
    """Mean FSD probability over realizations."""
    return math.exp(-_moment_exponent(spatial, theta, second=False))


def moment_m2(spatial: SpatialConfig, theta: float) -> float:
    """Second moment of the FSD probability over realizations."""
    return math.exp(-_moment_exponent(spatial, theta, second=True))


@dataclass(frozen=True)
class MetaDistribution:
    threshold: float
    m1: float
    m2: float

    @property
    def variance(self) -> float:
        return self.m2 - self.m1**2

    @property
    def is_degenerate(self) -> bool:
        return self.m1 >= 1.0 or self.variance <= DEGENERATE_VARIANCE_RTOL * max(self.m2, 1e-300)

    @property
    def shape(self) -> Tuple[float, float]:
        """Beta parameters (a, b) = (M1 X, (1 - M1) X), X = (M1 - M2) / (M2 - M1^2)."""
        if self.is_degenerate:
            raise DegenerateDistributionError(self.m1, self.m2)
        x = (self.m1 - self.m2) / self.variance
        return self.m1 * x, (1.0 - self.m1) * x


def meta_distribution(spatial: SpatialConfig, theta: float) -> MetaDistribution:
    meta = MetaDistribution(theta, moment_m1(spatial, theta), moment_m2(spatial, theta))
    if not meta.is_degenerate:
        a, b = meta.shape
        logger.debug("theta=%.6g M1=%.6g M2=%.6g beta(a=%.6g, b=%.6g)", theta, meta.m1, meta.m2, a, b)
    return meta


def _check_delta(delta: ArrayLike) -> np.ndarray:
    values = np.asarray(delta, dtype=float)
    if np.any((values < 0.0) | (values > 1.0)) or np.any(np.isnan(values)):
        raise ModelError("reliability level delta must lie in [0, 1]")
    return values


def meta_cdf(meta: MetaDistribution, delta: ArrayLike) -> ArrayLike:
    a, b = meta.shape
    result = special.betainc(a, b, _check_delta(delta))
    return float(result) if np.ndim(result) == 0 else result


def meta_ccdf(meta: MetaDistribution, delta: ArrayLike) -> ArrayLike:
    """Beta-approximated fraction of links whose FSD probability exceeds ``delta``."""
    a, b = meta.shape
    result = 1.0 - special.betainc(a, b, _check_delta(delta))
    return float(result) if np.ndim(result) == 0 else result


def meta_quantile(meta: MetaDistribution, q: float, tolerance: float = DEFAULT_TOLERANCE) -> float:
    """Solve CDF(x) = q on [0, 1] by bracketed root finding."""
    if not 0.0 <= q <= 1.0:
        raise ModelError(f"quantile level must lie in [0, 1], got {q}")
    a, b = meta.shape
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    try:
        return float(
            optimize.brentq(
                lambda x: special.betainc(a, b, x) - q, 0.0, 1.0, xtol=tolerance, maxiter=500
            )
        )
    except (ValueError, RuntimeError) as exc:
        raise NumericalError(
            "beta quantile root finding failed",
            {"a": a, "b": b, "q": q, "m1": meta.m1, "m2": meta.m2, "cause": str(exc)},
        ) from exc


@dataclass(frozen=True)
class FsdClassSet:
    class_count: int
    boundaries: Tuple[float, ...]
    medians: Tuple[float, ...]
    degenerate: bool = False

    @property
    def mean_median(self) -> float:
        return float(np.mean(self.medians))


def discretize_classes(
    meta: MetaDistribution, class_count: int, tolerance: float = DEFAULT_TOLERANCE
) -> FsdClassSet:
    """
    Split the meta distribution into ``class_count`` equal-mass FSD classes.

    Boundary w_m is the m/M quantile and the class median p_{n,m} the
    (m - 1/2)/M quantile. A degenerate distribution collapses every class
    onto the point mass M1.
    """
    if isinstance(class_count, bool) or not isinstance(class_count, int) or class_count < 1:
        raise ConfigurationError(f"class count must be >= 1, got {class_count!r}", "analysis.class_count")
    if meta.is_degenerate:
        logger.warning(
            "Degenerate meta distribution at theta=%.6g (M1=%.6g); using point mass", meta.threshold, meta.m1
        )
        boundaries = tuple(float(w) for w in np.linspace(0.0, 1.0, class_count + 1))
        return FsdClassSet(class_count, boundaries, (meta.m1,) * class_count, degenerate=True)

    inner = [meta_quantile(meta, m / class_count, tolerance) for m in range(1, class_count)]
    boundaries = (0.0, *inner, 1.0)
    medians = tuple(
        meta_quantile(meta, (m - 0.5) / class_count, tolerance) for m in range(1, class_count + 1)
    )
    return FsdClassSet(class_count, boundaries, medians)


def feedback_success_prob(spatial: SpatialConfig, feedback: FeedbackConfig) -> float:
    """
    Mean-field probability that an acknowledgment is decoded.

    Every receiver in the field is treated as an always-active feedback
    transmitter at the same power, so only the total density enters.
    A configured ``p_ack_fixed`` is returned unchanged.
    """
    if feedback.p_ack_fixed is not None:
        return float(feedback.p_ack_fixed)
    eta = spatial.path_loss_exponent
    exponent = (
        geometry_constant(eta)
        * spatial.density
        * spatial.link_distance**2
        * feedback.threshold ** (2.0 / eta)
    )
    return math.exp(-exponent)


def conditional_fsd(realization, theta: float, spatial: SpatialConfig) -> float:
    """
    Success probability of one fragment given the interferer positions and types.

    Rayleigh fading and Bernoulli activity are averaged out, which leaves a
    product of (1 - alpha) + alpha / (1 + theta p_v R_o^eta / (p_o r^eta))
    over interferers. An interferer at r = 0 contributes 1 - alpha.
    """
    theta = _check_threshold(theta)
    distances = np.asarray(realization.distances, dtype=float)
    if distances.size == 0:
        return 1.0
    types = np.asarray(realization.types, dtype=int)
    alpha = spatial.activity_array[types]
    power = spatial.power_array[types]
    eta = spatial.path_loss_exponent
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = theta * power * spatial.link_distance**eta / (spatial.test_power * distances**eta)
    ratio = np.where(distances == 0.0, np.inf, ratio)
    terms = (1.0 - alpha) + alpha / (1.0 + ratio)
    return float(np.prod(terms))
