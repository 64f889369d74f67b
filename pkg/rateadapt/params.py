"""
Validated parameter sets and derived quantities shared by every layer.

All values are SI base units (bits, Hz, seconds, watts, devices per m²).
Instances are frozen after validation and safe to share across workers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from rateadapt.config import (
    ASSIGNMENT_MODES,
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
    LATENCY_MODES,
    MAX_ASSIGNMENTS,
    MAX_CLASS_COUNT,
    MAX_DEADLINE_SLOTS,
    MIN_WINDOW_TO_LINK_RATIO,
    WORKERS,
)
from rateadapt.errors import ConfigurationError

_PMF_TOLERANCE = 1e-9


class Scheme(str, Enum):
    CLRA = "clra"
    OLRA = "olra"
    OLRA_ES = "olra-es"

    @classmethod
    def parse(cls, value, key_path: str = "scheme") -> "Scheme":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("_", "-")
        try:
            return cls(text)
        except ValueError:
            allowed = ", ".join(s.value for s in cls)
            raise ConfigurationError(
                f"unknown scheme {value!r} (allowed: {allowed})", key_path
            ) from None

    @property
    def has_feedback(self) -> bool:
        return self is Scheme.CLRA

    @property
    def label(self) -> str:
        return self.value.upper()


def _require(condition: bool, message: str, key_path: str) -> None:
    if not condition:
        raise ConfigurationError(message, key_path)


@dataclass(frozen=True)
class SpatialConfig:
    density: float
    path_loss_exponent: float
    link_distance: float
    type_pmf: Tuple[float, ...]
    activity: Tuple[float, ...]
    interferer_power: Tuple[float, ...]
    test_power: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "type_pmf", tuple(float(x) for x in self.type_pmf))
        object.__setattr__(self, "activity", tuple(float(x) for x in self.activity))
        object.__setattr__(
            self, "interferer_power", tuple(float(x) for x in self.interferer_power)
        )
        # density 0 is accepted as the interference-free limit
        _require(self.density >= 0.0, "must be >= 0", "spatial.density")
        _require(self.path_loss_exponent > 2.0, "must be > 2", "spatial.path_loss_exponent")
        _require(self.link_distance > 0.0, "must be > 0", "spatial.link_distance")
        count = len(self.type_pmf)
        _require(count >= 1, "at least one interferer type is required", "spatial.type_pmf")
        _require(
            len(self.activity) == count,
            f"expected {count} values, got {len(self.activity)}",
            "spatial.activity",
        )
        _require(
            len(self.interferer_power) == count,
            f"expected {count} values, got {len(self.interferer_power)}",
            "spatial.interferer_power",
        )
        _require(
            all(f >= 0.0 for f in self.type_pmf)
            and abs(sum(self.type_pmf) - 1.0) <= _PMF_TOLERANCE,
            "must be nonnegative and sum to 1",
            "spatial.type_pmf",
        )
        _require(
            all(0.0 <= a <= 1.0 for a in self.activity),
            "values must lie in [0, 1]",
            "spatial.activity",
        )
        _require(
            all(p > 0.0 for p in self.interferer_power),
            "powers must be > 0",
            "spatial.interferer_power",
        )
        _require(self.test_power > 0.0, "must be > 0", "spatial.test_power")

    @property
    def type_count(self) -> int:
        return len(self.type_pmf)

    @property
    def type_densities(self) -> np.ndarray:
        """Per-type densities lambda_v = f_v(v) * lambda."""
        return np.asarray(self.type_pmf) * self.density

    @property
    def activity_array(self) -> np.ndarray:
        return np.asarray(self.activity)

    @property
    def power_array(self) -> np.ndarray:
        return np.asarray(self.interferer_power)


@dataclass(frozen=True)
class RadioConfig:
    packet_bits: float
    bandwidth: float
    slot_duration: float
    deadline: int
    fragments: int = 1

    def __post_init__(self) -> None:
        _require(self.packet_bits > 0.0, "must be > 0", "radio.packet_bits")
        _require(self.bandwidth > 0.0, "must be > 0", "radio.bandwidth")
        _require(self.slot_duration > 0.0, "must be > 0", "radio.slot_duration")
        _require(
            isinstance(self.deadline, int) and 1 <= self.deadline <= MAX_DEADLINE_SLOTS,
            f"must be an integer in [1, {MAX_DEADLINE_SLOTS}]",
            "radio.deadline",
        )
        _require(
            isinstance(self.fragments, int) and 1 <= self.fragments <= self.deadline,
            f"must be an integer in [1, deadline={self.deadline}]",
            "radio.fragments",
        )

    def with_fragments(self, n: int) -> "RadioConfig":
        return replace(self, fragments=n)


@dataclass(frozen=True)
class FeedbackConfig:
    ack_bits: float
    ack_duration: float
    bandwidth: float
    p_ack_fixed: Optional[float] = None

    def __post_init__(self) -> None:
        _require(self.ack_bits > 0.0, "must be > 0", "feedback.ack_bits")
        _require(self.ack_duration > 0.0, "must be > 0", "feedback.ack_duration")
        _require(self.bandwidth > 0.0, "must be > 0", "radio.bandwidth")
        if self.p_ack_fixed is not None:
            _require(
                0.0 <= self.p_ack_fixed <= 1.0, "must lie in [0, 1]", "feedback.p_ack"
            )

    @property
    def threshold(self) -> float:
        """theta_ack = 2^(L_ack / (W T_ack)) - 1."""
        return _rate_threshold(
            self.ack_bits / (self.bandwidth * self.ack_duration), "feedback.ack_bits"
        )


@dataclass(frozen=True)
class EnergyConfig:
    receive_circuit_power: float
    transmit_circuit_power: float
    feedback_power: float
    amplifier_factor: float

    def __post_init__(self) -> None:
        _require(self.receive_circuit_power > 0.0, "must be > 0", "energy.receive_circuit_power")
        _require(self.transmit_circuit_power > 0.0, "must be > 0", "energy.transmit_circuit_power")
        _require(self.feedback_power > 0.0, "must be > 0", "energy.feedback_power")
        _require(self.amplifier_factor >= 1.0, "must be >= 1", "energy.amplifier_factor")

    def receive_energy(self, slot_duration: float) -> float:
        """E_r = p_cr T_s."""
        return self.receive_circuit_power * slot_duration

    def ack_energy(self, ack_duration: float) -> float:
        """E_ack = (gamma p_t + p_ct) T_ack."""
        return (
            self.amplifier_factor * self.feedback_power + self.transmit_circuit_power
        ) * ack_duration


@dataclass(frozen=True)
class AnalysisConfig:
    class_count: int = DEFAULT_CLASS_COUNT
    tolerance: float = DEFAULT_TOLERANCE
    realizations: int = DEFAULT_REALIZATIONS
    packets: int = DEFAULT_PACKETS
    physical_packets: int = DEFAULT_PHYSICAL_PACKETS
    seed: int = DEFAULT_SEED
    window_radius: float = DEFAULT_WINDOW_RADIUS_M
    latency: str = DEFAULT_LATENCY_MODE
    assignment: str = DEFAULT_ASSIGNMENT_MODE
    slot_samples: int = DEFAULT_SLOT_SAMPLES
    meta_points: int = DEFAULT_META_POINTS
    workers: int = WORKERS

    def __post_init__(self) -> None:
        _require(
            isinstance(self.class_count, int) and 1 <= self.class_count <= MAX_CLASS_COUNT,
            f"must be an integer in [1, {MAX_CLASS_COUNT}]",
            "analysis.class_count",
        )
        _require(self.tolerance > 0.0, "must be > 0", "analysis.tolerance")
        _require(
            isinstance(self.realizations, int) and self.realizations >= 1,
            "must be a positive integer",
            "analysis.realizations",
        )
        _require(
            isinstance(self.packets, int) and self.packets >= 1,
            "must be a positive integer",
            "analysis.packets",
        )
        _require(
            isinstance(self.physical_packets, int) and self.physical_packets >= 1,
            "must be a positive integer",
            "analysis.physical_packets",
        )
        _require(
            isinstance(self.seed, int) and self.seed >= 0,
            "must be a nonnegative integer",
            "analysis.seed",
        )
        _require(self.window_radius > 0.0, "must be > 0", "analysis.window_radius")
        _require(
            self.latency in LATENCY_MODES,
            f"must be one of {', '.join(LATENCY_MODES)}",
            "analysis.latency",
        )
        _require(
            self.assignment in ASSIGNMENT_MODES,
            f"must be one of {', '.join(ASSIGNMENT_MODES)}",
            "analysis.assignment",
        )
        _require(
            isinstance(self.slot_samples, int) and self.slot_samples >= 1,
            "must be a positive integer",
            "analysis.slot_samples",
        )
        _require(
            isinstance(self.meta_points, int) and self.meta_points >= 2,
            "must be an integer >= 2",
            "analysis.meta_points",
        )
        _require(
            isinstance(self.workers, int) and self.workers >= 1,
            "must be a positive integer",
            "analysis.workers",
        )


@dataclass(frozen=True)
class NetworkConfig:
    spatial: SpatialConfig
    radio: RadioConfig
    feedback: FeedbackConfig
    energy: EnergyConfig
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    def __post_init__(self) -> None:
        _require(
            self.analysis.window_radius
            >= MIN_WINDOW_TO_LINK_RATIO * self.spatial.link_distance,
            f"must be at least {MIN_WINDOW_TO_LINK_RATIO:g}x spatial.link_distance",
            "analysis.window_radius",
        )
        _require(
            self.feedback.bandwidth == self.radio.bandwidth,
            "feedback bandwidth must match radio.bandwidth",
            "radio.bandwidth",
        )

    @property
    def deadline(self) -> int:
        return self.radio.deadline

    def with_fragments(self, n: int) -> "NetworkConfig":
        return replace(self, radio=self.radio.with_fragments(n))

    def with_p_ack(self, p_ack: Optional[float]) -> "NetworkConfig":
        return replace(self, feedback=replace(self.feedback, p_ack_fixed=p_ack))


def _rate_threshold(exponent: float, key_path: str) -> float:
    try:
        value = math.expm1(exponent * math.log(2.0))
    except OverflowError:
        raise ConfigurationError(
            f"rate exponent {exponent:g} bits/s/Hz overflows the SIR threshold", key_path
        ) from None
    if not math.isfinite(value):
        raise ConfigurationError(
            f"rate exponent {exponent:g} bits/s/Hz overflows the SIR threshold", key_path
        )
    return value


def detection_threshold(radio: RadioConfig, n: Optional[int] = None) -> float:
    """SIR threshold theta_n = 2^(L / (n W T_s)) - 1 of a fragment sent at rate R_n = L / (n T_s)."""
    fragments = radio.fragments if n is None else n
    if not 1 <= fragments <= radio.deadline:
        raise ConfigurationError(
            f"fragment count {fragments} outside [1, {radio.deadline}]", "radio.fragments"
        )
    exponent = radio.packet_bits / (fragments * radio.bandwidth * radio.slot_duration)
    return _rate_threshold(exponent, "radio.packet_bits")


@dataclass(frozen=True)
class RepetitionPlan:
    fragments: int
    deadline: int
    kappa: int
    tau: int
    copies: Tuple[int, ...]
    scheme: Scheme

    @property
    def span(self) -> int:
        """Slots actually on air."""
        return sum(self.copies)

    @property
    def silent_slots(self) -> int:
        return self.deadline - self.span


def _validate_fragments(n: int, T: int) -> None:
    if not isinstance(n, (int, np.integer)) or not isinstance(T, (int, np.integer)):
        raise ConfigurationError("fragment count and deadline must be integers", "radio.fragments")
    if T < 1:
        raise ConfigurationError(f"deadline {T} must be >= 1", "radio.deadline")
    if not 1 <= n <= T:
        raise ConfigurationError(f"fragment count {n} outside [1, {T}]", "radio.fragments")


def repetition_plan(
    n: int,
    T: int,
    scheme: Scheme = Scheme.OLRA,
    extra: Optional[Sequence[int]] = None,
) -> RepetitionPlan:
    """
    Copies per fragment for the open-loop schemes.

    Every fragment gets kappa = T // n copies. Under OLRA the tau = T mod n
    leftover slots carry one extra copy each, by default for the first tau
    fragments; ``extra`` picks other (0-based) fragment indices. Under
    OLRA-ES the leftover slots stay silent.
    """
    _validate_fragments(n, T)
    scheme = Scheme.parse(scheme)
    kappa, tau = divmod(T, n)
    copies = [kappa] * n
    if scheme is not Scheme.OLRA_ES:
        chosen = range(tau) if extra is None else tuple(extra)
        if len(set(chosen)) != tau or any(not 0 <= i < n for i in chosen):
            raise ConfigurationError(
                f"extra copies must go to {tau} distinct fragments in [0, {n})",
                "analysis.assignment",
            )
        for i in chosen:
            copies[i] += 1
    return RepetitionPlan(n, T, kappa, tau, tuple(copies), scheme)


def extra_copy_assignments(n: int, T: int) -> Iterator[Tuple[int, ...]]:
    """Yield the copy vectors of every way to hand the tau extra copies to distinct fragments."""
    _validate_fragments(n, T)
    tau = T % n
    count = math.comb(n, tau)
    if count > MAX_ASSIGNMENTS:
        raise ConfigurationError(
            f"{count} extra-copy assignments exceed the limit of {MAX_ASSIGNMENTS}",
            "analysis.assignment",
        )
    for chosen in itertools.combinations(range(n), tau):
        yield repetition_plan(n, T, Scheme.OLRA, extra=chosen).copies
