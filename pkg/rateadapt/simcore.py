"""
Monte Carlo validation of the spatial and temporal layers.

Randomness comes from counter-based Philox streams keyed by
(master seed, stream id, index...), so every realization and every packet
batch draws the same numbers regardless of worker count or ordering.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from rateadapt.config import (
    DEFAULT_SLOT_SAMPLES,
    META_MODES,
    SIM_BATCH_PACKETS,
)
from rateadapt.errors import ConfigurationError
from rateadapt.metrics import AbsorptionResult, KpiReport, energy, slot_seconds
from rateadapt.params import NetworkConfig, Scheme, SpatialConfig, detection_threshold
from rateadapt.spatial import MetaDistribution, conditional_fsd, meta_cdf
from rateadapt.temporal import (
    SUCCESS,
    TIMEOUT,
    initial_state,
    protocol_schedule,
    protocol_step,
)
from rateadapt.workers import parallel_map

logger = logging.getLogger(__name__)

STREAM_GEOMETRY = 0
STREAM_PROTOCOL = 1
STREAM_SLOTS = 2
STREAM_NETWORK = 3

# Interferers closer than this are clipped when drawing per-slot SIR
MIN_INTERFERER_DISTANCE_M = 1e-6
# Slots per vectorized SIR batch in slot-sampling mode
SLOT_CHUNK = 256


def stream_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for (seed, key...)."""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


@dataclass(frozen=True, eq=False)
class Realization:
    distances: np.ndarray
    types: np.ndarray
    window_radius: float

    def __post_init__(self) -> None:
        if self.distances.shape != self.types.shape:
            raise ValueError("distances and types must have the same shape")
        if self.distances.size and (
            np.any(self.distances < 0.0) or np.any(self.distances > self.window_radius)
        ):
            raise ValueError("interferer distances must lie in [0, window_radius]")

    @property
    def count(self) -> int:
        return int(self.distances.size)

    @classmethod
    def from_points(cls, points: Sequence[Tuple[float, int]], window_radius: float) -> "Realization":
        distances = np.array([float(r) for r, _ in points], dtype=float)
        types = np.array([int(v) for _, v in points], dtype=int)
        return cls(distances, types, float(window_radius))


def sample_realization(
    spatial: SpatialConfig, window_radius: float, rng: np.random.Generator
) -> Realization:
    """Poisson field in the disk of radius ``window_radius`` around the test receiver."""
    if window_radius <= 0.0:
        raise ConfigurationError("must be > 0", "analysis.window_radius")
    mean_count = spatial.density * math.pi * window_radius**2
    count = int(rng.poisson(mean_count)) if mean_count > 0.0 else 0
    # uniform in the disk: r = R sqrt(U)
    distances = window_radius * np.sqrt(rng.random(count))
    types = rng.choice(spatial.type_count, size=count, p=np.asarray(spatial.type_pmf))
    return Realization(distances, types.astype(int), float(window_radius))


@dataclass(frozen=True)
class SimulationRun:
    seed: int
    realizations: int
    packets: int
    window_radius: float

    def realization_rng(self, index: int) -> np.random.Generator:
        return stream_rng(self.seed, STREAM_GEOMETRY, index)

    @classmethod
    def from_config(cls, config: NetworkConfig) -> "SimulationRun":
        a = config.analysis
        return cls(a.seed, a.realizations, a.physical_packets, a.window_radius)


@dataclass(frozen=True, eq=False)
class EmpiricalMeta:
    samples: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", np.sort(np.asarray(self.samples, dtype=float)))

    @property
    def size(self) -> int:
        return int(self.samples.size)

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    @property
    def second_moment(self) -> float:
        return float(np.mean(self.samples**2))

    def ccdf(self, delta):
        """Fraction of samples strictly above ``delta`` (right-continuous step)."""
        below = np.searchsorted(self.samples, np.asarray(delta, dtype=float), side="right")
        result = 1.0 - below / self.size
        return float(result) if np.ndim(result) == 0 else result

    def class_masses(self, boundaries: Sequence[float]) -> np.ndarray:
        counts, _ = np.histogram(self.samples, bins=np.asarray(boundaries, dtype=float))
        return counts / self.size

    def kolmogorov_distance(self, meta: MetaDistribution) -> float:
        """sup_delta |empirical CCDF - beta CCDF|."""
        result = stats.kstest(self.samples, lambda x: np.asarray(meta_cdf(meta, x), dtype=float))
        return float(result.statistic)


def slot_success_rate(
    realization: Realization,
    theta: float,
    spatial: SpatialConfig,
    slots: int,
    rng: np.random.Generator,
) -> float:
    """Fraction of ``slots`` independent slots in which SIR >= theta (fresh fading and activity)."""
    return float(np.mean(draw_slot_decodes(realization, theta, spatial, slots, rng)))


def draw_slot_decodes(
    realization: Realization,
    theta: float,
    spatial: SpatialConfig,
    slots: int,
    rng: np.random.Generator,
) -> np.ndarray:
    eta = spatial.path_loss_exponent
    signal_gain = spatial.test_power * spatial.link_distance ** (-eta)
    types = realization.types
    path_gain = spatial.power_array[types] * np.power(
        np.maximum(realization.distances, MIN_INTERFERER_DISTANCE_M), -eta
    )
    alpha = spatial.activity_array[types]
    decoded = np.empty(slots, dtype=bool)
    for start in range(0, slots, SLOT_CHUNK):
        size = min(SLOT_CHUNK, slots - start)
        signal = signal_gain * rng.exponential(size=size)
        if realization.count:
            fading = rng.exponential(size=(size, realization.count))
            active = rng.random((size, realization.count)) < alpha
            interference = np.sum(np.where(active, fading * path_gain, 0.0), axis=1)
        else:
            interference = np.zeros(size)
        decoded[start : start + size] = signal >= theta * interference
    return decoded


def _meta_worker(args) -> List[float]:
    spatial, theta, run, mode, slots, indices = args
    values = []
    for index in indices:
        realization = sample_realization(spatial, run.window_radius, run.realization_rng(index))
        if mode == "exact":
            values.append(conditional_fsd(realization, theta, spatial))
        else:
            rng = stream_rng(run.seed, STREAM_SLOTS, index)
            values.append(slot_success_rate(realization, theta, spatial, slots, rng))
    return values


def _chunks(count: int, parts: int) -> List[range]:
    size = max(1, math.ceil(count / max(parts, 1)))
    return [range(start, min(start + size, count)) for start in range(0, count, size)]


def empirical_meta(
    spatial: SpatialConfig,
    theta: float,
    run: SimulationRun,
    mode: str = "exact",
    slots: int = DEFAULT_SLOT_SAMPLES,
    workers: int = 1,
) -> EmpiricalMeta:
    """
    One FSD sample per realization.

    ``exact`` uses the conditional product form; ``slots`` thresholds the
    SIR of ``slots`` independent slots per realization.
    """
    if mode not in META_MODES:
        raise ConfigurationError(f"must be one of {', '.join(META_MODES)}", "--meta-mode")
    jobs = [
        (spatial, theta, run, mode, slots, indices)
        for indices in _chunks(run.realizations, workers * 4 if workers > 1 else 1)
    ]
    samples = [v for chunk in parallel_map(_meta_worker, jobs, workers) for v in chunk]
    logger.info(
        "Empirical meta (%s) theta=%.6g over %d realizations", mode, theta, run.realizations
    )
    return EmpiricalMeta(np.asarray(samples))


class BernoulliChannel:
    """Fragment decodes independently with a fixed probability (marginal mode)."""

    def __init__(self, probability: float):
        if not 0.0 <= probability <= 1.0:
            raise ValueError(f"probability must lie in [0, 1], got {probability}")
        self.probability = float(probability)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.random(size) < self.probability


class PhysicalChannel:
    """Per-slot Rayleigh fading and Bernoulli activity over one fixed realization."""

    def __init__(self, realization: Realization, theta: float, spatial: SpatialConfig):
        self.realization = realization
        self.theta = float(theta)
        self.spatial = spatial

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return draw_slot_decodes(self.realization, self.theta, self.spatial, size, rng)


@dataclass(frozen=True)
class EmpiricalKpi:
    """Accumulated packet outcomes; pooled runs add their sums."""

    packets: int = 0
    successes: int = 0
    success_slot_sum: float = 0.0
    failure_slot_sum: float = 0.0
    slot_square_sum: float = 0.0
    success_slot_square_sum: float = 0.0

    def __add__(self, other: "EmpiricalKpi") -> "EmpiricalKpi":
        return EmpiricalKpi(
            self.packets + other.packets,
            self.successes + other.successes,
            self.success_slot_sum + other.success_slot_sum,
            self.failure_slot_sum + other.failure_slot_sum,
            self.slot_square_sum + other.slot_square_sum,
            self.success_slot_square_sum + other.success_slot_square_sum,
        )

    @classmethod
    def from_outcomes(cls, success: np.ndarray, slots: np.ndarray) -> "EmpiricalKpi":
        slots = slots.astype(float)
        return cls(
            packets=int(success.size),
            successes=int(np.count_nonzero(success)),
            success_slot_sum=float(np.sum(slots[success])),
            failure_slot_sum=float(np.sum(slots[~success])),
            slot_square_sum=float(np.sum(slots**2)),
            success_slot_square_sum=float(np.sum(slots[success] ** 2)),
        )

    @property
    def psd(self) -> float:
        return self.successes / self.packets

    @property
    def psd_stderr(self) -> float:
        return math.sqrt(self.psd * (1.0 - self.psd) / self.packets)

    @property
    def latency_slots(self) -> float:
        """Mean absorption slot over all packets."""
        return (self.success_slot_sum + self.failure_slot_sum) / self.packets

    @property
    def latency_stderr(self) -> float:
        mean = self.latency_slots
        variance = max(self.slot_square_sum / self.packets - mean**2, 0.0)
        return math.sqrt(variance / self.packets)

    @property
    def success_latency_slots(self) -> Optional[float]:
        if self.successes == 0:
            return None
        return self.success_slot_sum / self.successes

    def absorption(self) -> AbsorptionResult:
        """Empirical counterpart of (A_s, A_f, D_s, D_f)."""
        return AbsorptionResult(
            self.psd,
            1.0 - self.psd,
            self.success_slot_sum / self.packets,
            self.failure_slot_sum / self.packets,
        )

    def summary(self, config: NetworkConfig, scheme: Scheme) -> dict:
        scheme = Scheme.parse(scheme)
        radio, feedback = config.radio, config.feedback
        scale = slot_seconds(scheme, radio.slot_duration, feedback.ack_duration)
        joules = energy(self.absorption(), config.energy, scheme, radio.slot_duration, feedback.ack_duration)
        per_slot_energy = joules / self.latency_slots if self.latency_slots else 0.0
        success = self.success_latency_slots
        return {
            "packets": self.packets,
            "psd": self.psd,
            "psd_stderr": self.psd_stderr,
            "latency_slots": self.latency_slots,
            "latency_slots_stderr": self.latency_stderr,
            "latency_s": self.latency_slots * scale,
            "success_latency_slots": success,
            "success_latency_s": None if success is None else success * scale,
            "energy_J": joules,
            "energy_J_stderr": self.latency_stderr * per_slot_energy,
        }


def _simulate_batch(
    scheme: Scheme,
    n: int,
    T: int,
    copies: Optional[Tuple[int, ...]],
    span: int,
    channel,
    p_ack: float,
    size: int,
    rng: np.random.Generator,
) -> EmpiricalKpi:
    done = np.zeros(size, dtype=bool)
    success = np.zeros(size, dtype=bool)
    slot = np.zeros(size, dtype=np.int64)
    if scheme is Scheme.CLRA:
        delivered = np.zeros(size, dtype=np.int64)
        for t in range(1, span + 1):
            decoded = channel.draw(rng, size)
            acked = rng.random(size) < p_ack
            active = ~done
            delivered += active & decoded & acked
            finished = active & (delivered == n)
            # dropped once the remaining slots cannot fit the pending fragments
            dropped = active & ~finished & (n - delivered > T - t)
            success |= finished
            slot[finished | dropped] = t
            done |= finished | dropped
    else:
        schedule = [(i, k) for i in range(1, n + 1) for k in range(1, copies[i - 1] + 1)]
        decoded_now = np.zeros(size, dtype=bool)
        for t, (i, k) in enumerate(schedule, start=1):
            decoded = channel.draw(rng, size)
            active = ~done
            decoded_now |= active & decoded
            last_copy = k == copies[i - 1]
            if i == n:
                finished = active & decoded_now
                dropped = active & ~decoded_now if last_copy else np.zeros(size, dtype=bool)
            else:
                finished = np.zeros(size, dtype=bool)
                dropped = active & ~decoded_now if last_copy else np.zeros(size, dtype=bool)
            success |= finished
            slot[finished | dropped] = t
            done |= finished | dropped
            if last_copy:
                decoded_now[:] = False
    return EmpiricalKpi.from_outcomes(success, slot)


def simulate_protocol(
    scheme: Scheme,
    n: int,
    T: int,
    channel,
    p_ack: float,
    packets: int,
    seed: int,
    stream: Sequence[int] = (STREAM_PROTOCOL,),
    copies: Optional[Sequence[int]] = None,
) -> EmpiricalKpi:
    """
    Slot-level simulation of ``packets`` packets under the protocol rules.

    ``channel`` is a BernoulliChannel / PhysicalChannel, or a plain
    probability for the marginal mode. Feedback is a mean-field
    Bernoulli(p_ack) per slot (CLRA only). Packets run in fixed-size
    batches, each on the stream (seed, *stream, batch).
    """
    scheme = Scheme.parse(scheme)
    if packets < 1:
        raise ConfigurationError("must be >= 1", "analysis.packets")
    if not isinstance(channel, (BernoulliChannel, PhysicalChannel)):
        channel = BernoulliChannel(float(channel))
    span, plan_copies = protocol_schedule(scheme, n, T, copies)
    total = EmpiricalKpi()
    for batch, start in enumerate(range(0, packets, SIM_BATCH_PACKETS)):
        size = min(SIM_BATCH_PACKETS, packets - start)
        rng = stream_rng(seed, *stream, batch)
        total = total + _simulate_batch(scheme, n, T, plan_copies, span, channel, p_ack, size, rng)
    return total


def simulate_classes(
    config: NetworkConfig,
    report: KpiReport,
    packets: Optional[int] = None,
    seed: Optional[int] = None,
) -> Dict[str, Any]:
    """
    Marginal-mode simulation of every FSD class of an analytic report.

    Each class gets its own packet run on the stream (seed, protocol, n, class);
    the equal-size runs are pooled and the standard errors combined per class.
    """
    analysis = config.analysis
    packets = analysis.packets if packets is None else packets
    seed = analysis.seed if seed is None else seed
    n, scheme = report.fragments, report.scheme
    parts = [
        simulate_protocol(
            scheme,
            n,
            config.deadline,
            c.fsd_probability,
            report.p_ack,
            packets,
            seed,
            stream=(STREAM_PROTOCOL, n, c.index),
            copies=report.copies,
        )
        for c in report.classes
    ]
    pooled = EmpiricalKpi()
    for part in parts:
        pooled = pooled + part
    summary = pooled.summary(config, scheme)
    per_class = [part.summary(config, scheme) for part in parts]
    for key in ("psd_stderr", "latency_slots_stderr", "energy_J_stderr"):
        summary[key] = math.sqrt(sum(s[key] ** 2 for s in per_class)) / len(per_class)
    return summary


def _network_worker(args) -> EmpiricalKpi:
    scheme, n, T, spatial, theta, p_ack, run, index = args
    realization = sample_realization(spatial, run.window_radius, run.realization_rng(index))
    channel = PhysicalChannel(realization, theta, spatial)
    return simulate_protocol(
        scheme, n, T, channel, p_ack, run.packets, run.seed, stream=(STREAM_NETWORK, n, index)
    )


def simulate_network(
    config: NetworkConfig,
    scheme: Scheme,
    n: int,
    run: SimulationRun,
    p_ack: float,
    workers: int = 1,
) -> EmpiricalKpi:
    """End-to-end Monte Carlo: sample each realization, simulate its packets on the physical channel, pool."""
    scheme = Scheme.parse(scheme)
    theta = detection_threshold(config.radio, n)
    jobs = [
        (scheme, n, config.deadline, config.spatial, theta, p_ack, run, index)
        for index in range(run.realizations)
    ]
    pooled = EmpiricalKpi()
    for part in parallel_map(_network_worker, jobs, workers):
        pooled = pooled + part
    logger.info(
        "%s n=%d physical simulation: %d packets, PSD=%.6f",
        scheme.label, n, pooled.packets, pooled.psd,
    )
    return pooled


def enumerate_outcomes(
    scheme: Scheme,
    n: int,
    T: int,
    p: float,
    p_ack: float = 1.0,
    copies: Optional[Sequence[int]] = None,
) -> AbsorptionResult:
    """
    Exact (A_s, A_f, D_s, D_f) by walking every slot-outcome path.

    Zero-probability branches are pruned, so the walk stays small for the
    degenerate probabilities 0 and 1.
    """
    scheme = Scheme.parse(scheme)
    span, plan_copies = protocol_schedule(scheme, n, T, copies)
    q = p * p_ack if scheme is Scheme.CLRA else p
    totals = {SUCCESS: 0.0, TIMEOUT: 0.0}
    delays = {SUCCESS: 0.0, TIMEOUT: 0.0}
    stack = [(1, initial_state(scheme), 1.0)]
    while stack:
        t, state, mass = stack.pop()
        for delivered, prob in ((True, q), (False, 1.0 - q)):
            if prob == 0.0:
                continue
            outcome = protocol_step(scheme, n, T, plan_copies, state, t, delivered)
            if outcome in (SUCCESS, TIMEOUT):
                totals[outcome] += mass * prob
                delays[outcome] += t * mass * prob
            elif t < span:
                stack.append((t + 1, outcome, mass * prob))
            else:
                raise RuntimeError(f"state {outcome} survives the final slot {t}")
    return AbsorptionResult(totals[SUCCESS], totals[TIMEOUT], delays[SUCCESS], delays[TIMEOUT])
