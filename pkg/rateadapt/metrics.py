"""
Matrix-analytic evaluation of absorbing chains and packet-level KPIs.

``absorb`` propagates a row vector through the slot blocks:
A = sum_i (prod_{t<i} Q_t) H_i and D = sum_i i (prod_{t<i} Q_t) H_i.
``evaluate_scheme`` composes the spatial layer (one chain per FSD class)
and averages the classes with equal weights.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from rateadapt.errors import (
    ChainError,
    ClassEvaluationError,
    ConfigurationError,
    InvariantViolation,
    ModelError,
    NumericalError,
)
from rateadapt.params import (
    EnergyConfig,
    NetworkConfig,
    Scheme,
    detection_threshold,
    extra_copy_assignments,
    repetition_plan,
)
from rateadapt.spatial import (
    discretize_classes,
    feedback_success_prob,
    meta_distribution,
)
from rateadapt.temporal import AbsorbingChain, build_clra, build_olra, build_olra_es
from rateadapt.workers import parallel_map

logger = logging.getLogger(__name__)

PROBABILITY_ATOL = 1e-12
# Slack for the delay bounds n <= D_s / A_s <= T
DELAY_BOUND_ATOL = 1e-9
# Objective values closer than this count as ties (smaller n wins)
OBJECTIVE_TIE_ATOL = 1e-12


@dataclass(frozen=True)
class AbsorptionResult:
    success_probability: float
    failure_probability: float
    success_delay: float
    failure_delay: float

    @property
    def mean_delay(self) -> float:
        """Unconditional mean absorption slot, D_s + D_f."""
        return self.success_delay + self.failure_delay

    @property
    def conditional_success_delay(self) -> Optional[float]:
        if self.success_probability <= 0.0:
            return None
        return self.success_delay / self.success_probability

    @property
    def conditional_failure_delay(self) -> Optional[float]:
        if self.failure_probability <= 0.0:
            return None
        return self.failure_delay / self.failure_probability

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (
            self.success_probability,
            self.failure_probability,
            self.success_delay,
            self.failure_delay,
        )

    @classmethod
    def mean(cls, results: Sequence["AbsorptionResult"]) -> "AbsorptionResult":
        values = np.mean([r.as_tuple() for r in results], axis=0)
        return cls(*(float(v) for v in values))


def absorb(chain: AbsorbingChain) -> AbsorptionResult:
    if len(chain.transient) != len(chain.absorbing) - 1:
        raise ChainError(
            f"{len(chain.transient)} transient blocks for {len(chain.absorbing)} absorbing blocks"
        )
    state = np.ones(1)
    totals = np.zeros(2)
    delays = np.zeros(2)
    for i, h in enumerate(chain.absorbing, start=1):
        if state.shape[0] != h.shape[0]:
            raise ChainError(f"slot {i}: state vector of size {state.shape[0]} vs H_{i} rows {h.shape[0]}")
        step = state @ h
        totals += step
        delays += i * step
        if i < len(chain.absorbing):
            q = chain.transient[i - 1]
            if q.shape[0] != state.shape[0]:
                raise ChainError(f"slot {i}: state vector of size {state.shape[0]} vs Q_{i} rows {q.shape[0]}")
            state = state @ q
    return AbsorptionResult(float(totals[0]), float(totals[1]), float(delays[0]), float(delays[1]))


def slot_seconds(scheme: Scheme, slot_duration: float, ack_duration: float) -> float:
    """Wall-clock length of one protocol slot: CLRA slots also carry the ACK."""
    if Scheme.parse(scheme) is Scheme.CLRA:
        return slot_duration + ack_duration
    return slot_duration


@dataclass(frozen=True)
class Latency:
    unconditional: float
    success: Optional[float]
    failure: Optional[float]


def latency_seconds(
    result: AbsorptionResult, scheme: Scheme, slot_duration: float, ack_duration: float
) -> Latency:
    """Mean absorption latency in seconds; conditional values are None when undefined."""
    scale = slot_seconds(scheme, slot_duration, ack_duration)
    success = result.conditional_success_delay
    failure = result.conditional_failure_delay
    return Latency(
        unconditional=result.mean_delay * scale,
        success=None if success is None else success * scale,
        failure=None if failure is None else failure * scale,
    )


def energy(
    result: AbsorptionResult,
    energy_config: EnergyConfig,
    scheme: Scheme,
    slot_duration: float,
    ack_duration: float,
) -> float:
    """Mean receiver energy (J): E_r per slot, plus E_ack per slot under CLRA."""
    per_slot = energy_config.receive_energy(slot_duration)
    if Scheme.parse(scheme) is Scheme.CLRA:
        per_slot += energy_config.ack_energy(ack_duration)
    return per_slot * result.mean_delay


@dataclass(frozen=True)
class ClassKpi:
    index: int
    fsd_probability: float
    parameter: float
    absorption: AbsorptionResult
    latency_slots: Optional[float]
    latency_s: Optional[float]
    success_latency_slots: Optional[float]
    success_latency_s: Optional[float]
    energy_j: float

    @property
    def psd(self) -> float:
        return self.absorption.success_probability

    def to_dict(self) -> Dict[str, Any]:
        a = self.absorption
        return {
            "class": self.index,
            "fsd_probability": self.fsd_probability,
            "parameter": self.parameter,
            "psd": a.success_probability,
            "timeout": a.failure_probability,
            "success_delay": a.success_delay,
            "failure_delay": a.failure_delay,
            "latency_slots": self.latency_slots,
            "latency_s": self.latency_s,
            "success_latency_slots": self.success_latency_slots,
            "success_latency_s": self.success_latency_s,
            "energy_J": self.energy_j,
        }


@dataclass(frozen=True)
class KpiReport:
    scheme: Scheme
    fragments: int
    deadline: int
    threshold: float
    m1: float
    m2: float
    p_ack: float
    latency_mode: str
    classes: Tuple[ClassKpi, ...]
    psd: float
    latency_slots: Optional[float]
    latency_s: Optional[float]
    success_latency_slots: Optional[float]
    success_latency_s: Optional[float]
    energy_j: float
    copies: Optional[Tuple[int, ...]] = None
    pooled_success_latency_slots: Optional[float] = None
    pooled_success_latency_s: Optional[float] = None

    @property
    def class_count(self) -> int:
        return len(self.classes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scheme": self.scheme.value,
            "n": self.fragments,
            "T": self.deadline,
            "theta": self.threshold,
            "m1": self.m1,
            "m2": self.m2,
            "p_ack": self.p_ack,
            "latency_mode": self.latency_mode,
            "copies": None if self.copies is None else list(self.copies),
            "psd": self.psd,
            "latency_slots": self.latency_slots,
            "latency_s": self.latency_s,
            "success_latency_slots": self.success_latency_slots,
            "success_latency_s": self.success_latency_s,
            "energy_J": self.energy_j,
            "pooled_success_latency_slots": self.pooled_success_latency_slots,
            "pooled_success_latency_s": self.pooled_success_latency_s,
            "classes": [c.to_dict() for c in self.classes],
        }


def build_class_chain(
    scheme: Scheme, n: int, T: int, fsd: float, p_ack: float, copies: Optional[Sequence[int]] = None
) -> AbsorbingChain:
    if scheme is Scheme.CLRA:
        return build_clra(n, T, fsd * p_ack)
    if scheme is Scheme.OLRA_ES:
        return build_olra_es(n, T, fsd)
    return build_olra(n, T, fsd, copies)


def _class_absorption(args) -> AbsorptionResult:
    scheme, n, T, fsd, p_ack, assignment = args
    if scheme is Scheme.OLRA and assignment == "average" and T % n:
        results = [
            absorb(build_olra(n, T, fsd, copies).validate())
            for copies in extra_copy_assignments(n, T)
        ]
        return AbsorptionResult.mean(results)
    return absorb(build_class_chain(scheme, n, T, fsd, p_ack).validate())


def _mean_defined(values: Sequence[Optional[float]]) -> Optional[float]:
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else None


def summarize_classes(
    scheme: Scheme,
    config: NetworkConfig,
    fsd_values: Sequence[float],
    parameters: Sequence[float],
    results: Sequence[AbsorptionResult],
) -> Tuple[Tuple[ClassKpi, ...], Dict[str, Optional[float]]]:
    """
    Per-class KPIs and their equal-weight averages.

    Conditional latencies are undefined for classes that never succeed; those
    classes drop out of the conditional averages. ``pooled_success_latency_slots``
    is the success-weighted ratio sum(D_s) / sum(A_s) over all classes.
    """
    radio, feedback = config.radio, config.feedback
    mode = config.analysis.latency
    scale = slot_seconds(scheme, radio.slot_duration, feedback.ack_duration)
    classes = []
    for index, (fsd, parameter, result) in enumerate(zip(fsd_values, parameters, results), start=1):
        latency = latency_seconds(result, scheme, radio.slot_duration, feedback.ack_duration)
        success = result.conditional_success_delay
        if mode == "unconditional":
            headline_slots, headline_s = result.mean_delay, latency.unconditional
        else:
            headline_slots, headline_s = success, latency.success
        classes.append(
            ClassKpi(
                index=index,
                fsd_probability=float(fsd),
                parameter=float(parameter),
                absorption=result,
                latency_slots=headline_slots,
                latency_s=headline_s,
                success_latency_slots=success,
                success_latency_s=latency.success,
                energy_j=energy(
                    result, config.energy, scheme, radio.slot_duration, feedback.ack_duration
                ),
            )
        )
    total_success = sum(r.success_probability for r in results)
    pooled = sum(r.success_delay for r in results) / total_success if total_success > 0.0 else None
    averages = {
        "psd": float(np.mean([c.psd for c in classes])),
        "latency_slots": _mean_defined([c.latency_slots for c in classes]),
        "latency_s": _mean_defined([c.latency_s for c in classes]),
        "success_latency_slots": _mean_defined([c.success_latency_slots for c in classes]),
        "success_latency_s": _mean_defined([c.success_latency_s for c in classes]),
        "pooled_success_latency_slots": pooled,
        "pooled_success_latency_s": None if pooled is None else pooled * scale,
        "energy_j": float(np.mean([c.energy_j for c in classes])),
    }
    return tuple(classes), averages


def evaluate_scheme(
    config: NetworkConfig,
    scheme: Scheme,
    n: int,
    p_ack: Optional[float] = None,
    workers: Optional[int] = None,
) -> KpiReport:
    """
    KPIs of ``scheme`` with ``n`` fragments, averaged over the equiprobable FSD classes.

    ``p_ack`` overrides the configured acknowledgment success probability.
    """
    scheme = Scheme.parse(scheme)
    config = config.with_fragments(n)
    if p_ack is not None:
        config = config.with_p_ack(p_ack)
    spatial, analysis = config.spatial, config.analysis
    T = config.deadline

    theta = detection_threshold(config.radio)
    meta = meta_distribution(spatial, theta)
    try:
        classes = discretize_classes(meta, analysis.class_count, analysis.tolerance)
    except (NumericalError, ModelError) as exc:
        raise ClassEvaluationError(0, exc) from exc
    ack = feedback_success_prob(spatial, config.feedback)

    jobs = [(scheme, n, T, fsd, ack, analysis.assignment) for fsd in classes.medians]
    try:
        results = parallel_map(_class_absorption, jobs, workers or analysis.workers)
    except (ChainError, NumericalError, ModelError) as exc:
        # the pool hides which job failed; rerun in-process to attach the class index
        for index, job in enumerate(jobs, start=1):
            try:
                _class_absorption(job)
            except (ChainError, NumericalError, ModelError) as inner:
                raise ClassEvaluationError(index, inner) from inner
        raise ClassEvaluationError(0, exc) from exc

    parameters = [fsd * ack if scheme is Scheme.CLRA else fsd for fsd in classes.medians]
    per_class, averages = summarize_classes(scheme, config, classes.medians, parameters, results)
    copies = None if scheme is Scheme.CLRA else repetition_plan(n, T, scheme).copies
    report = KpiReport(
        scheme=scheme,
        fragments=n,
        deadline=T,
        threshold=theta,
        m1=meta.m1,
        m2=meta.m2,
        p_ack=ack,
        latency_mode=analysis.latency,
        classes=per_class,
        psd=averages["psd"],
        latency_slots=averages["latency_slots"],
        latency_s=averages["latency_s"],
        success_latency_slots=averages["success_latency_slots"],
        success_latency_s=averages["success_latency_s"],
        energy_j=averages["energy_j"],
        copies=copies,
        pooled_success_latency_slots=averages["pooled_success_latency_slots"],
        pooled_success_latency_s=averages["pooled_success_latency_s"],
    )
    logger.info(
        "%s n=%d T=%d: PSD=%.6f latency=%s slots energy=%.6g J",
        scheme.label, n, T, report.psd,
        "n/a" if report.latency_slots is None else f"{report.latency_slots:.4f}",
        report.energy_j,
    )
    return report


class Objective(str, Enum):
    MAX_PSD = "max-psd"
    MIN_LATENCY = "min-latency"
    MIN_ENERGY = "min-energy"

    @classmethod
    def parse(cls, value) -> "Objective":
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            allowed = ", ".join(o.value for o in cls)
            raise ConfigurationError(
                f"unknown objective {value!r} (allowed: {allowed})", "--objective"
            ) from None


@dataclass(frozen=True)
class OptimizationResult:
    scheme: Scheme
    objective: Objective
    target: Optional[float]
    feasible: bool
    best_n: Optional[int]
    best_psd: float
    report: Optional[KpiReport]
    scanned: Tuple[KpiReport, ...] = field(default_factory=tuple)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scheme": self.scheme.value,
            "objective": self.objective.value,
            "target": self.target,
            "feasible": self.feasible,
            "n_opt": self.best_n,
            "best_psd": self.best_psd,
            "report": None if self.report is None else self.report.to_dict(),
            "scanned": [
                {
                    "n": r.fragments,
                    "psd": r.psd,
                    "latency_s": r.latency_s,
                    "energy_J": r.energy_j,
                }
                for r in self.scanned
            ],
        }


def _objective_value(report: KpiReport, objective: Objective) -> float:
    """Value to minimize."""
    if objective is Objective.MAX_PSD:
        return -report.psd
    if objective is Objective.MIN_LATENCY:
        return math.inf if report.latency_s is None else report.latency_s
    return report.energy_j


def optimize_fragments(
    config: NetworkConfig,
    scheme: Scheme,
    objective: Objective = Objective.MAX_PSD,
    target: Optional[float] = None,
    n_values: Optional[Sequence[int]] = None,
    p_ack: Optional[float] = None,
) -> OptimizationResult:
    """
    Exhaustive scan over the fragment count.

    Candidates must reach PSD >= ``target`` (no constraint when None).
    Among feasible candidates the objective decides, ties going to the
    smaller n. With no feasible candidate the result is marked infeasible
    and carries the best PSD reached.
    """
    scheme = Scheme.parse(scheme)
    objective = Objective.parse(objective)
    candidates = list(n_values) if n_values is not None else list(range(1, config.deadline + 1))
    reports = tuple(evaluate_scheme(config, scheme, n, p_ack=p_ack) for n in candidates)
    best_psd = max(r.psd for r in reports)
    threshold = -math.inf if target is None else target
    best: Optional[KpiReport] = None
    for report in reports:
        if report.psd < threshold:
            continue
        if best is None or (
            _objective_value(report, objective)
            < _objective_value(best, objective) - OBJECTIVE_TIE_ATOL
        ):
            best = report
    if best is None:
        logger.warning(
            "%s: PSD target %.6g infeasible; best achievable %.6g", scheme.label, target, best_psd
        )
        return OptimizationResult(scheme, objective, target, False, None, best_psd, None, reports)
    logger.info("%s %s: n*=%d", scheme.label, objective.value, best.fragments)
    return OptimizationResult(scheme, objective, target, True, best.fragments, best_psd, best, reports)


def check_report_invariants(report: KpiReport) -> None:
    """Raise InvariantViolation when a report breaks the absorption or averaging invariants."""
    n, T = report.fragments, report.deadline
    span = T if report.copies is None else sum(report.copies)
    problems: List[str] = []
    for c in report.classes:
        a = c.absorption
        if abs(a.success_probability + a.failure_probability - 1.0) > PROBABILITY_ATOL:
            problems.append(f"class {c.index}: A_s + A_f = {a.success_probability + a.failure_probability!r}")
        if not -PROBABILITY_ATOL <= a.success_probability <= 1.0 + PROBABILITY_ATOL:
            problems.append(f"class {c.index}: A_s = {a.success_probability!r} outside [0, 1]")
        success = a.conditional_success_delay
        if success is not None and a.success_probability > PROBABILITY_ATOL and not (
            n - DELAY_BOUND_ATOL <= success <= span + DELAY_BOUND_ATOL
        ):
            problems.append(f"class {c.index}: D_s/A_s = {success!r} outside [{n}, {span}]")
        failure = a.conditional_failure_delay
        if failure is not None and a.failure_probability > PROBABILITY_ATOL and failure > span + DELAY_BOUND_ATOL:
            problems.append(f"class {c.index}: D_f/A_f = {failure!r} exceeds {span}")
    psds = [c.psd for c in report.classes]
    if psds and not min(psds) - PROBABILITY_ATOL <= report.psd <= max(psds) + PROBABILITY_ATOL:
        problems.append(f"class-averaged PSD {report.psd!r} outside per-class range")
    for name in ("latency_slots", "success_latency_slots"):
        expected = _mean_defined([getattr(c, name) for c in report.classes])
        actual = getattr(report, name)
        if (expected is None) != (actual is None) or (
            expected is not None and not math.isclose(actual, expected, rel_tol=1e-12, abs_tol=DELAY_BOUND_ATOL)
        ):
            problems.append(f"class-averaged {name} {actual!r} is not the mean of the classes")
    energies = [c.energy_j for c in report.classes]
    if energies and not min(energies) * (1 - 1e-12) <= report.energy_j <= max(energies) * (1 + 1e-12):
        problems.append(f"class-averaged energy {report.energy_j!r} outside per-class range")
    if problems:
        raise InvariantViolation(
            f"{report.scheme.label} n={n} T={T}: " + "; ".join(problems)
        )
