"""
Slot-indexed absorbing Markov chains for CLRA, OLRA and OLRA-ES.

A chain spanning S slots stores transient blocks Q_1..Q_{S-1} and
absorbing blocks H_1..H_S. Rows of Q_t and H_t are the protocol states
occupied at the start of slot t; columns of Q_t are the states at the
start of slot t+1; the two columns of H_t are (success, timeout) at slot t.
No dense transition matrix is ever assembled.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple, Union

import numpy as np

from rateadapt.errors import ChainError, ConfigurationError
from rateadapt.params import Scheme, repetition_plan

logger = logging.getLogger(__name__)

SUCCESS = "success"
TIMEOUT = "timeout"
ABSORBING_LABELS = (SUCCESS, TIMEOUT)

ROW_SUM_ATOL = 1e-15


def _check_probability(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ConfigurationError(f"{name} must lie in [0, 1], got {value}")
    return value


def _check_window(n: int, T: int) -> None:
    if T < 1 or not 1 <= n <= T:
        raise ConfigurationError(f"fragment count {n} outside [1, {T}]", "radio.fragments")


def fragment_label(index: int) -> str:
    """1 -> 'a', 2 -> 'b', ...; beyond 26 fragments the plain index."""
    return chr(ord("a") + index - 1) if index <= 26 else f"f{index}"


@dataclass(frozen=True, eq=False)
class AbsorbingChain:
    scheme: Scheme
    fragments: int
    deadline: int
    parameter: float
    transient: Tuple[np.ndarray, ...]
    absorbing: Tuple[np.ndarray, ...]
    labels: Tuple[Tuple[str, ...], ...]
    copies: Optional[Tuple[int, ...]] = None

    @property
    def span(self) -> int:
        return len(self.absorbing)

    def validate(self, atol: float = ROW_SUM_ATOL) -> "AbsorbingChain":
        """Check block shapes, entry range and row-stochasticity; return self."""
        if len(self.transient) != len(self.absorbing) - 1:
            raise ChainError(
                f"{len(self.transient)} transient blocks for {len(self.absorbing)} absorbing blocks"
            )
        if self.absorbing[0].shape[0] != 1:
            raise ChainError("chain must start from a single state")
        for t, h in enumerate(self.absorbing, start=1):
            if h.ndim != 2 or h.shape[1] != 2:
                raise ChainError(f"H_{t} must have exactly 2 columns, got shape {h.shape}")
            rows = h
            if t < self.span:
                q = self.transient[t - 1]
                nxt = self.absorbing[t]
                if q.shape[0] != h.shape[0] or q.shape[1] != nxt.shape[0]:
                    raise ChainError(
                        f"Q_{t} shape {q.shape} inconsistent with H_{t} {h.shape} / H_{t + 1} {nxt.shape}"
                    )
                rows = np.hstack((q, h))
            if np.any(rows < 0.0) or np.any(rows > 1.0):
                raise ChainError(f"slot {t}: entries outside [0, 1]")
            sums = rows.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > atol):
                raise ChainError(f"slot {t}: row sums {sums.tolist()} differ from 1")
        return self

    def dump(self) -> str:
        """Plain-text block listing with slot-labeled rows and columns."""
        lines = [
            f"{self.scheme.label} n={self.fragments} T={self.deadline} "
            f"param={self.parameter:.6g} span={self.span}"
        ]
        if self.copies is not None:
            lines[0] += f" copies={list(self.copies)}"
        for t in range(1, self.span + 1):
            rows = self.labels[t - 1]
            cols = list(self.labels[t]) if t < self.span else []
            header = [f"t={t}"] + [f"{c}@{t + 1}" for c in cols] + list(ABSORBING_LABELS)
            lines.append("  ".join(f"{h:>10}" for h in header))
            q = self.transient[t - 1] if t < self.span else np.zeros((len(rows), 0))
            block = np.hstack((q, self.absorbing[t - 1]))
            for label, row in zip(rows, block):
                cells = [f"{label}@{t}"] + [f"{v:.6g}" for v in row]
                lines.append("  ".join(f"{c:>10}" for c in cells))
        return "\n".join(lines)


def clra_fragment_range(n: int, T: int, t: int) -> Tuple[int, int]:
    """Fragments that can be pending at the start of slot t without breaching the deadline."""
    return max(1, n - (T - t)), min(t, n)


def build_clra(n: int, T: int, rho: float) -> AbsorbingChain:
    """
    CLRA chain: one state per pending fragment index.

    On success (prob rho) the transmitter moves to the next fragment, or
    the packet is delivered at the last one. On failure it keeps the
    fragment unless the remaining slots no longer fit the pending
    fragments, in which case the packet times out.
    """
    _check_window(n, T)
    rho = _check_probability(rho, "rho")
    fail = 1.0 - rho
    transient: List[np.ndarray] = []
    absorbing: List[np.ndarray] = []
    labels: List[Tuple[str, ...]] = []
    for t in range(1, T + 1):
        lo, hi = clra_fragment_range(n, T, t)
        labels.append(tuple(fragment_label(j) for j in range(lo, hi + 1)))
        h = np.zeros((hi - lo + 1, 2))
        nlo, nhi = clra_fragment_range(n, T, t + 1) if t < T else (n + 1, n)
        q = np.zeros((hi - lo + 1, max(nhi - nlo + 1, 0)))
        for row, j in enumerate(range(lo, hi + 1)):
            if j == n:
                h[row, 0] += rho
            else:
                q[row, j + 1 - nlo] += rho
            if t < T and j >= nlo:
                q[row, j - nlo] += fail
            else:
                h[row, 1] += fail
        absorbing.append(h)
        if t < T:
            transient.append(q)
    return AbsorbingChain(
        Scheme.CLRA, n, T, rho, tuple(transient), tuple(absorbing), tuple(labels)
    )


def _build_repetition_chain(
    scheme: Scheme, n: int, T: int, p: float, copies: Sequence[int]
) -> AbsorbingChain:
    """
    Open-loop chain over the fixed copy schedule.

    Copies 2.. of fragments other than the last carry a second row, the
    success logic state (LS): the fragment is already decoded and the
    receiver keeps listening until its copies are exhausted.
    """
    fail = 1.0 - p
    schedule = [(i, k) for i in range(1, n + 1) for k in range(1, copies[i - 1] + 1)]

    def rows_at(i: int, k: int) -> int:
        return 1 if k == 1 or i == n else 2

    transient: List[np.ndarray] = []
    absorbing: List[np.ndarray] = []
    labels: List[Tuple[str, ...]] = []
    for t, (i, k) in enumerate(schedule, start=1):
        name = f"{fragment_label(i)}{k}"
        rows = rows_at(i, k)
        labels.append((name,) if rows == 1 else (name, f"LS-{name}"))
        h = np.zeros((rows, 2))
        last_copy = k == copies[i - 1]
        q = np.zeros((rows, rows_at(*schedule[t]) if t < len(schedule) else 0))
        if i == n:
            h[0, 0] = p
            if last_copy:
                h[0, 1] = fail
            else:
                q[0, 0] = fail
        elif not last_copy:
            q[0, 0] = fail
            q[0, 1] = p
            if rows == 2:
                q[1, 1] = 1.0
        else:
            q[0, 0] = p
            h[0, 1] = fail
            if rows == 2:
                q[1, 0] = 1.0
        absorbing.append(h)
        if t < len(schedule):
            transient.append(q)
    return AbsorbingChain(
        scheme, n, T, p, tuple(transient), tuple(absorbing), tuple(labels), tuple(copies)
    )


def _check_copies(n: int, copies: Sequence[int], expected_total: int) -> Tuple[int, ...]:
    copies = tuple(int(c) for c in copies)
    if len(copies) != n or any(c < 1 for c in copies):
        raise ConfigurationError(f"copy counts {list(copies)} must be {n} positive integers")
    if sum(copies) != expected_total:
        raise ConfigurationError(
            f"copy counts {list(copies)} sum to {sum(copies)}, expected {expected_total}"
        )
    return copies


def build_olra(n: int, T: int, p: float, copies: Optional[Sequence[int]] = None) -> AbsorbingChain:
    """OLRA chain; ``copies`` defaults to the extra copies on the first T mod n fragments."""
    _check_window(n, T)
    p = _check_probability(p, "p")
    if copies is None:
        copies = repetition_plan(n, T, Scheme.OLRA).copies
    return _build_repetition_chain(Scheme.OLRA, n, T, p, _check_copies(n, copies, T))


def build_olra_es(n: int, T: int, p: float) -> AbsorbingChain:
    """OLRA-ES chain: floor(T/n) copies each, the T mod n leftover slots stay silent."""
    _check_window(n, T)
    p = _check_probability(p, "p")
    plan = repetition_plan(n, T, Scheme.OLRA_ES)
    return _build_repetition_chain(Scheme.OLRA_ES, n, T, p, plan.copies)


ProtocolState = Tuple[int, ...]
StepResult = Union[str, ProtocolState]


def protocol_schedule(scheme: Scheme, n: int, T: int, copies: Optional[Sequence[int]] = None):
    """(span, copies) of the slot schedule; copies is None for CLRA."""
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.CLRA:
        return T, None
    if scheme is Scheme.OLRA_ES:
        plan_copies = repetition_plan(n, T, Scheme.OLRA_ES).copies
    elif copies is None:
        plan_copies = repetition_plan(n, T, Scheme.OLRA).copies
    else:
        plan_copies = _check_copies(n, copies, T)
    return sum(plan_copies), plan_copies


def initial_state(scheme: Scheme) -> ProtocolState:
    # CLRA: (delivered, attempts on current fragment); open loop: (fragment, copy, decoded)
    return (0, 0) if Scheme.parse(scheme) is Scheme.CLRA else (1, 1, 0)


def protocol_step(
    scheme: Scheme,
    n: int,
    T: int,
    copies: Optional[Tuple[int, ...]],
    state: ProtocolState,
    t: int,
    delivered: bool,
) -> StepResult:
    """
    Apply one slot of the protocol rules to ``state`` at slot ``t``.

    ``delivered`` is the fragment outcome of the slot: decoded and
    acknowledged for CLRA, decoded for the open-loop schemes. Returns the
    next state or one of SUCCESS / TIMEOUT.
    """
    if scheme is Scheme.CLRA:
        done, attempts = state
        if delivered:
            done, attempts = done + 1, 0
            if done == n:
                return SUCCESS
        else:
            attempts += 1
        # remaining T - t slots must fit the pending fragments
        if n - done > T - t:
            return TIMEOUT
        return (done, attempts)

    fragment, copy, decoded = state
    decoded = 1 if (decoded or delivered) else 0
    if fragment == n and decoded:
        return SUCCESS
    if copy < copies[fragment - 1]:
        return (fragment, copy + 1, decoded)
    if not decoded:
        return TIMEOUT
    return (fragment + 1, 1, 0)


def build_reference_chain(
    scheme: Scheme,
    n: int,
    T: int,
    p: float,
    p_ack: float = 1.0,
    copies: Optional[Sequence[int]] = None,
) -> AbsorbingChain:
    """
    Chain built by forward exploration of the protocol state space.

    States are never lumped (CLRA keeps the attempt counter), so the block
    sizes differ from the closed-form builders while the absorption
    probabilities and delays agree.
    """
    scheme = Scheme.parse(scheme)
    _check_window(n, T)
    p = _check_probability(p, "p")
    p_ack = _check_probability(p_ack, "p_ack")
    span, plan_copies = protocol_schedule(scheme, n, T, copies)
    q_success = p * p_ack if scheme is Scheme.CLRA else p

    frontier: Dict[Hashable, int] = {initial_state(scheme): 0}
    transient: List[np.ndarray] = []
    absorbing: List[np.ndarray] = []
    labels: List[Tuple[str, ...]] = []
    for t in range(1, span + 1):
        states = sorted(frontier, key=frontier.get)
        labels.append(tuple(str(s) for s in states))
        following: Dict[Hashable, int] = {}
        entries: List[Tuple[int, Hashable, float]] = []
        h = np.zeros((len(states), 2))
        for row, state in enumerate(states):
            for delivered, prob in ((True, q_success), (False, 1.0 - q_success)):
                outcome = protocol_step(scheme, n, T, plan_copies, state, t, delivered)
                if outcome == SUCCESS:
                    h[row, 0] += prob
                elif outcome == TIMEOUT:
                    h[row, 1] += prob
                else:
                    if t == span:
                        raise ChainError(f"state {outcome} survives the final slot {t}")
                    following.setdefault(outcome, len(following))
                    entries.append((row, outcome, prob))
        absorbing.append(h)
        if t < span:
            q = np.zeros((len(states), len(following)))
            for row, target, prob in entries:
                q[row, following[target]] += prob
            transient.append(q)
        frontier = following
    logger.debug(
        "reference %s chain n=%d T=%d: %d states over %d slots",
        scheme.value, n, T, sum(len(l) for l in labels), span,
    )
    return AbsorbingChain(
        scheme, n, T, q_success, tuple(transient), tuple(absorbing), tuple(labels), plan_copies
    )


BUILDERS: Dict[Scheme, Callable[..., AbsorbingChain]] = {
    Scheme.CLRA: build_clra,
    Scheme.OLRA: build_olra,
    Scheme.OLRA_ES: build_olra_es,
}
