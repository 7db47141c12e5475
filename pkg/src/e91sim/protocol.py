"""Modified E91 run: basis choice, measurement, sifting, SKR/QBER, CHSH.

Events are held column-wise in :class:`EventLog` so that a 5e4-event run
costs a handful of numpy calls. Iterating an ``EventLog`` yields
:class:`MeasurementEvent` objects for code that wants one event at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from .analytic import Phase, ProtocolAngles
from .statevector import (
    JointOutcome,
    build_dephased_bell,
    cumulative_thresholds,
    joint_probabilities,
    pick_outcome,
)

ALICE_DIRECTIONS = (0, 1, 2)
BOB_DIRECTIONS = (1, 2, 3)
#: (alice_dir_index, bob_dir_index) pairs entering E01 + E23 - E03 + E21
CHSH_PAIRS = ((0, 1), (2, 3), (0, 3), (2, 1))
CHSH_SIGNS = (1, 1, -1, 1)

LKR = 0.0
IDENTITY_ATOL = 1e-12


class ProtocolError(Exception):
    pass


class DegenerateAnglesError(ProtocolError):
    """Coincident analyzers are parallel, so basis choice carries no secrecy."""


class NoCoincidentEventsError(ProtocolError):
    """No event was measured in a coincident basis; SKR is undefined."""


class InsufficientStatisticsError(ProtocolError):
    def __init__(self, pair):
        self.pair = pair
        super().__init__(f"no events for CHSH analyzer pair {pair}")


@dataclass(frozen=True)
class MeasurementEvent:
    alice_dir_index: int
    bob_dir_index: int
    outcome: JointOutcome

    def __post_init__(self):
        if self.alice_dir_index not in ALICE_DIRECTIONS:
            raise ValueError(f"alice_dir_index {self.alice_dir_index} not in 0..2")
        if self.bob_dir_index not in BOB_DIRECTIONS:
            raise ValueError(f"bob_dir_index {self.bob_dir_index} not in 1..3")

    @property
    def coincident(self) -> bool:
        return self.alice_dir_index == self.bob_dir_index


@dataclass
class EventLog:
    alice_dir: np.ndarray
    bob_dir: np.ndarray
    alice_bit: np.ndarray
    bob_bit: np.ndarray

    @classmethod
    def empty(cls) -> "EventLog":
        z = np.zeros(0, dtype=np.int8)
        return cls(z, z.copy(), z.copy(), z.copy())

    @classmethod
    def from_events(cls, events: Iterable[MeasurementEvent]) -> "EventLog":
        events = list(events)
        if not events:
            return cls.empty()
        cols = np.array(
            [
                (e.alice_dir_index, e.bob_dir_index, e.outcome.alice_bit, e.outcome.bob_bit)
                for e in events
            ],
            dtype=np.int8,
        )
        return cls(cols[:, 0], cols[:, 1], cols[:, 2], cols[:, 3])

    def __len__(self):
        return len(self.alice_dir)

    def __getitem__(self, i) -> MeasurementEvent:
        return MeasurementEvent(
            int(self.alice_dir[i]),
            int(self.bob_dir[i]),
            JointOutcome(int(self.alice_bit[i]), int(self.bob_bit[i])),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def select(self, mask: np.ndarray) -> "EventLog":
        return EventLog(
            self.alice_dir[mask], self.bob_dir[mask], self.alice_bit[mask], self.bob_bit[mask]
        )

    @property
    def coincident(self) -> np.ndarray:
        return self.alice_dir == self.bob_dir


@dataclass
class SiftedResult:
    key_bits_alice: np.ndarray
    key_bits_bob: np.ndarray
    bell_group: EventLog


@dataclass
class RunStats:
    n_events: int
    n_coincident: int
    n_correlated: int
    skr: float
    qber: float
    lkr: float = LKR
    cr_estimate: Optional[float] = None
    cr_pair_counts: dict = field(default_factory=dict)


def _as_log(events) -> EventLog:
    return events if isinstance(events, EventLog) else EventLog.from_events(events)


def sift(events: Union[EventLog, Iterable[MeasurementEvent]]) -> SiftedResult:
    """Split events into key material (same direction) and Bell-test material."""
    log = _as_log(events)
    mask = log.coincident
    return SiftedResult(
        key_bits_alice=log.alice_bit[mask].astype(np.uint8),
        key_bits_bob=log.bob_bit[mask].astype(np.uint8),
        bell_group=log.select(~mask),
    )


def _correlated(sifted: SiftedResult) -> tuple[int, int]:
    n = len(sifted.key_bits_alice)
    if n == 0:
        raise NoCoincidentEventsError("no events measured in coincident bases")
    agree = int(np.count_nonzero(sifted.key_bits_alice == sifted.key_bits_bob))
    return agree, n


def compute_skr(sifted: SiftedResult) -> float:
    agree, n = _correlated(sifted)
    return agree / n


def compute_qber(sifted: SiftedResult) -> float:
    return 1.0 - compute_skr(sifted)


def estimate_chsh(sifted: SiftedResult, angles: ProtocolAngles = None):
    """Plug-in CHSH estimate from the mismatched-basis events.

    Returns ``(cr_estimate, pair_counts)``; events from pairs outside the
    four CHSH pairs are ignored. ``angles`` is accepted for symmetry with
    the analytic side and does not alter the estimator.
    """
    bell = sifted.bell_group
    # product of +/-1 values is +1 exactly when the bits agree
    same = bell.alice_bit == bell.bob_bit
    cr = 0.0
    counts = {}
    for (a, b), sign in zip(CHSH_PAIRS, CHSH_SIGNS):
        mask = (bell.alice_dir == a) & (bell.bob_dir == b)
        n = int(np.count_nonzero(mask))
        if n == 0:
            raise InsufficientStatisticsError((a, b))
        n_same = int(np.count_nonzero(same & mask))
        cr += sign * (2 * n_same - n) / n
        counts[(a, b)] = n
    return cr, counts


def security_identity_check(stats: RunStats) -> bool:
    return abs(stats.skr + stats.qber + stats.lkr - 1.0) <= IDENTITY_ATOL


def substreams(seed: int) -> tuple[np.random.Generator, ...]:
    """Independent generators for Alice's choices, Bob's choices, outcomes."""
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.Generator(np.random.PCG64(s)) for s in children)


def run_protocol(
    angles: ProtocolAngles,
    theta,
    n_events: int,
    seed: int,
    allow_degenerate: bool = False,
) -> tuple[EventLog, RunStats]:
    """Execute ``n_events`` transmissions and aggregate the run statistics.

    Direction indices are drawn uniformly and independently; each outcome
    uses one uniform variate against the cumulative thresholds of the
    joint probabilities for the chosen analyzer pair.
    """
    if n_events < 1:
        raise ValueError(f"n_events must be >= 1, got {n_events}")
    if angles.degenerate and not allow_degenerate:
        raise DegenerateAnglesError(
            f"beta={angles.beta!r} is a multiple of pi; pass allow_degenerate to run anyway"
        )
    if not isinstance(theta, Phase):
        theta = Phase(theta)
    rng_alice, rng_bob, rng_outcome = substreams(seed)
    alice_dir = rng_alice.integers(0, 3, size=n_events).astype(np.int8)
    bob_dir = (rng_bob.integers(0, 3, size=n_events) + 1).astype(np.int8)
    u = rng_outcome.random(n_events)

    state = build_dephased_bell(theta)
    directions = angles.directions
    outcome = np.empty(n_events, dtype=np.int8)
    for a in ALICE_DIRECTIONS:
        for b in BOB_DIRECTIONS:
            mask = (alice_dir == a) & (bob_dir == b)
            if not mask.any():
                continue
            probs = joint_probabilities(state, directions[a], directions[b])
            outcome[mask] = pick_outcome(u[mask], cumulative_thresholds(probs))

    log = EventLog(alice_dir, bob_dir, outcome >> 1, outcome & 1)
    return log, summarize(log)


def summarize(events: Union[EventLog, Iterable[MeasurementEvent]]) -> RunStats:
    log = _as_log(events)
    sifted = sift(log)
    agree, n_coinc = _correlated(sifted)
    skr = agree / n_coinc
    try:
        cr, counts = estimate_chsh(sifted)
    except InsufficientStatisticsError:
        cr = None
        bell = sifted.bell_group
        counts = {
            (a, b): int(np.count_nonzero((bell.alice_dir == a) & (bell.bob_dir == b)))
            for a, b in CHSH_PAIRS
        }
    return RunStats(
        n_events=len(log),
        n_coincident=n_coinc,
        n_correlated=agree,
        skr=skr,
        qber=1.0 - skr,
        cr_estimate=cr,
        cr_pair_counts=counts,
    )
