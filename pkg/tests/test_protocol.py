import math

import numpy as np
import pytest

from e91sim.analytic import ProtocolAngles, chsh_cr, corr_coefficient, p_corr
from e91sim.protocol import (
    CHSH_PAIRS,
    DegenerateAnglesError,
    EventLog,
    InsufficientStatisticsError,
    MeasurementEvent,
    NoCoincidentEventsError,
    RunStats,
    SiftedResult,
    compute_qber,
    compute_skr,
    estimate_chsh,
    run_protocol,
    security_identity_check,
    sift,
    substreams,
)
from e91sim.statevector import JointOutcome, build_dephased_bell, sample_outcome

PI = math.pi
EKERT = ProtocolAngles(PI / 8, PI / 8)


def ev(a, b, abit=0, bbit=0):
    return MeasurementEvent(a, b, JointOutcome(abit, bbit))


def keys(alice, bob):
    return SiftedResult(
        np.array([int(c) for c in alice], dtype=np.uint8),
        np.array([int(c) for c in bob], dtype=np.uint8),
        EventLog.empty(),
    )


def test_measurement_event_validates_indices():
    with pytest.raises(ValueError):
        ev(3, 1)
    with pytest.raises(ValueError):
        ev(0, 0)
    assert ev(1, 1).coincident and ev(2, 2).coincident and not ev(0, 1).coincident


def test_sift_examples():
    s = sift([])
    assert len(s.key_bits_alice) == len(s.key_bits_bob) == len(s.bell_group) == 0
    s = sift([ev(1, 1, 1, 0)])
    assert list(s.key_bits_alice) == [1] and list(s.key_bits_bob) == [0]
    assert len(s.bell_group) == 0
    # enumerate the 3x3 direction grid; only (1,1) and (2,2) coincide
    events = [ev(a, b, (a + b) % 2, a % 2) for a in (0, 1, 2) for b in (1, 2, 3)]
    s = sift(events)
    assert len(s.key_bits_alice) == 2
    assert len(s.bell_group) == 7
    assert [(e.alice_dir_index, e.bob_dir_index) for e in s.bell_group] == [
        (a, b) for a in (0, 1, 2) for b in (1, 2, 3) if a != b
    ]


def test_sift_preserves_order():
    events = [ev(2, 2, 1, 1), ev(0, 3), ev(1, 1, 0, 1), ev(2, 1, 1, 0), ev(1, 1, 1, 1)]
    s = sift(events)
    assert list(s.key_bits_alice) == [1, 0, 1]
    assert list(s.key_bits_bob) == [1, 1, 1]
    assert list(s.bell_group) == [events[1], events[3]]


def test_skr_and_qber():
    assert compute_skr(keys("0110", "0110")) == 1.0
    assert compute_skr(keys("0110", "1001")) == 0.0
    assert compute_skr(keys("0110", "0100")) == 0.75
    assert compute_qber(keys("0110", "0110")) == 0.0
    assert compute_qber(keys("0110", "1001")) == 1.0
    assert compute_qber(keys("0110", "0100")) == 0.25
    with pytest.raises(NoCoincidentEventsError):
        compute_skr(keys("", ""))
    with pytest.raises(NoCoincidentEventsError):
        compute_qber(keys("", ""))


def test_estimate_chsh_hand_built():
    bell = [ev(a, b, 0, 0) for a, b in CHSH_PAIRS] + [ev(1, 3, 0, 1)]
    cr, counts = estimate_chsh(sift(bell), EKERT)
    assert cr == 2.0
    assert counts == {p: 1 for p in CHSH_PAIRS}


def test_estimate_chsh_names_missing_pair():
    bell = [ev(a, b) for a, b in CHSH_PAIRS if (a, b) != (0, 3)]
    with pytest.raises(InsufficientStatisticsError) as info:
        estimate_chsh(sift(bell), EKERT)
    assert info.value.pair == (0, 3)
    assert "(0, 3)" in str(info.value)


def test_security_identity_examples():
    assert security_identity_check(RunStats(1, 1, 1, 1.0, 0.0, 0.0))
    assert security_identity_check(RunStats(1, 1, 1, 0.25, 0.75, 0.0))
    assert not security_identity_check(RunStats(1, 1, 1, 0.5, 0.4, 0.0))


def test_run_protocol_examples():
    _, st = run_protocol(EKERT, 0.0, 50_000, 3)
    assert st.skr == 1.0
    _, st = run_protocol(EKERT, PI, 50_000, 3)
    assert abs(st.skr - 0.25) <= 0.017
    _, st = run_protocol(ProtocolAngles(PI / 4, PI / 2), PI, 50_000, 3)
    assert st.skr == 0.0


def test_run_protocol_errors():
    with pytest.raises(DegenerateAnglesError):
        run_protocol(ProtocolAngles(PI / 8, 0.0), 0.3, 100, 0)
    with pytest.raises(DegenerateAnglesError):
        run_protocol(ProtocolAngles(PI / 8, PI), 0.3, 100, 0)
    run_protocol(ProtocolAngles(PI / 8, PI), 0.3, 100, 0, allow_degenerate=True)
    with pytest.raises(ValueError):
        run_protocol(EKERT, 0.3, 0, 0)


def test_run_stats_invariants():
    events, st = run_protocol(EKERT, 1.2, 20_000, 9)
    assert st.n_events == len(events) == 20_000
    assert st.skr == st.n_correlated / st.n_coincident
    assert st.skr + st.qber + st.lkr == 1.0
    assert st.lkr == 0.0
    s = sift(events)
    assert len(s.key_bits_alice) == st.n_coincident
    assert compute_skr(s) == st.skr
    assert estimate_chsh(s, EKERT) == (st.cr_estimate, st.cr_pair_counts)
    assert set(np.unique(events.alice_dir)) == {0, 1, 2}
    assert set(np.unique(events.bob_dir)) == {1, 2, 3}


def test_run_is_deterministic():
    e1, s1 = run_protocol(EKERT, 2.2, 5_000, 123)
    e2, s2 = run_protocol(EKERT, 2.2, 5_000, 123)
    for col in ("alice_dir", "bob_dir", "alice_bit", "bob_bit"):
        assert np.array_equal(getattr(e1, col), getattr(e2, col))
    assert s1 == s2
    _, s3 = run_protocol(EKERT, 2.2, 5_000, 124)
    assert s3 != s1


def test_vectorized_run_matches_per_event_sampling():
    angles = ProtocolAngles(0.3, 0.8)
    theta = 2.5
    events, _ = run_protocol(angles, theta, 2_000, 55)
    _, _, rng_outcome = substreams(55)
    state = build_dephased_bell(theta)
    d = angles.directions
    for e in events:
        o = sample_outcome(state, d[e.alice_dir_index], d[e.bob_dir_index], rng_outcome)
        assert o == e.outcome


def test_coincidence_fraction():
    n = 50_000
    _, st = run_protocol(EKERT, 0.5, n, 31)
    tol = 4 * math.sqrt((2 / 9) * (7 / 9) / n)
    assert abs(st.n_coincident / n - 2 / 9) <= tol


def test_skr_converges_to_analytic_on_random_sample():
    rng = np.random.default_rng(1234)
    n = 50_000
    for i in range(100):
        alpha, beta, theta = rng.uniform([0, 0.05, 0], [PI, PI - 0.05, 2 * PI])
        angles = ProtocolAngles(alpha, beta)
        _, st = run_protocol(angles, theta, n, i)
        p = float(p_corr(angles, theta))
        sigma = math.sqrt(p * (1 - p) / st.n_coincident)
        assert abs(st.skr - p) <= 4 * sigma + 1e-12
        assert security_identity_check(st)


def test_chsh_converges_within_plugin_variance():
    rng = np.random.default_rng(99)
    for i in range(30):
        alpha, beta, theta = rng.uniform([0, 0.05, 0], [PI, PI - 0.05, 2 * PI])
        angles = ProtocolAngles(alpha, beta)
        _, st = run_protocol(angles, theta, 50_000, 1000 + i)
        d = angles.directions
        var = sum(
            (1 - corr_coefficient(d[a], d[b], theta) ** 2) / st.cr_pair_counts[(a, b)]
            for a, b in CHSH_PAIRS
        )
        assert abs(st.cr_estimate - chsh_cr(angles, theta)) <= 5 * math.sqrt(var) + 1e-12
        assert abs(st.cr_estimate) <= 2 * math.sqrt(2) + 5 * math.sqrt(var)


def test_chsh_examples():
    _, st = run_protocol(EKERT, 0.0, 50_000, 5)
    assert abs(abs(st.cr_estimate) - 2 * math.sqrt(2)) <= 0.1
    _, st = run_protocol(EKERT, PI, 50_000, 5)
    assert abs(st.cr_estimate) <= 0.1


def test_event_log_round_trip():
    events, _ = run_protocol(EKERT, 1.0, 300, 8)
    rebuilt = EventLog.from_events(list(events))
    for col in ("alice_dir", "bob_dir", "alice_bit", "bob_bit"):
        assert np.array_equal(getattr(rebuilt, col), getattr(events, col))
