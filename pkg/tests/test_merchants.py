from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outageflow.labels import MerchantLabel, OutcomeKind
from outageflow.merchants import (
    MerchantParams,
    MerchantState,
    broadcast_severity,
    degradation_ratio,
    exposure_severity,
    outcome_counts,
    step_merchants,
    update_operational,
)

CLEAN = (10, 0, 0)
DEGRADED = (10, 3, 0)
FALLBACK = (10, 6, 0)


def _params(
    n: int = 1, dwell: float = 10.0, clean_required: int = 3, window_len: int = 1, idle_counts_clean: bool = True
) -> MerchantParams:
    return MerchantParams(
        theta_op1=np.full(n, 0.1),
        theta_op2=np.full(n, 0.5),
        dwell_init=np.full(n, dwell),
        eta=0.5,
        window_len=window_len,
        clean_required=clean_required,
        idle_counts_clean=idle_counts_clean,
    )


def _drive(script, params, comm_quality=1.0, sticky=True):
    """Feed one merchant a scripted sequence of per-step counts; return its state and label history."""
    state = MerchantState.initial(1, params.window_len)
    history = []
    for t, counts in enumerate(script):
        step_merchants(state, np.array([counts]), params, comm_quality, sticky=sticky, t=t)
        history.append((int(state.operational[0]), int(state.broadcast[0])))
    return state, history


def _episode(n_clean_after: int = 25):
    return [CLEAN] * 2 + [DEGRADED] * 5 + [CLEAN] * n_clean_after


@pytest.mark.parametrize(
    "counts, expected",
    [((0, 0, 0), 0.0), ((10, 2, 2), 0.3), ((10, 10, 0), 1.0)],
)
def test_degradation_ratio(counts, expected):
    params = MerchantParams(theta_op1=0.1, theta_op2=0.5, dwell_init=10.0, eta=0.5, epsilon=1e-9)
    assert degradation_ratio(*counts, params) == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize(
    "delta, expected",
    [(0.0, MerchantLabel.ACCEPTING), (0.1, MerchantLabel.DEGRADED), (0.5, MerchantLabel.FALLBACK), (0.09, MerchantLabel.ACCEPTING)],
)
def test_operational_thresholds_are_closed_on_the_left(delta, expected):
    params = MerchantParams(theta_op1=0.1, theta_op2=0.5, dwell_init=10.0)
    assert update_operational(delta, params) is expected


def test_scripted_episode_clears_after_dwell():
    state, history = _drive(_episode(), _params())
    operational = [op for op, _ in history]
    broadcast = [bc for _, bc in history]
    assert operational[:2] == [MerchantLabel.ACCEPTING] * 2
    assert operational[2:7] == [MerchantLabel.DEGRADED] * 5
    assert operational.index(MerchantLabel.ACCEPTING, 2) == 7
    assert state.operational_cleared_at[0] == 7
    assert broadcast.index(MerchantLabel.ACCEPTING, 2) == 17
    assert state.broadcast_cleared_at[0] == 17
    assert all(label == MerchantLabel.DEGRADED for label in broadcast[2:17])


def test_faster_communication_shortens_the_dwell():
    state, history = _drive(_episode(), _params(), comm_quality=2.0)
    assert state.broadcast_cleared_at[0] == 12


def test_clean_streak_requirement_can_dominate_the_timer():
    state, _ = _drive(_episode(), _params(clean_required=15))
    assert state.broadcast_cleared_at[0] == 7 + 14


def test_broadcast_never_clears_before_operations_and_streak():
    for dwell in (0.0, 1.0, 4.0, 10.0):
        for clean in (1, 3, 6):
            state, _ = _drive(_episode(), _params(dwell=dwell, clean_required=clean))
            s = int(state.operational_cleared_at[0])
            assert state.broadcast_cleared_at[0] >= s + clean - 1
            assert state.broadcast_cleared_at[0] >= s + int(dwell)


def test_never_degraded_merchant_stays_accepting():
    state, history = _drive([CLEAN] * 30, _params())
    assert all(bc == MerchantLabel.ACCEPTING for _, bc in history)
    assert not state.ever_degraded[0]
    assert state.broadcast_cleared_at[0] == -1


def test_broadcast_holds_the_most_severe_label_of_the_episode():
    script = [CLEAN, FALLBACK, DEGRADED, DEGRADED] + [CLEAN] * 20
    _, history = _drive(script, _params())
    assert [bc for _, bc in history[1:4]] == [MerchantLabel.FALLBACK] * 3
    assert history[2][0] == MerchantLabel.DEGRADED


def test_non_sticky_broadcast_mirrors_operations():
    state, history = _drive(_episode(), _params(), sticky=False)
    assert all(op == bc for op, bc in history)
    assert state.broadcast_cleared_at[0] == state.operational_cleared_at[0] == 7
    assert state.dwell_timer[0] == 0.0


def test_positive_timer_implies_broadcast_not_accepting():
    params = _params()
    state = MerchantState.initial(1, params.window_len)
    for t, counts in enumerate(_episode()):
        step_merchants(state, np.array([counts]), params, t=t)
        if state.dwell_timer[0] > 0:
            assert state.broadcast[0] != MerchantLabel.ACCEPTING


def test_clearance_is_censored_at_horizon():
    state, _ = _drive([CLEAN] * 2 + [DEGRADED] * 5 + [CLEAN] * 4, _params())
    op, bc = state.clearance_steps(horizon=11)
    assert op.tolist() == [7]
    assert bc.tolist() == [11]


def test_merchants_are_assessed_independently():
    params = _params(n=2)
    state = MerchantState.initial(2, params.window_len)
    for t in range(6):
        step_merchants(state, np.array([DEGRADED, CLEAN]), params, t=t)
    assert state.broadcast.tolist() == [MerchantLabel.DEGRADED, MerchantLabel.ACCEPTING]
    assert state.ever_degraded.tolist() == [True, False]
    assert state.label_counts().tolist() == [1, 1, 0]


def test_outcome_counts_ignore_idle_customers():
    counts = outcome_counts(
        np.array([-1, 0, 0, 1]),
        np.array([OutcomeKind.NONE, OutcomeKind.SUCCESS, OutcomeKind.FAILURE, OutcomeKind.UNKNOWN]),
        3,
        failure=OutcomeKind.FAILURE,
        unknown=OutcomeKind.UNKNOWN,
    )
    assert counts.tolist() == [[2, 1, 0], [1, 0, 1], [0, 0, 0]]


@pytest.mark.parametrize("label, expected", [(MerchantLabel.ACCEPTING, 0.0), (MerchantLabel.DEGRADED, 0.5), (MerchantLabel.FALLBACK, 1.0)])
def test_broadcast_severity(label, expected):
    assert broadcast_severity(label) == expected


def test_exposure_severity_weights_merchant_broadcasts():
    broadcast = np.array([0, 1, 2], dtype=np.int8)
    merchants = np.array([[0, 1], [2, 2]])
    weights = np.array([[0.5, 0.5], [1.0, 0.0]])
    assert exposure_severity(broadcast, merchants, weights).tolist() == [0.25, 1.0]


@settings(max_examples=100, deadline=None)
@given(
    window_len=st.integers(1, 8),
    script=st.lists(
        st.tuples(st.integers(0, 20), st.integers(0, 20), st.integers(0, 20)).map(
            lambda c: (c[0] + c[1] + c[2], c[1], c[2])
        ),
        min_size=1,
        max_size=30,
    ),
)
def test_window_totals_cover_exactly_the_last_steps(window_len, script):
    params = _params(window_len=window_len)
    state = MerchantState.initial(1, window_len)
    rows = np.array(script, dtype=np.int64)
    for t in range(len(script)):
        step_merchants(state, rows[t:t + 1], params, t=t)
        expected = rows[max(0, t + 1 - window_len):t + 1].sum(axis=0)
        assert state.window_totals()[0].tolist() == expected.tolist()


def test_idle_steps_extend_the_clean_streak_by_default():
    idle = (0, 0, 0)
    state, _ = _drive([CLEAN] * 2 + [DEGRADED] * 5 + [idle] * 25, _params())
    assert state.broadcast_cleared_at[0] == 17


def test_idle_steps_can_be_excluded_from_the_clean_streak():
    idle = (0, 0, 0)
    script = [CLEAN] * 2 + [DEGRADED] * 5 + [idle] * 20 + [CLEAN] * 5
    state, history = _drive(script, _params(idle_counts_clean=False))
    assert all(bc == MerchantLabel.DEGRADED for _, bc in history[2:29])
    assert state.broadcast_cleared_at[0] == 29


def test_dwell_timer_is_rearmed_on_every_degraded_step():
    params = _params(dwell=10.0)
    state = MerchantState.initial(1, params.window_len)
    script = [DEGRADED, DEGRADED, CLEAN, CLEAN, DEGRADED, CLEAN]
    timers = []
    for t, counts in enumerate(script):
        step_merchants(state, np.array([counts]), params, t=t)
        timers.append(float(state.dwell_timer[0]))
    assert timers == [10.0, 10.0, 9.0, 8.0, 10.0, 9.0]
