"""Merchant-side assessment: rolling outcome windows, operational labels, sticky broadcasts."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .labels import SEVERITY, MerchantLabel

log = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

ATTEMPTS, FAILURES, UNKNOWNS = 0, 1, 2


@dataclass(frozen=True)
class MerchantParams:
    theta_op1: np.ndarray
    theta_op2: np.ndarray
    dwell_init: np.ndarray
    eta: float = 0.7
    epsilon: float = 1e-9
    window_len: int = 10
    clean_required: int = 3
    idle_counts_clean: bool = True

    def __post_init__(self) -> None:
        t1, t2 = np.asarray(self.theta_op1), np.asarray(self.theta_op2)
        if np.any(t1 <= 0.0) or np.any(t2 <= t1):
            raise ValueError("merchant thresholds must satisfy theta_op2 > theta_op1 > 0")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if self.window_len < 1:
            raise ValueError("window_len must be at least 1")

    @property
    def n_merchants(self) -> int:
        return int(np.size(self.theta_op1))

    def take(self, m: int) -> "MerchantParams":
        return replace(
            self,
            theta_op1=float(self.theta_op1[m]),
            theta_op2=float(self.theta_op2[m]),
            dwell_init=float(self.dwell_init[m]),
        )


@dataclass
class MerchantState:
    """Per-merchant arrays; ``window`` is a ring buffer of (attempts, failures, unknowns) per step."""

    window: np.ndarray
    operational: np.ndarray
    broadcast: np.ndarray
    dwell_timer: np.ndarray
    clean_streak: np.ndarray
    cursor: int = 0
    ever_degraded: Optional[np.ndarray] = None
    # Step of the most recent return to ACCEPTING, -1 if none yet.
    operational_cleared_at: Optional[np.ndarray] = None
    broadcast_cleared_at: Optional[np.ndarray] = None
    steps: int = field(default=0)

    def __post_init__(self) -> None:
        m = self.operational.shape[0]
        if self.ever_degraded is None:
            self.ever_degraded = np.zeros(m, dtype=bool)
        if self.operational_cleared_at is None:
            self.operational_cleared_at = np.full(m, -1, dtype=np.int64)
        if self.broadcast_cleared_at is None:
            self.broadcast_cleared_at = np.full(m, -1, dtype=np.int64)

    @classmethod
    def initial(cls, n_merchants: int, window_len: int) -> "MerchantState":
        return cls(
            window=np.zeros((n_merchants, window_len, 3), dtype=np.int64),
            operational=np.full(n_merchants, MerchantLabel.ACCEPTING, dtype=np.int8),
            broadcast=np.full(n_merchants, MerchantLabel.ACCEPTING, dtype=np.int8),
            dwell_timer=np.zeros(n_merchants),
            clean_streak=np.zeros(n_merchants, dtype=np.int64),
        )

    @property
    def n_merchants(self) -> int:
        return int(self.operational.shape[0])

    def copy(self) -> "MerchantState":
        return MerchantState(
            window=self.window.copy(),
            operational=self.operational.copy(),
            broadcast=self.broadcast.copy(),
            dwell_timer=self.dwell_timer.copy(),
            clean_streak=self.clean_streak.copy(),
            cursor=self.cursor,
            ever_degraded=self.ever_degraded.copy(),
            operational_cleared_at=self.operational_cleared_at.copy(),
            broadcast_cleared_at=self.broadcast_cleared_at.copy(),
            steps=self.steps,
        )

    def record(self, counts: np.ndarray) -> None:
        """Push one step of per-merchant (attempts, failures, unknowns) counts."""
        self.window[:, self.cursor, :] = counts
        self.cursor = (self.cursor + 1) % self.window.shape[1]

    def window_totals(self) -> np.ndarray:
        return self.window.sum(axis=1)

    def label_counts(self) -> np.ndarray:
        return np.bincount(self.broadcast, minlength=len(MerchantLabel))

    def clearance_steps(self, horizon: int) -> tuple[np.ndarray, np.ndarray]:
        """Operational and broadcast clearance steps for merchants that ever degraded.

        A label still away from ACCEPTING at the end of the run counts as clearing at ``horizon``.
        """
        mask = self.ever_degraded
        op = np.where(self.operational != MerchantLabel.ACCEPTING, horizon, self.operational_cleared_at)
        bc = np.where(self.broadcast != MerchantLabel.ACCEPTING, horizon, self.broadcast_cleared_at)
        return op[mask], bc[mask]


def outcome_counts(merchant_ids: np.ndarray, kinds: np.ndarray, n_merchants: int, *, failure: int, unknown: int) -> np.ndarray:
    """Tally per-merchant attempts, failures, and unknowns from per-customer card outcomes.

    ``merchant_ids`` holds -1 for customers that did not attempt.
    """
    attempted = merchant_ids >= 0
    ids = merchant_ids[attempted]
    k = kinds[attempted]
    counts = np.empty((n_merchants, 3), dtype=np.int64)
    counts[:, ATTEMPTS] = np.bincount(ids, minlength=n_merchants)
    counts[:, FAILURES] = np.bincount(ids[k == failure], minlength=n_merchants)
    counts[:, UNKNOWNS] = np.bincount(ids[k == unknown], minlength=n_merchants)
    return counts


def degradation_ratio(attempts: ArrayLike, failures: ArrayLike, unknowns: ArrayLike, params: MerchantParams) -> ArrayLike:
    return (failures + params.eta * unknowns) / (attempts + params.epsilon)


def update_operational(delta: ArrayLike, params: MerchantParams):
    labels = np.where(
        delta >= params.theta_op2,
        MerchantLabel.FALLBACK,
        np.where(delta >= params.theta_op1, MerchantLabel.DEGRADED, MerchantLabel.ACCEPTING),
    ).astype(np.int8)
    if labels.ndim == 0:
        return MerchantLabel(int(labels))
    return labels


def update_broadcast(
    state: MerchantState,
    operational: np.ndarray,
    params: MerchantParams,
    comm_quality: float = 1.0,
    *,
    sticky: bool = True,
    t: Optional[int] = None,
    idle: Optional[np.ndarray] = None,
) -> MerchantState:
    """Advance operational labels and the sticky broadcast machine by one step, in place.

    The dwell timer is re-armed to ``dwell_init`` on every step while operations are
    degraded, not only on entry, and the broadcast holds the most severe label of the
    episode. Once operations are ACCEPTING the timer decays by ``comm_quality`` per
    step; the broadcast clears
    when the timer has run out and ``clean_required`` clean steps have accumulated.
    ``idle`` flags merchants without attempts this step; unless
    ``params.idle_counts_clean`` they keep their streak instead of extending it.
    """
    t = state.steps if t is None else t
    acc = MerchantLabel.ACCEPTING
    operational = np.asarray(operational, dtype=np.int8)
    degraded = operational != acc

    was_op_degraded = state.operational != acc
    was_bc_degraded = state.broadcast != acc
    grows = ~degraded
    if idle is not None and not params.idle_counts_clean:
        grows &= ~np.asarray(idle, dtype=bool)
    state.clean_streak = np.where(degraded, 0, np.where(grows, state.clean_streak + 1, state.clean_streak))

    if sticky:
        state.dwell_timer = np.where(degraded, params.dwell_init, state.dwell_timer)
        state.broadcast = np.where(degraded, np.maximum(state.broadcast, operational), state.broadcast).astype(np.int8)
        clear = ~degraded & (state.broadcast != acc) & (state.dwell_timer <= 0) & (state.clean_streak >= params.clean_required)
        state.broadcast[clear] = acc
        decay = ~degraded & (state.dwell_timer > 0)
        state.dwell_timer = np.where(decay, np.maximum(0.0, state.dwell_timer - comm_quality), state.dwell_timer)
    else:
        state.broadcast = operational.copy()
        state.dwell_timer = np.zeros_like(state.dwell_timer)

    state.ever_degraded |= degraded
    state.operational_cleared_at[was_op_degraded & ~degraded] = t
    state.broadcast_cleared_at[was_bc_degraded & (state.broadcast == acc)] = t
    state.operational = operational.copy()
    state.steps = t + 1
    return state


def step_merchants(
    state: MerchantState,
    counts: np.ndarray,
    params: MerchantParams,
    comm_quality: float = 1.0,
    *,
    sticky: bool = True,
    t: Optional[int] = None,
) -> MerchantState:
    """Record one step of outcomes, reassess every merchant, and update broadcasts."""
    state.record(counts)
    totals = state.window_totals()
    delta = degradation_ratio(totals[:, ATTEMPTS], totals[:, FAILURES], totals[:, UNKNOWNS], params)
    return update_broadcast(
        state,
        update_operational(delta, params),
        params,
        comm_quality,
        sticky=sticky,
        t=t,
        idle=counts[:, ATTEMPTS] == 0,
    )


def broadcast_severity(label):
    values = SEVERITY[np.asarray(label, dtype=np.intp)]
    return float(values) if np.ndim(values) == 0 else values


def exposure_severity(broadcast: np.ndarray, merchant_ids: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Exposure-weighted mean broadcast severity over each customer's merchants.

    Accumulated column by column, left to right.
    """
    weighted = SEVERITY[broadcast[merchant_ids]] * weights
    total = np.zeros(weighted.shape[0])
    for j in range(weighted.shape[1]):
        total = total + weighted[:, j]
    return total
