"""Withdrawal gating and decisions, balance outflows, and the instant-transfer substitution channel."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Tuple, Union

import numpy as np
from scipy.special import expit

from .agents import CustomerParams, CustomerState
from .behavior import PaymentOutcome
from .config import SubstitutionConfig
from .labels import Mode, OutcomeKind

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class WithdrawalEvent:
    customer: int
    step: int
    amount: float
    balance_after: float
    # Decision-time state, kept for eligibility audits.
    mode: int = Mode.AVOIDING
    scar: float = 0.0
    rumor: float = 0.0

    def __post_init__(self) -> None:
        if not self.amount > 0.0:
            raise ValueError("withdrawal amount must be positive")
        if self.balance_after < 0.0:
            raise ValueError("withdrawal cannot overdraw the balance")


def is_eligible(state: CustomerState, params: CustomerParams):
    ok = (np.asarray(state.mode) == Mode.AVOIDING) & (state.scar >= params.theta_C_w) & (state.rumor >= params.theta_R_w)
    return bool(ok) if np.ndim(ok) == 0 else ok


def withdrawal_probability(state: CustomerState, params: CustomerParams) -> ArrayLike:
    x = params.alpha_R * state.rumor + params.alpha_C * state.scar - params.alpha_T * state.trust
    p = expit(x)
    return float(p) if np.ndim(p) == 0 else p


def apply_withdrawal(
    state: CustomerState, params: CustomerParams, *, customer: int = 0, step: int = 0
) -> Tuple[CustomerState, Optional[WithdrawalEvent]]:
    """Withdraw ``omega`` of the remaining balance for one customer (scalar views)."""
    if state.balance <= 0.0:
        return state, None
    amount = params.omega * state.balance
    balance_after = state.balance - amount
    event = WithdrawalEvent(
        customer=customer,
        step=step,
        amount=float(amount),
        balance_after=float(balance_after),
        mode=int(state.mode),
        scar=float(state.scar),
        rumor=float(state.rumor),
    )
    return replace(state, balance=float(balance_after)), event


def aggregate_outflow(events: Iterable[WithdrawalEvent]) -> float:
    return math.fsum(e.amount for e in events)


def decide_withdrawals(
    customers: CustomerState, params: CustomerParams, u: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Withdrawal mask and amounts for every customer given one uniform each.

    Reads the already-updated state of the step; balances are not modified here.
    """
    eligible = is_eligible(customers, params)
    withdraw = eligible & (u < withdrawal_probability(customers, params)) & (customers.balance > 0.0)
    amounts = np.where(withdraw, params.omega * customers.balance, 0.0)
    return withdraw, amounts


def substitution_draws(config: SubstitutionConfig, rng: np.random.Generator, n: int) -> Optional[np.ndarray]:
    """One uniform per customer when substitution is enabled, none otherwise."""
    return rng.random(n) if config.enabled else None


def substitute(
    kinds: np.ndarray, adopter: np.ndarray, config: SubstitutionConfig, u: Optional[np.ndarray]
) -> Tuple[np.ndarray, np.ndarray]:
    """Final customer-side outcome kinds and the mask of substituted payments."""
    if not config.enabled or u is None:
        return kinds, np.zeros(kinds.shape, dtype=bool)
    adverse = (kinds == OutcomeKind.FAILURE) | (kinds == OutcomeKind.UNKNOWN)
    swapped = adverse & adopter & (u < config.usage_prob * config.transfer_success_prob)
    return np.where(swapped, OutcomeKind.SUCCESS, kinds).astype(kinds.dtype), swapped


def try_substitution(
    outcome: PaymentOutcome, adopter: bool, config: SubstitutionConfig, rng: np.random.Generator
) -> PaymentOutcome:
    """Scalar form of ``substitute``; draws from ``rng`` only when substitution is enabled."""
    if not config.enabled:
        return outcome
    u = rng.random()
    if adopter and outcome.adverse and u < config.usage_prob * config.transfer_success_prob:
        return PaymentOutcome(OutcomeKind.SUCCESS, via_substitution=True)
    return outcome
