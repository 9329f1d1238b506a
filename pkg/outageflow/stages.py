"""One function per phase of a simulation step, each ``fn(state, config) -> state``."""
from __future__ import annotations

import logging
import math

import numpy as np

from .agents import select_merchants
from .behavior import (
    attempt_probability,
    composite_perception,
    experience_values,
    outflow_signal,
    transition_mode,
    update_rumor,
    update_scar,
    update_trust,
)
from .config import SimulationConfig
from .labels import MerchantLabel, Mode, OutcomeKind
from .liquidity import WithdrawalEvent, decide_withdrawals, substitute, substitution_draws
from .merchants import broadcast_severity, exposure_severity, outcome_counts, step_merchants
from .network import avoiding_fractions
from .state import MetricsFrame, StepState

log = logging.getLogger(__name__)


def infrastructure_stage(state: StepState, config: SimulationConfig) -> StepState:
    """Set this step's outcome probabilities and demand; freeze start-of-step modes and broadcasts."""
    t = state.t
    state.p_success = float(state.timeline.p_success[t])
    state.p_failure = float(state.timeline.p_failure[t])
    state.demand = float(state.timeline.demand[t])
    state.snapshot_modes = state.population.customers.mode.copy()
    state.snapshot_broadcast = state.population.merchants.broadcast.copy()
    return state


def payments_stage(state: StepState, config: SimulationConfig) -> StepState:
    """Attempt decisions, merchant choice, card outcomes, then optional substitution."""
    pop = state.population
    n = state.n_customers
    beh = config.behavior
    activity = (beh.activity_ok, beh.activity_frustrated, beh.activity_avoiding)

    u_attempt = state.streams.attempts.random(n)
    u_select = state.streams.attempts.random(n)
    attempted = u_attempt < attempt_probability(pop.params, state.snapshot_modes, state.demand, activity)
    state.merchant_ids = np.where(attempted, select_merchants(pop.exposure, u_select), -1)

    u_outcome = state.streams.outcomes.random(n)
    kinds = np.select(
        [u_outcome < state.p_success, u_outcome < state.p_success + state.p_failure],
        [OutcomeKind.SUCCESS, OutcomeKind.FAILURE],
        default=OutcomeKind.UNKNOWN,
    ).astype(np.int8)
    state.card_kinds = np.where(attempted, kinds, OutcomeKind.NONE).astype(np.int8)

    u_sub = substitution_draws(config.substitution, state.streams.substitution, n)
    state.final_kinds, state.substituted = substitute(state.card_kinds, pop.params.adopter, config.substitution, u_sub)
    return state


def merchants_stage(state: StepState, config: SimulationConfig) -> StepState:
    """Merchants record card outcomes (never substituted ones) and reassess their labels."""
    mer = state.population.merchants
    counts = outcome_counts(
        state.merchant_ids,
        state.card_kinds,
        mer.n_merchants,
        failure=OutcomeKind.FAILURE,
        unknown=OutcomeKind.UNKNOWN,
    )
    step_merchants(
        mer,
        counts,
        state.population.merchant_params,
        config.merchants.comm_quality,
        sticky=config.merchants.sticky_broadcasts,
        t=state.t,
    )
    return state


def customers_stage(state: StepState, config: SimulationConfig) -> StepState:
    """Scar, trust, rumor and mode advance from start-of-step values; withdrawals read the result."""
    pop = state.population
    params, cust = pop.params, pop.customers
    beh = config.behavior

    broadcast = state.snapshot_broadcast if beh.perception_timing == "lagged" else pop.merchants.broadcast
    severity = exposure_severity(broadcast, pop.exposure.merchants, pop.exposure.weights)
    avoiding = avoiding_fractions(state.graph, state.snapshot_modes)
    feedback = outflow_signal(state.previous_outflow, state.total_initial_balance, beh.outflow_reference)
    state.psi = composite_perception(
        severity, avoiding, beh.broadcast_weight, beh.social_weight, feedback, beh.outflow_feedback_weight
    )

    trust_prev, scar_prev = cust.trust, cust.scar
    signal = experience_values(state.final_kinds, beh.failure_severity, beh.unknown_severity, trust_prev)
    cust.scar = update_scar(scar_prev, params, signal)
    cust.trust = update_trust(trust_prev, scar_prev, params, signal)
    cust.rumor = update_rumor(cust.rumor, params, state.psi)
    cust.mode = transition_mode(trust_prev, scar_prev, params)

    u_withdraw = state.streams.withdrawals.random(state.n_customers)
    withdraw, amounts = decide_withdrawals(cust, params, u_withdraw)
    ids = np.flatnonzero(withdraw)
    cust.balance = np.where(withdraw, cust.balance - amounts, cust.balance)
    for i in ids.tolist():
        state.events.append(
            WithdrawalEvent(
                customer=i,
                step=state.t,
                amount=float(amounts[i]),
                balance_after=float(cust.balance[i]),
                mode=int(cust.mode[i]),
                scar=float(cust.scar[i]),
                rumor=float(cust.rumor[i]),
            )
        )
    state.outflow = math.fsum(amounts[ids].tolist())
    return state


def metrics_stage(state: StepState, config: SimulationConfig) -> StepState:
    """Record the step's system aggregates and advance the clock."""
    pop = state.population
    cust, mer = pop.customers, pop.merchants
    n = state.n_customers

    modes = np.bincount(cust.mode, minlength=len(Mode)) / n
    card = np.bincount(state.card_kinds, minlength=len(OutcomeKind))
    adverse = int(card[OutcomeKind.FAILURE] + card[OutcomeKind.UNKNOWN])
    swapped = int(np.count_nonzero(state.substituted))
    labels = mer.label_counts()

    state.adverse_total += adverse
    state.substituted_total += swapped
    state.cumulative_outflow += state.outflow
    frame = MetricsFrame(
        t=state.t,
        p_success=state.p_success,
        demand=state.demand,
        frac_ok=float(modes[Mode.OK]),
        frac_frustrated=float(modes[Mode.FRUSTRATED]),
        frac_avoiding=float(modes[Mode.AVOIDING]),
        mean_trust=float(cust.trust.mean()),
        mean_scar=float(cust.scar.mean()),
        mean_rumor=float(cust.rumor.mean()),
        mean_broadcast_severity=float(broadcast_severity(mer.broadcast).mean()),
        attempts=int(n - card[OutcomeKind.NONE]),
        successes=int(card[OutcomeKind.SUCCESS]),
        failures=int(card[OutcomeKind.FAILURE]),
        unknowns=int(card[OutcomeKind.UNKNOWN]),
        substitution_rate=swapped / adverse if adverse else 0.0,
        outflow=state.outflow,
        cumulative_outflow=state.cumulative_outflow,
        broadcast_accepting=int(labels[MerchantLabel.ACCEPTING]),
        broadcast_degraded=int(labels[MerchantLabel.DEGRADED]),
        broadcast_fallback=int(labels[MerchantLabel.FALLBACK]),
    )
    state.frames.append(frame)
    if log.isEnabledFor(logging.DEBUG) and (state.t % 25 == 0 or state.outflow > 0.0):
        log.debug(
            "t=%d p_s=%.3f avoiding=%.3f outflow=%.5f", state.t, state.p_success, frame.frac_avoiding, state.outflow
        )
    state.previous_outflow = state.outflow
    state.t += 1
    return state
