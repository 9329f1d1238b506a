"""Invariant audits over a simulated run, used by the ``check`` command and the tests."""
from __future__ import annotations

import copy
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from .config import SimulationConfig
from .engine import run
from .labels import MerchantLabel
from .liquidity import is_eligible
from .state import RunResult, StepState

log = logging.getLogger(__name__)

TOL = 1e-9


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    detail: str = ""


class PropertyFailure(AssertionError):
    def __init__(self, failures: List[PropertyResult]) -> None:
        super().__init__("; ".join(f"{r.name}: {r.detail}" for r in failures))
        self.failures = failures


@dataclass
class StepMonitor:
    """``on_step`` hook recording per-step invariant violations."""

    range_violations: List[str] = field(default_factory=list)
    balance_violations: List[str] = field(default_factory=list)
    timer_violations: List[str] = field(default_factory=list)
    _balance: Optional[np.ndarray] = None

    def __call__(self, state: StepState) -> None:
        t = state.t - 1
        cust = state.population.customers
        for name in ("trust", "scar", "rumor"):
            values = getattr(cust, name)
            if values.min() < 0.0 or values.max() > 1.0:
                self.range_violations.append(f"t={t} {name} in [{values.min()}, {values.max()}]")
        if cust.balance.min() < 0.0 or (self._balance is not None and np.any(cust.balance > self._balance)):
            self.balance_violations.append(f"t={t}")
        self._balance = cust.balance.copy()
        mer = state.population.merchants
        bad = (mer.dwell_timer > 0) & (mer.broadcast == MerchantLabel.ACCEPTING)
        if mer.dwell_timer.min() < 0.0 or bad.any():
            self.timer_violations.append(f"t={t} merchants={np.flatnonzero(bad).tolist()}")


def _result(name: str, problems: List[str]) -> PropertyResult:
    if problems:
        return PropertyResult(name, False, f"{len(problems)} violation(s), first: {problems[0]}")
    return PropertyResult(name, True)


def audit_run(result: RunResult, monitor: Optional[StepMonitor] = None) -> List[PropertyResult]:
    metrics = result.metrics()
    summary = result.summary
    checks: List[PropertyResult] = []

    if monitor is not None:
        checks.append(_result("state_ranges", monitor.range_violations))
        checks.append(_result("balances_non_increasing", monitor.balance_violations))
        checks.append(_result("dwell_timer_holds_broadcast", monitor.timer_violations))

    moved = summary.total_initial_balance - summary.total_final_balance
    gap = abs(summary.cumulative_outflow - moved)
    checks.append(
        PropertyResult(
            "conservation",
            gap <= TOL * max(1.0, summary.total_initial_balance),
            f"cumulative outflow {summary.cumulative_outflow} vs balance change {moved}",
        )
    )

    params = result.population.params
    ineligible = []
    for event in result.events:
        view = params.take(event.customer)
        snapshot = _DecisionView(mode=event.mode, scar=event.scar, rumor=event.rumor)
        if not is_eligible(snapshot, view):
            ineligible.append(f"t={event.step} customer={event.customer}")
    checks.append(_result("eligibility_necessary", ineligible))
    checks.append(_result("events_match_outflow", _event_outflow_mismatches(result)))

    op, bc = result.population.merchants.clearance_steps(summary.horizon)
    early = np.flatnonzero(bc < op).tolist()
    checks.append(_result("broadcast_lags_operational", [f"merchant index {i}" for i in early]))

    sums = metrics[["frac_ok", "frac_frustrated", "frac_avoiding"]].sum(axis=1)
    off = np.flatnonzero(np.abs(sums.to_numpy() - 1.0) > TOL).tolist()
    checks.append(_result("mode_fractions_sum_to_one", [f"t={t}" for t in off]))

    drops = np.flatnonzero(np.diff(metrics["cumulative_outflow"].to_numpy()) < 0.0).tolist()
    checks.append(_result("cumulative_outflow_monotone", [f"t={t + 1}" for t in drops]))

    if result.timeline.outage is None:
        checks.append(
            PropertyResult("no_outage_no_withdrawals", not result.events, f"{len(result.events)} withdrawal events")
        )
    return checks


def _event_outflow_mismatches(result: RunResult) -> List[str]:
    per_step: Dict[int, List[float]] = defaultdict(list)
    for event in result.events:
        per_step[event.step].append(event.amount)
    problems = []
    for frame in result.frames:
        logged = math.fsum(per_step.pop(frame.t, []))
        if abs(logged - frame.outflow) > TOL * max(1.0, abs(frame.outflow)):
            problems.append(f"t={frame.t} events sum to {logged}, outflow {frame.outflow}")
    problems.extend(f"t={t} events outside the horizon" for t in sorted(per_step))
    return problems


@dataclass
class _DecisionView:
    mode: int
    scar: float
    rumor: float


def no_outage_control(config: SimulationConfig) -> SimulationConfig:
    """The same configuration with the first phase's levels held for the whole horizon."""
    control = copy.deepcopy(config)
    stable = replace(config.scenario.phases[0], duration=config.run.horizon, ramp=False, role="stable")
    control.scenario.phases = [stable]
    control.scenario.peak_demand = []
    return control


def non_sticky_control(config: SimulationConfig) -> SimulationConfig:
    control = copy.deepcopy(config)
    control.merchants.sticky_broadcasts = False
    return control


def _control_checks(config: SimulationConfig) -> List[PropertyResult]:
    quiet = run(no_outage_control(config))
    immediate = run(non_sticky_control(config)).population.merchants
    op, bc = immediate.clearance_steps(config.run.horizon)
    lagging = np.flatnonzero(bc != op).tolist()
    return [
        PropertyResult(
            "no_outage_control_no_withdrawals", not quiet.events, f"{len(quiet.events)} withdrawal events"
        ),
        _result("non_sticky_control_no_lag", [f"merchant index {i}" for i in lagging]),
    ]


def check_config(config: SimulationConfig) -> List[PropertyResult]:
    """Audit a monitored run, rerun it for determinism, then audit the no-outage and non-sticky controls."""
    monitor = StepMonitor()
    first = run(config, on_step=monitor)
    checks = audit_run(first, monitor)
    second = run(config)
    checks.append(
        PropertyResult(
            "deterministic_rerun",
            first.metrics().equals(second.metrics()),
            "metrics differ between identical runs",
        )
    )
    checks.extend(_control_checks(config))
    for check in checks:
        if check.passed:
            log.info("✓ %s", check.name)
        else:
            log.error("✗ %s: %s", check.name, check.detail)
    return checks
