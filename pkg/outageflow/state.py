from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .agents import Population
from .config import SimulationConfig
from .liquidity import WithdrawalEvent
from .network import SocialGraph
from .rng import RngStreams
from .scenario import ScenarioTimeline

METRIC_COLUMNS = [
    "t",
    "p_success",
    "demand",
    "frac_ok",
    "frac_frustrated",
    "frac_avoiding",
    "mean_trust",
    "mean_scar",
    "mean_rumor",
    "mean_broadcast_severity",
    "attempts",
    "successes",
    "failures",
    "unknowns",
    "substitution_rate",
    "outflow",
    "cumulative_outflow",
    "broadcast_accepting",
    "broadcast_degraded",
    "broadcast_fallback",
]


@dataclass(frozen=True)
class MetricsFrame:
    t: int
    p_success: float
    demand: float
    frac_ok: float
    frac_frustrated: float
    frac_avoiding: float
    mean_trust: float
    mean_scar: float
    mean_rumor: float
    mean_broadcast_severity: float
    attempts: int
    successes: int
    failures: int
    unknowns: int
    substitution_rate: float
    outflow: float
    cumulative_outflow: float
    broadcast_accepting: int = 0
    broadcast_degraded: int = 0
    broadcast_fallback: int = 0


def frames_to_frame(frames: List[MetricsFrame]) -> pd.DataFrame:
    return pd.DataFrame([asdict(f) for f in frames], columns=METRIC_COLUMNS)


@dataclass
class StepState:
    """Everything one run mutates, threaded through the per-step stages."""

    config: SimulationConfig
    timeline: ScenarioTimeline
    graph: SocialGraph
    population: Population
    streams: RngStreams
    t: int = 0
    previous_outflow: float = 0.0
    cumulative_outflow: float = 0.0
    adverse_total: int = 0
    substituted_total: int = 0
    frames: List[MetricsFrame] = field(default_factory=list)
    events: List[WithdrawalEvent] = field(default_factory=list)
    # Per-step scratch, refreshed by the stages of each step.
    p_success: float = 1.0
    p_failure: float = 0.0
    demand: float = 1.0
    snapshot_modes: Optional[np.ndarray] = None
    snapshot_broadcast: Optional[np.ndarray] = None
    merchant_ids: Optional[np.ndarray] = None
    card_kinds: Optional[np.ndarray] = None
    final_kinds: Optional[np.ndarray] = None
    substituted: Optional[np.ndarray] = None
    psi: Optional[np.ndarray] = None
    outflow: float = 0.0

    @property
    def total_initial_balance(self) -> float:
        return self.population.total_initial_balance

    @property
    def n_customers(self) -> int:
        return self.population.params.n_customers


@dataclass(frozen=True)
class RunSummary:
    seed: int
    horizon: int
    t_min: int
    peak_outflow: float
    peak_outflow_step: int
    peak_avoidance: float
    peak_avoidance_step: int
    cumulative_outflow: float
    cumulative_outflow_fraction: float
    delayed_peak: bool
    total_initial_balance: float
    total_final_balance: float
    withdrawal_events: int
    adverse_outcomes: int
    substituted_outcomes: int
    substitution_usage: float
    recovered_step: Optional[int]
    pre_incident_avoidance: float
    avoidance_at_recovery: Optional[float]
    merchants_degraded: int
    mean_operational_clearance: Optional[float]
    mean_broadcast_clearance: Optional[float]
    broadcast_lag: Optional[float]

    def as_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class RunResult:
    config: SimulationConfig
    frames: List[MetricsFrame]
    summary: RunSummary
    events: List[WithdrawalEvent]
    timeline: ScenarioTimeline
    graph: SocialGraph
    population: Population

    def metrics(self) -> pd.DataFrame:
        return frames_to_frame(self.frames)

    def events_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": [e.step for e in self.events],
                "customer_id": [e.customer for e in self.events],
                "amount": [e.amount for e in self.events],
                "balance_after": [e.balance_after for e in self.events],
            },
            columns=["t", "customer_id", "amount", "balance_after"],
        )

    def as_dict(self) -> Dict[str, Any]:
        return {"config": self.config.as_dict(), "summary": self.summary.as_dict()}
