"""Exogenous payment infrastructure: per-step outcome probabilities and demand."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import PhaseConfig, ScenarioConfig

log = logging.getLogger(__name__)

PROB_TOL = 1e-9
DISRUPTION_ROLES = ("decline", "outage")
RECOVERY_ROLES = ("recovery", "post")


class ScenarioError(ValueError):
    def __init__(self, message: str, key: Optional[str] = None) -> None:
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class OutcomeProbs:
    p_success: float
    p_failure: float
    p_unknown: float

    def __post_init__(self) -> None:
        for name in ("p_success", "p_failure", "p_unknown"):
            value = getattr(self, name)
            if not (-PROB_TOL <= value <= 1.0 + PROB_TOL):
                raise ScenarioError(f"{name}={value} lies outside [0, 1]")
        total = self.p_success + self.p_failure + self.p_unknown
        if abs(total - 1.0) > PROB_TOL:
            raise ScenarioError(f"outcome probabilities sum to {total}, not 1")

    @classmethod
    def normalized(
        cls,
        p_success: float,
        p_failure: Optional[float] = None,
        p_unknown: Optional[float] = None,
        failure_share: float = 0.5,
    ) -> "OutcomeProbs":
        """Build a valid triple, splitting the residual when only ``p_success`` is given."""
        return cls(*_normalize(p_success, p_failure, p_unknown, failure_share))


def _normalize(
    p_success: float, p_failure: Optional[float], p_unknown: Optional[float], failure_share: float
) -> Tuple[float, float, float]:
    if not 0.0 <= p_success <= 1.0:
        raise ScenarioError(f"p_success={p_success} lies outside [0, 1]")
    if p_failure is None and p_unknown is None:
        residual = 1.0 - p_success
        p_failure = residual * failure_share
        return p_success, p_failure, residual - p_failure
    if p_failure is None:
        p_failure = max(0.0, 1.0 - p_success - p_unknown)
    if p_unknown is None:
        p_unknown = max(0.0, 1.0 - p_success - p_failure)
    if p_failure < 0.0 or p_unknown < 0.0:
        raise ScenarioError("failure and unknown probabilities must be non-negative")
    total = p_success + p_failure + p_unknown
    if total <= 0.0:
        raise ScenarioError("outcome probabilities cannot be normalized (all zero)")
    return p_success / total, p_failure / total, p_unknown / total


@dataclass(frozen=True)
class ScenarioPhases:
    stable_end: int
    nadir: int
    recovery_end: int
    peak_demand_windows: Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class ScenarioTimeline:
    horizon: int
    p_success: np.ndarray
    p_failure: np.ndarray
    p_unknown: np.ndarray
    demand: np.ndarray
    phases: Optional[ScenarioPhases] = None
    # [start, end) of the declared decline/outage phases, if any.
    outage: Optional[Tuple[int, int]] = None

    def __post_init__(self) -> None:
        for name in ("p_success", "p_failure", "p_unknown", "demand"):
            arr = getattr(self, name)
            if arr.shape != (self.horizon,):
                raise ScenarioError(f"{name} has {arr.shape[0]} entries, expected {self.horizon}")
            arr.flags.writeable = False
        if np.any(self.demand < 1.0):
            raise ScenarioError("demand multipliers must be >= 1", key="scenario.peak_demand")

    @property
    def probs(self) -> List[OutcomeProbs]:
        return [self.probs_at(t) for t in range(self.horizon)]

    def probs_at(self, t: int) -> OutcomeProbs:
        return OutcomeProbs(float(self.p_success[t]), float(self.p_failure[t]), float(self.p_unknown[t]))

    def pre_incident_level(self) -> float:
        end = self.phases.stable_end + 1 if self.phases else self.horizon
        return float(self.p_success[:end].mean())

    def first_recovered_step(self, tolerance: float = 0.01) -> Optional[int]:
        """First step after the nadir where p_success is back within ``tolerance`` (relative) of its pre-incident level."""
        target = self.pre_incident_level() * (1.0 - tolerance)
        t_min = nadir(self)
        later = np.nonzero(self.p_success[t_min:] >= target - PROB_TOL)[0]
        return int(t_min + later[0]) if later.size else None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": np.arange(self.horizon),
                "p_success": self.p_success,
                "p_failure": self.p_failure,
                "p_unknown": self.p_unknown,
                "demand": self.demand,
            }
        )


def nadir(timeline: ScenarioTimeline) -> int:
    """Earliest step minimizing p_success."""
    if timeline.horizon == 0:
        raise ScenarioError("empty timeline")
    return int(np.argmin(timeline.p_success))


def _phase_levels(phase: PhaseConfig, failure_share: float, key: str) -> np.ndarray:
    try:
        return np.array(_normalize(phase.p_success, phase.p_failure, phase.p_unknown, failure_share))
    except ScenarioError as exc:
        raise ScenarioError(str(exc), key=key) from None


def build_piecewise_scenario(scenario: ScenarioConfig, horizon: int) -> ScenarioTimeline:
    """Expand phase descriptions into a per-step timeline.

    Ramp phases interpolate linearly from the previous phase level towards their
    own level, strictly between both ends, so a hold phase at the target owns the
    first step at that level. Each step is renormalized. The last phase level is
    held until ``horizon``.
    """
    if not scenario.phases:
        raise ScenarioError("at least one phase is required", key="scenario.phases")
    rows: List[np.ndarray] = []
    bounds: List[Tuple[int, int]] = []
    prev: Optional[np.ndarray] = None
    cursor = 0
    for i, phase in enumerate(scenario.phases):
        key = f"scenario.phases[{i}]"
        if phase.duration <= 0:
            raise ScenarioError("phase duration must be positive", key=f"{key}.duration")
        level = _phase_levels(phase, scenario.failure_share, key)
        if phase.ramp and prev is not None:
            frac = np.arange(1, phase.duration + 1)[:, None] / (phase.duration + 1)
            block = prev[None, :] + (level - prev)[None, :] * frac
        else:
            block = np.repeat(level[None, :], phase.duration, axis=0)
        rows.append(block)
        bounds.append((cursor, cursor + phase.duration))
        cursor += phase.duration
        prev = level
    if cursor > horizon:
        raise ScenarioError(f"phase durations sum to {cursor}, beyond the horizon {horizon}", key="scenario.phases")
    grid = np.concatenate(rows, axis=0)
    if cursor < horizon:
        grid = np.concatenate([grid, np.repeat(grid[-1:], horizon - cursor, axis=0)], axis=0)
    grid = np.clip(grid, 0.0, None)
    sums = grid.sum(axis=1, keepdims=True)
    grid = np.where(np.abs(sums - 1.0) > 1e-12, grid / sums, grid)

    demand = np.ones(horizon)
    windows: List[Tuple[int, int]] = []
    for i, window in enumerate(scenario.peak_demand):
        key = f"scenario.peak_demand[{i}]"
        if window.duration <= 0 or window.start < 0 or window.start + window.duration > horizon:
            raise ScenarioError("peak-demand window must lie inside the horizon", key=key)
        if window.multiplier < 1.0:
            raise ScenarioError("demand multiplier must be >= 1", key=f"{key}.multiplier")
        end = window.start + window.duration
        demand[window.start:end] = np.maximum(demand[window.start:end], window.multiplier)
        windows.append((window.start, end))

    p_success = grid[:, 0].copy()
    t_min = int(np.argmin(p_success))
    if np.any(np.diff(p_success[t_min:]) < -PROB_TOL):
        raise ScenarioError("p_success must not decline after the outage nadir", key="scenario.phases")

    roles = [phase.role for phase in scenario.phases]
    phases: Optional[ScenarioPhases] = None
    outage: Optional[Tuple[int, int]] = None
    disrupted = [i for i, role in enumerate(roles) if role in DISRUPTION_ROLES]
    if disrupted:
        first, last = disrupted[0], disrupted[-1]
        outage = (bounds[first][0], bounds[last][1])
        if not any(role == "stable" for role in roles[:first]):
            raise ScenarioError("an outage needs a preceding stable phase", key="scenario.phases")
        if not outage[0] <= t_min < outage[1]:
            raise ScenarioError(
                f"the p_success minimum at step {t_min} lies outside the declared outage {outage}", key="scenario.phases"
            )
        _check_recovery_levels(scenario.phases, p_success, outage, t_min, bounds)
        recovery = [i for i, role in enumerate(roles) if role == "recovery"]
        recovery_end = bounds[recovery[-1]][1] if recovery else horizon
        phases = ScenarioPhases(
            stable_end=outage[0] - 1,
            nadir=t_min,
            recovery_end=recovery_end,
            peak_demand_windows=tuple(windows),
        )
        if not (phases.stable_end < phases.nadir < phases.recovery_end <= horizon):
            raise ScenarioError(
                f"phase ordering violated (stable_end={phases.stable_end}, nadir={phases.nadir}, "
                f"recovery_end={phases.recovery_end})",
                key="scenario.phases",
            )
    log.debug("scenario built: horizon=%d nadir=%d outage=%s", horizon, t_min, outage)
    return ScenarioTimeline(
        horizon=horizon,
        p_success=p_success,
        p_failure=grid[:, 1].copy(),
        p_unknown=grid[:, 2].copy(),
        demand=demand,
        phases=phases,
        outage=outage,
    )


def _check_recovery_levels(
    phases: Sequence[PhaseConfig],
    p_success: np.ndarray,
    outage: Tuple[int, int],
    t_min: int,
    bounds: Sequence[Tuple[int, int]],
) -> None:
    floor = float(p_success[outage[0]:outage[1]].min())
    for i, phase in enumerate(phases):
        if phase.role in RECOVERY_ROLES and phase.p_success < floor - PROB_TOL:
            raise ScenarioError(
                f"recovery level {phase.p_success} is below the nadir level {floor}",
                key=f"scenario.phases[{i}].p_success",
            )
        start = bounds[i][0]
        if phase.role in RECOVERY_ROLES and start < t_min:
            raise ScenarioError("recovery starts before the outage nadir", key=f"scenario.phases[{i}]")
