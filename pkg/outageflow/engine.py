"""Single, batch, and paired simulation runs."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from langchain_core.runnables import RunnableLambda

from .agents import sample_population
from .config import ConfigError, SimulationConfig, apply_overrides, is_policy_key, validate_config
from .network import generate_watts_strogatz
from .pipeline import build_step_chain
from .rng import RngStreams
from .scenario import build_piecewise_scenario, nadir
from .state import RunResult, RunSummary, StepState

log = logging.getLogger(__name__)

BATCH_COLUMNS = [
    "seed",
    "peak_avoidance",
    "peak_avoidance_step",
    "peak_outflow",
    "peak_outflow_step",
    "t_min",
    "cumulative_outflow_fraction",
    "delayed_peak",
]
DISTRIBUTION_METRICS = ["peak_avoidance", "peak_outflow", "cumulative_outflow_fraction"]
PAIRED_METRICS = {
    "peak_avoidance": "delta_peak_avoidance",
    "peak_outflow": "delta_peak_outflow",
    "cumulative_outflow_fraction": "delta_cumulative_outflow",
}

StepCallback = Callable[[StepState], None]


class BatchRunError(RuntimeError):
    def __init__(self, seed: int, cause: BaseException) -> None:
        super().__init__(f"run with seed {seed} failed: {cause}")
        self.seed = seed
        self.cause = cause


def initial_state(config: SimulationConfig) -> StepState:
    """Build the network, population, and timeline of one run from its named streams."""
    streams = RngStreams.from_seed(config.run.seed)
    pop_cfg = config.population
    timeline = build_piecewise_scenario(config.scenario, config.run.horizon)
    graph = generate_watts_strogatz(
        pop_cfg.n_customers, config.network.mean_degree, config.network.rewire_prob, streams.network
    )
    population = sample_population(
        pop_cfg.n_customers,
        pop_cfg.n_merchants,
        pop_cfg,
        streams.population,
        merchants=config.merchants,
        adoption_prob=config.substitution.adoption_prob,
    )
    return StepState(config=config, timeline=timeline, graph=graph, population=population, streams=streams)


def run(config: SimulationConfig, on_step: Optional[StepCallback] = None) -> RunResult:
    """Simulate ``run.horizon`` steps; ``on_step`` sees the state after every step."""
    validate_config(config)
    log.info("→ run: seed=%d horizon=%d customers=%d", config.run.seed, config.run.horizon, config.population.n_customers)
    state = initial_state(config)
    chain = build_step_chain(config)
    for _ in range(config.run.horizon):
        state = chain.invoke(state)
        if on_step is not None:
            on_step(state)
    summary = summarize(state)
    log.info(
        "✓ run completed: seed=%d peak_outflow_step=%d t_min=%d cumulative=%.4f",
        summary.seed,
        summary.peak_outflow_step,
        summary.t_min,
        summary.cumulative_outflow_fraction,
    )
    return RunResult(
        config=config,
        frames=state.frames,
        summary=summary,
        events=state.events,
        timeline=state.timeline,
        graph=state.graph,
        population=state.population,
    )


def summarize(state: StepState) -> RunSummary:
    timeline = state.timeline
    horizon = timeline.horizon
    outflow = np.array([f.outflow for f in state.frames])
    avoiding = np.array([f.frac_avoiding for f in state.frames])
    t_min = nadir(timeline)
    peak_outflow_step = int(np.argmax(outflow))
    peak_avoidance_step = int(np.argmax(avoiding))
    total_initial = state.total_initial_balance

    recovered: Optional[int] = None
    pre_avoid = float(avoiding.mean())
    at_recovery: Optional[float] = None
    if timeline.phases is not None:
        pre_avoid = float(avoiding[: timeline.phases.stable_end + 1].mean())
        recovered = timeline.first_recovered_step()
        if recovered is not None:
            at_recovery = float(avoiding[recovered])

    op, bc = state.population.merchants.clearance_steps(horizon)
    mean_op = float(op.mean()) if op.size else None
    mean_bc = float(bc.mean()) if bc.size else None
    return RunSummary(
        seed=state.config.run.seed,
        horizon=horizon,
        t_min=t_min,
        peak_outflow=float(outflow[peak_outflow_step]),
        peak_outflow_step=peak_outflow_step,
        peak_avoidance=float(avoiding[peak_avoidance_step]),
        peak_avoidance_step=peak_avoidance_step,
        cumulative_outflow=state.cumulative_outflow,
        cumulative_outflow_fraction=state.cumulative_outflow / total_initial,
        delayed_peak=bool(peak_outflow_step > t_min),
        total_initial_balance=total_initial,
        total_final_balance=float(state.population.customers.balance.sum()),
        withdrawal_events=len(state.events),
        adverse_outcomes=state.adverse_total,
        substituted_outcomes=state.substituted_total,
        substitution_usage=state.substituted_total / state.adverse_total if state.adverse_total else 0.0,
        recovered_step=recovered,
        pre_incident_avoidance=pre_avoid,
        avoidance_at_recovery=at_recovery,
        merchants_degraded=int(op.size),
        mean_operational_clearance=mean_op,
        mean_broadcast_clearance=mean_bc,
        broadcast_lag=mean_bc - mean_op if op.size else None,
    )


def _seed_list(seeds: Iterable[int]) -> List[int]:
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("at least one seed is required")
    return seeds


def _batched(fn: Callable[[Any], Any], items: Sequence[Any], keys: Sequence[int], parallel: int) -> List[Any]:
    results = RunnableLambda(fn).batch(list(items), config={"max_concurrency": max(1, parallel)}, return_exceptions=True)
    for key, result in zip(keys, results):
        if isinstance(result, Exception):
            raise BatchRunError(key, result) from result
    return results


@dataclass
class BatchResult:
    summaries: List[RunSummary]
    frame: pd.DataFrame
    statistics: pd.DataFrame
    delayed_peak_incidence: float

    def as_dict(self) -> Dict[str, Any]:
        return {
            "runs": len(self.summaries),
            "delayed_peak_incidence": self.delayed_peak_incidence,
            "statistics": self.statistics.to_dict(orient="index"),
        }


def distribution(frame: pd.DataFrame, metrics: Sequence[str]) -> pd.DataFrame:
    """Min, quartiles, and max per metric column."""
    stats = frame[list(metrics)].astype(float).quantile([0.0, 0.25, 0.5, 0.75, 1.0]).T
    stats.columns = ["min", "q1", "median", "q3", "max"]
    return stats


def run_batch(config: SimulationConfig, seeds: Iterable[int], parallel: Optional[int] = None) -> BatchResult:
    """Independent runs over ``seeds`` and the distribution of their headline metrics."""
    seeds = _seed_list(seeds)
    validate_config(config)
    parallel = parallel or config.run.parallel
    log.info("→ batch: %d seeds, parallel=%d", len(seeds), parallel)
    summaries: List[RunSummary] = _batched(lambda seed: run(config.with_seed(seed)).summary, seeds, seeds, parallel)
    frame = pd.DataFrame([s.as_dict() for s in summaries])[BATCH_COLUMNS]
    incidence = float(frame["delayed_peak"].mean())
    log.info("✓ batch completed: delayed peak in %d/%d runs", int(frame["delayed_peak"].sum()), len(seeds))
    return BatchResult(
        summaries=summaries,
        frame=frame,
        statistics=distribution(frame, DISTRIBUTION_METRICS),
        delayed_peak_incidence=incidence,
    )


@dataclass
class PairedResult:
    frame: pd.DataFrame
    medians: Dict[str, float]
    variant: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        return {"variant": self.variant, "median_deltas": self.medians, "runs": int(len(self.frame))}


def policy_variant(config: SimulationConfig, overrides: Iterable[str]) -> tuple[SimulationConfig, Dict[str, Any]]:
    """Apply ``key=value`` overrides that may only touch policy fields."""
    overrides = list(overrides)
    for item in overrides:
        key = item.split("=", 1)[0].strip()
        if not is_policy_key(key):
            raise ConfigError(key, "paired variants may only change substitution or merchant communication fields")
    variant, applied = apply_overrides(config, overrides)
    validate_config(variant)
    return variant, applied


def run_paired(
    config: SimulationConfig, variant: Iterable[str], seeds: Iterable[int], parallel: Optional[int] = None
) -> PairedResult:
    """Run baseline and variant legs on identical seeds and report per-seed deltas (variant − baseline)."""
    seeds = _seed_list(seeds)
    validate_config(config)
    variant_cfg, applied = policy_variant(config, variant)
    parallel = parallel or config.run.parallel
    log.info("→ paired: %d seeds, variant=%s", len(seeds), applied or "{}")
    legs = [(cfg, seed) for seed in seeds for cfg in (config, variant_cfg)]
    summaries: List[RunSummary] = _batched(
        lambda leg: run(leg[0].with_seed(leg[1])).summary,
        legs,
        [seed for _, seed in legs],
        parallel,
    )
    rows = []
    for i, seed in enumerate(seeds):
        base, alt = summaries[2 * i], summaries[2 * i + 1]
        row: Dict[str, Any] = {"seed": seed}
        for metric, delta in PAIRED_METRICS.items():
            row[f"baseline_{metric}"] = getattr(base, metric)
            row[f"variant_{metric}"] = getattr(alt, metric)
            row[delta] = getattr(alt, metric) - getattr(base, metric)
        rows.append(row)
    frame = pd.DataFrame(rows)
    medians = {delta: float(frame[delta].median()) for delta in PAIRED_METRICS.values()}
    log.info("✓ paired completed: median deltas %s", medians)
    return PairedResult(frame=frame, medians=medians, variant=applied)
