from __future__ import annotations

import pytest

from outageflow.config import (
    BehaviorConfig,
    NetworkConfig,
    PhaseConfig,
    PopulationConfig,
    RunSettings,
    ScenarioConfig,
    SimulationConfig,
    SubstitutionConfig,
)
from outageflow.engine import run
from reference import simulate


def _tiny(seed: int, **behavior) -> SimulationConfig:
    return SimulationConfig(
        scenario=ScenarioConfig(
            phases=[
                PhaseConfig(duration=10, p_success=0.99, role="stable"),
                PhaseConfig(duration=5, p_success=0.3, ramp=True, role="decline"),
                PhaseConfig(duration=10, p_success=0.3, role="outage"),
                PhaseConfig(duration=10, p_success=0.95, ramp=True, role="recovery"),
                PhaseConfig(duration=15, p_success=0.95, role="post"),
            ],
            peak_demand=[],
        ),
        population=PopulationConfig(
            n_customers=20,
            n_merchants=5,
            merchants_per_customer=2,
            attempt_propensity=(0.4, 0.6),
            scar_increment=(0.2, 0.3),
            withdrawal_scar_threshold=(0.1, 0.2),
            withdrawal_rumor_threshold=(0.05, 0.1),
        ),
        network=NetworkConfig(mean_degree=4, rewire_prob=0.2),
        behavior=BehaviorConfig(outflow_feedback_weight=0.2, **behavior),
        substitution=SubstitutionConfig(enabled=True, usage_prob=0.5),
        run=RunSettings(horizon=50, seed=seed),
    )


def _engine_history(config: SimulationConfig):
    history = []

    def capture(state):
        cust, mer = state.population.customers, state.population.merchants
        history.append(
            {
                "trust": cust.trust.tolist(),
                "scar": cust.scar.tolist(),
                "rumor": cust.rumor.tolist(),
                "mode": cust.mode.tolist(),
                "balance": cust.balance.tolist(),
                "operational": mer.operational.tolist(),
                "broadcast": mer.broadcast.tolist(),
                "dwell_timer": mer.dwell_timer.tolist(),
                "outflow": state.outflow,
            }
        )

    result = run(config, on_step=capture)
    return result, history


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_engine_matches_scalar_reference_step_by_step(seed):
    config = _tiny(seed)
    _, engine = _engine_history(config)
    oracle = simulate(config)
    assert len(engine) == len(oracle) == 50
    for t, (got, want) in enumerate(zip(engine, oracle)):
        for key in want:
            assert got[key] == want[key], f"step {t}: {key} differs"


def test_reference_agrees_under_lagged_perception():
    config = _tiny(4, perception_timing="lagged")
    _, engine = _engine_history(config)
    assert engine == simulate(config)


def test_reference_runs_exercise_withdrawals():
    total = 0
    for seed in (1, 2, 3):
        result, _ = _engine_history(_tiny(seed))
        total += len(result.events)
    assert total > 0


def test_reference_agrees_when_idle_steps_do_not_count_as_clean():
    config = _tiny(5)
    config.merchants.idle_counts_clean = False
    config.merchants.window_len = 3
    _, engine = _engine_history(config)
    assert engine == simulate(config)
