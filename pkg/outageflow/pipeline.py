from __future__ import annotations

from langchain_core.runnables import Runnable, RunnableLambda

from .config import SimulationConfig
from .stages import customers_stage, infrastructure_stage, merchants_stage, metrics_stage, payments_stage

STEP_STAGES = (infrastructure_stage, payments_stage, merchants_stage, customers_stage, metrics_stage)


def build_step_chain(config: SimulationConfig) -> Runnable:
    """Compose the phases of one simulation step; invoking the chain advances a StepState by one step."""
    chain = RunnableLambda(lambda state: state)
    for stage_fn in STEP_STAGES:
        chain = chain | RunnableLambda(lambda state, fn=stage_fn: fn(state, config))
    return chain
