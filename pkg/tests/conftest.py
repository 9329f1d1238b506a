from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from outageflow.agents import CustomerParams
from outageflow.config import (
    NetworkConfig,
    PeakDemandConfig,
    PhaseConfig,
    PopulationConfig,
    RunSettings,
    ScenarioConfig,
    SimulationConfig,
)

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

CUSTOMER_DEFAULTS = dict(
    lam=0.2,
    theta1=0.6,
    theta2=0.3,
    rho_T=0.9,
    rho_C=0.95,
    rho_R=0.9,
    gamma_C=0.1,
    beta_T=0.1,
    kappa_C=1.0,
    alpha_R=1.0,
    alpha_C=1.0,
    alpha_T=1.0,
    omega=0.1,
    theta_C_w=0.5,
    theta_R_w=0.5,
    adopter=True,
)


def customer(**overrides) -> CustomerParams:
    """Scalar parameter view for a single customer."""
    return CustomerParams(**{**CUSTOMER_DEFAULTS, **overrides})


def small_scenario() -> ScenarioConfig:
    return ScenarioConfig(
        phases=[
            PhaseConfig(duration=20, p_success=0.99, role="stable"),
            PhaseConfig(duration=5, p_success=0.35, ramp=True, role="decline"),
            PhaseConfig(duration=15, p_success=0.35, role="outage"),
            PhaseConfig(duration=20, p_success=0.99, ramp=True, role="recovery"),
            PhaseConfig(duration=60, p_success=0.99, role="post"),
        ],
        peak_demand=[PeakDemandConfig(start=45, duration=5, multiplier=1.5)],
    )


def small_config(seed: int = 7, **run_overrides) -> SimulationConfig:
    cfg = SimulationConfig(
        scenario=small_scenario(),
        population=PopulationConfig(n_customers=200, n_merchants=20),
        network=NetworkConfig(mean_degree=6, rewire_prob=0.1),
        run=RunSettings(horizon=120, seed=seed, seeds=3),
    )
    for key, value in run_overrides.items():
        setattr(cfg.run, key, value)
    return cfg


@pytest.fixture
def config() -> SimulationConfig:
    return small_config()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def small_yaml(tmp_path: Path) -> Path:
    path = tmp_path / "small.yaml"
    path.write_text(
        """
scenario:
  phases:
    - {duration: 20, p_success: 0.99, role: stable}
    - {duration: 5, p_success: 0.35, ramp: true, role: decline}
    - {duration: 15, p_success: 0.35, role: outage}
    - {duration: 20, p_success: 0.99, ramp: true, role: recovery}
    - {duration: 20, p_success: 0.99, role: post}
  peak_demand:
    - {start: 45, duration: 5, multiplier: 1.5}
population:
  n_customers: 150
  n_merchants: 15
network:
  mean_degree: 6
run:
  horizon: 80
  seed: 3
  seeds: 2
  out_dir: out
""",
        encoding="utf-8",
    )
    return path
