from __future__ import annotations

import logging

import numpy as np
import pytest

from outageflow.agents import ExposureMap, sample_population, select_merchant, select_merchants
from outageflow.config import PopulationConfig
from outageflow.labels import MerchantLabel, Mode


@pytest.fixture(scope="module")
def population():
    return sample_population(1000, 100, PopulationConfig(), np.random.default_rng(11))


def test_sampled_values_stay_in_configured_ranges(population):
    params = population.params
    cfg = PopulationConfig()
    assert params.omega.min() >= 0.05 and params.omega.max() <= 0.3
    for name, bounds in (
        ("lam", cfg.attempt_propensity),
        ("rho_T", cfg.trust_persistence),
        ("rho_C", cfg.scar_persistence),
        ("rho_R", cfg.rumor_persistence),
        ("gamma_C", cfg.scar_increment),
        ("theta_C_w", cfg.withdrawal_scar_threshold),
        ("theta_R_w", cfg.withdrawal_rumor_threshold),
    ):
        values = getattr(params, name)
        assert values.min() >= bounds[0] and values.max() <= bounds[1], name


def test_threshold_pairs_are_ordered(population):
    assert np.all(population.params.theta1 > population.params.theta2)


def test_initial_states(population):
    cust = population.customers
    assert np.all(cust.mode == Mode.OK)
    assert np.all(cust.scar == 0.0) and np.all(cust.rumor == 0.0)
    assert np.all(cust.trust == 0.95)
    assert np.all(cust.balance == 1.0)
    assert population.total_initial_balance == pytest.approx(1000.0)
    assert np.all(population.merchants.broadcast == MerchantLabel.ACCEPTING)
    assert np.all(population.merchants.operational == MerchantLabel.ACCEPTING)


def test_uniform_exposure_over_distinct_merchants(population):
    exposure = population.exposure
    assert exposure.merchants.shape == (1000, 3)
    assert np.allclose(exposure.weights, 1 / 3)
    assert np.allclose(exposure.weights.sum(axis=1), 1.0)
    assert all(len(set(row)) == 3 for row in exposure.merchants.tolist())
    assert exposure.merchants.min() >= 0 and exposure.merchants.max() < 100


def test_parameters_are_heterogeneous(population):
    assert np.unique(population.params.lam).size > 1
    assert 0.5 < population.params.adopter.mean() < 0.7


def test_merchant_parameters(population):
    mp = population.merchant_params
    assert np.all(mp.theta_op2 > mp.theta_op1) and np.all(mp.theta_op1 > 0)
    assert np.all((mp.dwell_init >= 5) & (mp.dwell_init <= 20))
    assert np.all(mp.dwell_init == np.round(mp.dwell_init))


def test_sampling_is_deterministic():
    a = sample_population(200, 20, PopulationConfig(), np.random.default_rng(3))
    b = sample_population(200, 20, PopulationConfig(), np.random.default_rng(3))
    assert np.array_equal(a.params.omega, b.params.omega)
    assert np.array_equal(a.exposure.merchants, b.exposure.merchants)
    assert np.array_equal(a.merchant_params.dwell_init, b.merchant_params.dwell_init)


def test_atypical_range_logs_warning(caplog):
    cfg = PopulationConfig(attempt_propensity=(0.05, 0.5))
    with caplog.at_level(logging.WARNING):
        sample_population(50, 5, cfg, np.random.default_rng(0))
    assert "population.attempt_propensity" in caplog.text


def test_population_frame_columns(population):
    frame = population.params.to_frame()
    assert list(frame.columns) == ["customer_id", "lambda", "theta1", "theta2", "omega", "theta_C_w", "theta_R_w", "adopter"]
    assert len(frame) == 1000


def test_single_merchant_exposure_always_selected(rng):
    exposure = ExposureMap(merchants=np.array([[7]]), weights=np.array([[1.0]]))
    assert {select_merchant(0, exposure, rng) for _ in range(100)} == {7}


def test_even_weights_give_even_frequencies(rng):
    exposure = ExposureMap(merchants=np.array([[3, 4]]), weights=np.array([[0.5, 0.5]]))
    picks = select_merchants(ExposureMap(merchants=np.repeat(exposure.merchants, 100_000, axis=0),
                                         weights=np.repeat(exposure.weights, 100_000, axis=0)),
                             rng.random(100_000))
    assert abs(np.mean(picks == 3) - 0.5) < 0.01


def test_zero_weight_merchant_never_selected(rng):
    exposure = ExposureMap(merchants=np.array([[1, 2]]), weights=np.array([[1.0, 0.0]]))
    assert {select_merchant(0, exposure, rng) for _ in range(10_000)} == {1}
    leading_zero = ExposureMap(merchants=np.array([[1, 2]]), weights=np.array([[0.0, 1.0]]))
    assert {select_merchant(0, leading_zero, rng) for _ in range(10_000)} == {2}


def test_vectorised_selection_matches_scalar(population):
    exposure = population.exposure
    scalar = [select_merchant(i, exposure, np.random.default_rng(i)) for i in range(200)]
    u = np.array([np.random.default_rng(i).random() for i in range(200)])
    sub = ExposureMap(merchants=exposure.merchants[:200].copy(), weights=exposure.weights[:200].copy())
    assert select_merchants(sub, u).tolist() == scalar


def test_exposure_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        ExposureMap(merchants=np.array([[0, 1]]), weights=np.array([[0.5, 0.4]]))
