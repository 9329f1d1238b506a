"""Customer and merchant populations: heterogeneous parameters, initial states, exposure."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np
import pandas as pd

from .config import MerchantConfig, PopulationConfig, warn_atypical
from .labels import Mode
from .merchants import MerchantParams, MerchantState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CustomerParams:
    """Fixed behavioural parameters, one array entry per customer."""

    lam: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    rho_T: np.ndarray
    rho_C: np.ndarray
    rho_R: np.ndarray
    gamma_C: np.ndarray
    beta_T: np.ndarray
    kappa_C: np.ndarray
    alpha_R: np.ndarray
    alpha_C: np.ndarray
    alpha_T: np.ndarray
    omega: np.ndarray
    theta_C_w: np.ndarray
    theta_R_w: np.ndarray
    adopter: np.ndarray

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.theta1) <= np.asarray(self.theta2)):
            raise ValueError("trust thresholds must satisfy theta1 > theta2")
        for name in ("rho_T", "rho_C", "rho_R"):
            value = np.asarray(getattr(self, name))
            if np.any(value <= 0.0) or np.any(value >= 1.0):
                raise ValueError(f"{name} must lie strictly inside (0, 1)")

    @property
    def n_customers(self) -> int:
        return int(np.size(self.lam))

    def take(self, i: int) -> "CustomerParams":
        values = {}
        for f in fields(self):
            item = getattr(self, f.name)[i]
            values[f.name] = bool(item) if f.name == "adopter" else float(item)
        return CustomerParams(**values)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "customer_id": np.arange(self.n_customers),
                "lambda": self.lam,
                "theta1": self.theta1,
                "theta2": self.theta2,
                "omega": self.omega,
                "theta_C_w": self.theta_C_w,
                "theta_R_w": self.theta_R_w,
                "adopter": self.adopter.astype(np.int8),
            }
        )


@dataclass
class CustomerState:
    trust: np.ndarray
    scar: np.ndarray
    rumor: np.ndarray
    mode: np.ndarray
    balance: np.ndarray

    @classmethod
    def initial(cls, n: int, trust: float, balance: np.ndarray) -> "CustomerState":
        return cls(
            trust=np.full(n, float(trust)),
            scar=np.zeros(n),
            rumor=np.zeros(n),
            mode=np.full(n, Mode.OK, dtype=np.int8),
            balance=np.asarray(balance, dtype=np.float64).copy(),
        )

    def copy(self) -> "CustomerState":
        return CustomerState(
            trust=self.trust.copy(),
            scar=self.scar.copy(),
            rumor=self.rumor.copy(),
            mode=self.mode.copy(),
            balance=self.balance.copy(),
        )

    def take(self, i: int) -> "CustomerState":
        return CustomerState(
            trust=float(self.trust[i]),
            scar=float(self.scar[i]),
            rumor=float(self.rumor[i]),
            mode=Mode(int(self.mode[i])),
            balance=float(self.balance[i]),
        )


@dataclass(frozen=True)
class ExposureMap:
    merchants: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.merchants.shape != self.weights.shape or self.merchants.ndim != 2:
            raise ValueError("exposure merchants and weights must be matching (customers, k) arrays")
        if np.any(self.weights < 0.0):
            raise ValueError("exposure weights must be non-negative")
        if np.any(np.abs(self.weights.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("exposure weights must sum to 1 per customer")
        self.merchants.flags.writeable = False
        self.weights.flags.writeable = False

    @classmethod
    def uniform(cls, merchants: np.ndarray) -> "ExposureMap":
        merchants = np.asarray(merchants, dtype=np.int64)
        k = merchants.shape[1]
        return cls(merchants=merchants, weights=np.full(merchants.shape, 1.0 / k))

    def pairs(self, customer: int) -> list[tuple[int, float]]:
        return list(zip(self.merchants[customer].tolist(), self.weights[customer].tolist()))

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.weights, axis=1)


@dataclass
class Population:
    params: CustomerParams
    customers: CustomerState
    merchant_params: MerchantParams
    merchants: MerchantState
    exposure: ExposureMap
    # Fixed at construction; balances only fall afterwards.
    total_initial_balance: float = field(init=False)

    def __post_init__(self) -> None:
        self.total_initial_balance = float(self.customers.balance.sum())


def pick_exposure(cumulative_weights: np.ndarray, u: float) -> int:
    """Index into one customer's exposure list for a uniform draw ``u``."""
    idx = int(np.searchsorted(cumulative_weights, u, side="right"))
    return min(idx, cumulative_weights.shape[0] - 1)


def select_merchant(customer: int, exposure: ExposureMap, rng: np.random.Generator) -> int:
    if exposure.merchants.shape[1] == 0:
        raise ValueError(f"customer {customer} has no merchants")
    idx = pick_exposure(exposure.cumulative[customer], rng.random())
    return int(exposure.merchants[customer, idx])


def select_merchants(exposure: ExposureMap, u: np.ndarray) -> np.ndarray:
    """Vectorised ``select_merchant`` for every customer given one uniform each."""
    cumulative = exposure.cumulative
    idx = np.minimum((u[:, None] >= cumulative).sum(axis=1), cumulative.shape[1] - 1)
    return exposure.merchants[np.arange(u.shape[0]), idx]


def _uniform(rng: np.random.Generator, bounds, n: int) -> np.ndarray:
    low, high = bounds
    return rng.uniform(low, high, n)


def sample_population(
    n_customers: int,
    n_merchants: int,
    ranges: PopulationConfig,
    rng: np.random.Generator,
    *,
    merchants: Optional[MerchantConfig] = None,
    adoption_prob: float = 0.6,
) -> Population:
    """Draw every heterogeneous parameter uniformly from its configured range.

    The draw order is fixed: customer parameters field by field, adopter flags,
    balances, exposure subsets, then merchant thresholds and dwell times.
    """
    if n_customers <= 0 or n_merchants <= 0:
        raise ValueError("population sizes must be positive")
    k = ranges.merchants_per_customer
    if not 1 <= k <= n_merchants:
        raise ValueError(f"merchants_per_customer must lie in [1, {n_merchants}], got {k}")
    merchants = merchants or MerchantConfig()
    warn_atypical(ranges, "population")

    n = n_customers
    lam = _uniform(rng, ranges.attempt_propensity, n)
    theta1 = _uniform(rng, ranges.trust_threshold_upper, n)
    theta2 = theta1 - _uniform(rng, ranges.trust_threshold_gap, n)
    params = CustomerParams(
        lam=lam,
        theta1=theta1,
        theta2=theta2,
        rho_T=_uniform(rng, ranges.trust_persistence, n),
        rho_C=_uniform(rng, ranges.scar_persistence, n),
        rho_R=_uniform(rng, ranges.rumor_persistence, n),
        gamma_C=_uniform(rng, ranges.scar_increment, n),
        beta_T=_uniform(rng, ranges.scar_trust_erosion, n),
        kappa_C=_uniform(rng, ranges.scar_mode_weight, n),
        alpha_R=_uniform(rng, ranges.withdrawal_rumor_sensitivity, n),
        alpha_C=_uniform(rng, ranges.withdrawal_scar_sensitivity, n),
        alpha_T=_uniform(rng, ranges.withdrawal_trust_sensitivity, n),
        omega=_uniform(rng, ranges.withdrawal_fraction, n),
        theta_C_w=_uniform(rng, ranges.withdrawal_scar_threshold, n),
        theta_R_w=_uniform(rng, ranges.withdrawal_rumor_threshold, n),
        adopter=rng.random(n) < adoption_prob,
    )
    balance = _uniform(rng, ranges.initial_balance, n)
    subsets = np.argsort(rng.random((n, n_merchants)), axis=1, kind="stable")[:, :k]
    exposure = ExposureMap.uniform(subsets)

    theta_op1 = _uniform(rng, merchants.degradation_threshold, n_merchants)
    merchant_params = MerchantParams(
        theta_op1=theta_op1,
        theta_op2=theta_op1 + _uniform(rng, merchants.fallback_gap, n_merchants),
        dwell_init=rng.integers(merchants.dwell_steps[0], merchants.dwell_steps[1] + 1, n_merchants).astype(np.float64),
        eta=merchants.unknown_weight,
        epsilon=merchants.epsilon,
        window_len=merchants.window_len,
        clean_required=merchants.clean_required,
        idle_counts_clean=merchants.idle_counts_clean,
    )
    log.debug("sampled %d customers over %d merchants (%d each)", n, n_merchants, k)
    return Population(
        params=params,
        customers=CustomerState.initial(n, ranges.initial_trust, balance),
        merchant_params=merchant_params,
        merchants=MerchantState.initial(n_merchants, merchants.window_len),
        exposure=exposure,
    )

