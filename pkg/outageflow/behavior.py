"""Customer dynamics: attempts, experience encoding, scar/trust/rumor updates, mode transitions.

Every function works on scalars or on numpy arrays of per-customer values, so the
engine applies them to the whole population at once and tests call them with
plain floats.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .agents import CustomerParams
from .labels import Mode, OutcomeKind

ArrayLike = Union[float, np.ndarray]

DEFAULT_ACTIVITY = (1.0, 0.7, 0.3)


def _scalar(value):
    return value.item() if isinstance(value, np.ndarray) and value.ndim == 0 else value


@dataclass(frozen=True)
class PaymentOutcome:
    kind: OutcomeKind
    via_substitution: bool = False

    def __post_init__(self) -> None:
        if self.kind == OutcomeKind.NONE and self.via_substitution:
            raise ValueError("a missing attempt cannot be substituted")

    @property
    def adverse(self) -> bool:
        return self.kind in (OutcomeKind.FAILURE, OutcomeKind.UNKNOWN)


@dataclass(frozen=True)
class ExperienceSignal:
    raw: ArrayLike
    normalized: ArrayLike

    @property
    def negative(self) -> ArrayLike:
        return np.asarray(self.raw) < 0


def attempt_probability(
    params: CustomerParams, mode, demand: float, activity: Sequence[float] = DEFAULT_ACTIVITY
) -> ArrayLike:
    phi = np.asarray(activity, dtype=np.float64)[np.asarray(mode, dtype=np.intp)]
    return _scalar(np.minimum(1.0, params.lam * demand * phi))


def experience_values(kinds, alpha_f: float, alpha_u: float, trust: ArrayLike) -> ExperienceSignal:
    """Encode final (post-substitution) outcome kinds into raw and normalized experience."""
    kinds = np.asarray(kinds)
    raw = np.select(
        [kinds == OutcomeKind.SUCCESS, kinds == OutcomeKind.FAILURE, kinds == OutcomeKind.UNKNOWN],
        [1.0, -alpha_f, -alpha_u],
        default=0.0,
    )
    normalized = np.where(
        kinds == OutcomeKind.NONE,
        trust,
        np.clip((raw + alpha_u) / (1.0 + alpha_u), 0.0, 1.0),
    )
    return ExperienceSignal(raw=_scalar(raw), normalized=_scalar(normalized))


def encode_experience(outcome: PaymentOutcome, alpha_f: float, alpha_u: float, current_trust: float) -> ExperienceSignal:
    if not alpha_u >= alpha_f > 0.0:
        raise ValueError(f"experience weights must satisfy alpha_u >= alpha_f > 0 (got {alpha_f}, {alpha_u})")
    return experience_values(int(outcome.kind), alpha_f, alpha_u, current_trust)


def update_scar(scar: ArrayLike, params: CustomerParams, signal: ExperienceSignal) -> ArrayLike:
    return _scalar(np.minimum(1.0, params.rho_C * scar + params.gamma_C * signal.negative))


def update_trust(trust: ArrayLike, scar: ArrayLike, params: CustomerParams, signal: ExperienceSignal) -> ArrayLike:
    value = params.rho_T * trust + (1.0 - params.rho_T) * signal.normalized - params.beta_T * scar
    return _scalar(np.clip(value, 0.0, 1.0))


def update_rumor(rumor: ArrayLike, params: CustomerParams, psi: ArrayLike) -> ArrayLike:
    return params.rho_R * rumor + (1.0 - params.rho_R) * psi


def outflow_signal(previous_outflow: float, total_initial: float, reference: float) -> float:
    """Outflow of the previous step relative to ``reference`` of all initial balances, capped at 1."""
    return min(1.0, previous_outflow / (reference * total_initial))


def composite_perception(
    broadcast_avg: ArrayLike,
    avoiding_frac: ArrayLike,
    w_m: float,
    w_s: float,
    outflow_feedback: ArrayLike = 0.0,
    w_f: float = 0.0,
) -> ArrayLike:
    if w_m < 0.0 or w_s < 0.0 or abs(w_m + w_s - 1.0) > 1e-9:
        raise ValueError(f"perception weights must be non-negative and sum to 1 (got {w_m}, {w_s})")
    return _scalar(np.clip(w_m * broadcast_avg + w_s * avoiding_frac + w_f * outflow_feedback, 0.0, 1.0))


def transition_mode(trust: ArrayLike, scar: ArrayLike, params: CustomerParams):
    effective = trust - params.kappa_C * scar
    modes = np.where(
        effective >= params.theta1,
        Mode.OK,
        np.where(effective >= params.theta2, Mode.FRUSTRATED, Mode.AVOIDING),
    ).astype(np.int8)
    if modes.ndim == 0:
        return Mode(int(modes))
    return modes
