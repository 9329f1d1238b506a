from __future__ import annotations

import copy
import logging
import math
import typing
from dataclasses import MISSING, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

import yaml

log = logging.getLogger(__name__)

Range = Tuple[float, float]
StepRange = Tuple[int, int]

PHASE_ROLES = ("stable", "decline", "outage", "recovery", "post")
PERCEPTION_TIMINGS = ("current", "lagged")
SUBSTITUTION_TRIGGERS = ("on_failure_and_unknown",)
# Only these keys may differ between the legs of a paired comparison.
POLICY_PREFIXES = ("substitution.", "merchants.comm_quality", "merchants.sticky_broadcasts")


class ConfigError(ValueError):
    """Invalid configuration, anchored to the offending key and (when known) its source line."""

    def __init__(self, key: str, message: str, *, source: Optional[str] = None, line: Optional[int] = None) -> None:
        super().__init__(message)
        self.key = key
        self.message = message
        self.source = source
        self.line = line

    def __str__(self) -> str:
        anchor = ""
        if self.source:
            anchor = f"{self.source}:{self.line}: " if self.line else f"{self.source}: "
        return f"{anchor}{self.key}: {self.message}"


def _typical(low: float, high: float) -> Dict[str, Any]:
    return {"typical": (low, high)}


@dataclass
class PhaseConfig:
    duration: int
    p_success: float
    p_failure: Optional[float] = None
    p_unknown: Optional[float] = None
    ramp: bool = False
    role: str = "stable"


@dataclass
class PeakDemandConfig:
    start: int
    duration: int
    multiplier: float = field(default=1.5, metadata=_typical(1.0, 2.0))


def _baseline_phases() -> List[PhaseConfig]:
    return [
        PhaseConfig(duration=50, p_success=0.99, role="stable"),
        PhaseConfig(duration=10, p_success=0.40, ramp=True, role="decline"),
        PhaseConfig(duration=20, p_success=0.40, role="outage"),
        PhaseConfig(duration=40, p_success=0.99, ramp=True, role="recovery"),
        PhaseConfig(duration=180, p_success=0.99, role="post"),
    ]


@dataclass
class ScenarioConfig:
    phases: List[PhaseConfig] = field(default_factory=_baseline_phases)
    peak_demand: List[PeakDemandConfig] = field(default_factory=lambda: [PeakDemandConfig(start=95, duration=10)])
    # Share of (1 - p_success) assigned to explicit failures when a phase omits p_failure/p_unknown.
    failure_share: float = 0.5


@dataclass
class PopulationConfig:
    n_customers: int = field(default=1000, metadata=_typical(1_000, 10_000))
    n_merchants: int = field(default=100, metadata=_typical(100, 1_000))
    merchants_per_customer: int = 3
    initial_trust: float = 0.95
    initial_balance: Range = (1.0, 1.0)
    attempt_propensity: Range = field(default=(0.1, 0.4), metadata=_typical(0.1, 0.4))
    trust_threshold_upper: Range = (0.55, 0.75)
    trust_threshold_gap: Range = (0.15, 0.25)
    trust_persistence: Range = field(default=(0.8, 0.95), metadata=_typical(0.8, 0.95))
    scar_persistence: Range = field(default=(0.9, 0.99), metadata=_typical(0.9, 0.99))
    rumor_persistence: Range = field(default=(0.9, 0.99), metadata=_typical(0.9, 0.99))
    scar_increment: Range = field(default=(0.05, 0.2), metadata=_typical(0.05, 0.2))
    scar_trust_erosion: Range = (0.02, 0.06)
    scar_mode_weight: Range = (0.5, 1.0)
    withdrawal_rumor_sensitivity: Range = (1.0, 2.0)
    withdrawal_scar_sensitivity: Range = (1.0, 2.0)
    withdrawal_trust_sensitivity: Range = (1.0, 2.0)
    withdrawal_fraction: Range = field(default=(0.05, 0.3), metadata=_typical(0.05, 0.3))
    withdrawal_scar_threshold: Range = field(default=(0.4, 0.7), metadata=_typical(0.4, 0.7))
    withdrawal_rumor_threshold: Range = field(default=(0.4, 0.7), metadata=_typical(0.4, 0.7))


@dataclass
class NetworkConfig:
    mean_degree: int = field(default=8, metadata=_typical(6, 12))
    rewire_prob: float = field(default=0.1, metadata=_typical(0.05, 0.2))


@dataclass
class BehaviorConfig:
    activity_ok: float = 1.0
    activity_frustrated: float = 0.7
    activity_avoiding: float = 0.3
    broadcast_weight: float = 0.6
    social_weight: float = 0.4
    outflow_feedback_weight: float = 0.0
    outflow_reference: float = 0.01
    failure_severity: float = field(default=0.75, metadata=_typical(0.5, 1.0))
    unknown_severity: float = field(default=1.0, metadata=_typical(0.8, 1.2))
    perception_timing: str = "current"


@dataclass
class MerchantConfig:
    window_len: int = 10
    degradation_threshold: Range = (0.1, 0.2)
    fallback_gap: Range = (0.15, 0.25)
    unknown_weight: float = 0.7
    epsilon: float = 1e-9
    dwell_steps: StepRange = field(default=(5, 20), metadata=_typical(5, 20))
    clean_required: int = 3
    # Steps with no attempts still extend the clean streak.
    idle_counts_clean: bool = True
    comm_quality: float = 1.0
    sticky_broadcasts: bool = True


@dataclass
class SubstitutionConfig:
    enabled: bool = False
    adoption_prob: float = 0.6
    # Below 1 an adopter sometimes skips the transfer after an adverse card outcome.
    usage_prob: float = 1.0
    transfer_success_prob: float = 0.8
    trigger: str = "on_failure_and_unknown"


@dataclass
class RunSettings:
    horizon: int = 300
    seed: int = 1
    seeds: int = 12
    out_dir: Path = field(default_factory=lambda: Path("runs"))
    parallel: int = 1
    events: bool = False
    dump_timeline: bool = True
    dump_network: bool = False
    dump_population: bool = False


@dataclass
class SimulationConfig:
    base_dir: Path = field(default_factory=Path.cwd, metadata={"schema": False})
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    population: PopulationConfig = field(default_factory=PopulationConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    behavior: BehaviorConfig = field(default_factory=BehaviorConfig)
    merchants: MerchantConfig = field(default_factory=MerchantConfig)
    substitution: SubstitutionConfig = field(default_factory=SubstitutionConfig)
    run: RunSettings = field(default_factory=RunSettings)

    def resolve(self) -> "SimulationConfig":
        """Anchor relative output paths at the config file's directory."""
        out = self.run.out_dir
        self.run.out_dir = (out if out.is_absolute() else self.base_dir / out).resolve()
        return self

    def with_seed(self, seed: int) -> "SimulationConfig":
        clone = copy.deepcopy(self)
        clone.run.seed = int(seed)
        return clone

    def as_dict(self) -> Dict[str, Any]:
        return _dump(self)


def _dump(obj: Any) -> Any:
    if is_dataclass(obj):
        return {f.name: _dump(getattr(obj, f.name)) for f in fields(obj) if f.metadata.get("schema", True)}
    if isinstance(obj, (list, tuple)):
        return [_dump(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


# --------------------------------------------------------------------------- loading


class _Builder:
    """Turns a composed YAML node tree into dataclasses, refusing unknown keys."""

    def __init__(self, source: Optional[str]) -> None:
        self.source = source
        self.lines: Dict[str, int] = {}

    def error(self, key: str, message: str, node: Optional[yaml.Node] = None) -> ConfigError:
        line = node.start_mark.line + 1 if node is not None else self.lines.get(key)
        return ConfigError(key, message, source=self.source, line=line)

    def build(self, cls: type, node: yaml.Node, prefix: str) -> Any:
        if not isinstance(node, yaml.MappingNode):
            raise self.error(prefix or "<root>", "expected a mapping", node)
        hints = typing.get_type_hints(cls)
        known = {f.name: f for f in fields(cls) if f.metadata.get("schema", True)}
        kwargs: Dict[str, Any] = {}
        for key_node, value_node in node.value:
            name = key_node.value
            dotted = f"{prefix}.{name}" if prefix else name
            if name not in known:
                raise self.error(dotted, "unknown key", key_node)
            if name in kwargs:
                raise self.error(dotted, "duplicate key", key_node)
            self.lines[dotted] = key_node.start_mark.line + 1
            kwargs[name] = self.convert(hints[name], value_node, dotted)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            missing = [f.name for f in fields(cls) if f.name not in kwargs and f.init and _required(f)]
            key = f"{prefix}.{missing[0]}" if missing else prefix
            raise self.error(key, f"missing required key ({exc})", node) from None

    def convert(self, hint: Any, node: yaml.Node, dotted: str) -> Any:
        if is_dataclass(hint):
            return self.build(hint, node, dotted)
        origin = typing.get_origin(hint)
        args = typing.get_args(hint)
        if origin is typing.Union:
            inner = [a for a in args if a is not type(None)]
            if isinstance(node, yaml.ScalarNode) and node.tag == "tag:yaml.org,2002:null":
                return None
            return self.convert(inner[0], node, dotted)
        if origin in (list, List):
            if not isinstance(node, yaml.SequenceNode):
                raise self.error(dotted, "expected a list", node)
            return [self.convert(args[0], item, f"{dotted}[{i}]") for i, item in enumerate(node.value)]
        if origin in (tuple, Tuple):
            if not isinstance(node, yaml.SequenceNode) or len(node.value) != len(args):
                raise self.error(dotted, f"expected a [low, high] pair", node)
            return tuple(self.convert(a, item, dotted) for a, item in zip(args, node.value))
        value = yaml.safe_load(yaml.serialize(node))
        return coerce_scalar(hint, value, dotted, error=lambda msg: self.error(dotted, msg, node))


def _required(f: Any) -> bool:
    return f.default is MISSING and f.default_factory is MISSING


def coerce_scalar(hint: Any, value: Any, dotted: str, error=None) -> Any:
    fail = error or (lambda msg: ConfigError(dotted, msg))
    if hint is bool:
        if not isinstance(value, bool):
            raise fail(f"expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise fail(f"expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise fail(f"expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise fail(f"expected a string, got {value!r}")
        return value
    if hint is Path:
        if not isinstance(value, str):
            raise fail(f"expected a path string, got {value!r}")
        return Path(value)
    return value


def load_config(path: Path | str, overrides: Iterable[str] = ()) -> SimulationConfig:
    """Read, strictly parse, and validate a YAML run configuration."""
    path = Path(path)
    source = str(path)
    text = path.read_text(encoding="utf-8")
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("<yaml>", str(exc).splitlines()[0], source=source, line=mark.line + 1 if mark else None) from None
    builder = _Builder(source)
    if root is None:
        cfg = SimulationConfig()
    else:
        cfg = builder.build(SimulationConfig, root, "")
    cfg.base_dir = path.resolve().parent
    if overrides:
        cfg, _ = apply_overrides(cfg, overrides)
    try:
        validate_config(cfg)
    except ConfigError as exc:
        exc.source = source
        exc.line = exc.line or builder.lines.get(exc.key) or _nearest_line(builder.lines, exc.key)
        raise
    return cfg.resolve()


def _nearest_line(lines: Dict[str, int], key: str) -> Optional[int]:
    while "." in key:
        key = key.rsplit(".", 1)[0]
        if key in lines:
            return lines[key]
    return lines.get(key)


def apply_overrides(cfg: SimulationConfig, overrides: Iterable[str]) -> Tuple[SimulationConfig, Dict[str, Any]]:
    """Apply ``section.key=value`` assignments to a copy of ``cfg``."""
    clone = copy.deepcopy(cfg)
    applied: Dict[str, Any] = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like section.key=value")
        dotted, raw = item.split("=", 1)
        dotted = dotted.strip()
        parts = dotted.split(".")
        target: Any = clone
        for part in parts[:-1]:
            if not is_dataclass(target) or part not in {f.name for f in fields(target)}:
                raise ConfigError(dotted, "unknown key")
            target = getattr(target, part)
        leaf = parts[-1]
        if not is_dataclass(target) or leaf not in {f.name for f in fields(target) if f.metadata.get("schema", True)}:
            raise ConfigError(dotted, "unknown key")
        hint = typing.get_type_hints(type(target))[leaf]
        value = yaml.safe_load(raw)
        if typing.get_origin(hint) in (tuple, Tuple):
            args = typing.get_args(hint)
            if not isinstance(value, list) or len(value) != len(args):
                raise ConfigError(dotted, "expected a [low, high] pair")
            value = tuple(coerce_scalar(a, v, dotted) for a, v in zip(args, value))
        elif is_dataclass(hint) or typing.get_origin(hint) in (list, List):
            raise ConfigError(dotted, "only scalar and range keys can be overridden")
        else:
            value = coerce_scalar(hint, value, dotted)
        setattr(target, leaf, value)
        applied[dotted] = value
    return clone, applied


def is_policy_key(dotted: str) -> bool:
    return any(dotted == p or (p.endswith(".") and dotted.startswith(p)) for p in POLICY_PREFIXES)


# --------------------------------------------------------------------------- validation


def _check(cond: bool, key: str, message: str) -> None:
    if not cond:
        raise ConfigError(key, message)


def _check_range(value: Tuple[float, float], key: str, *, lo: float = -math.inf, hi: float = math.inf, open_: bool = False) -> None:
    low, high = value
    _check(low <= high, key, f"range low {low} exceeds high {high}")
    if open_:
        _check(lo < low and high < hi, key, f"range must lie strictly inside ({lo}, {hi})")
    else:
        _check(lo <= low and high <= hi, key, f"range must lie inside [{lo}, {hi}]")


def warn_atypical(section: Any, prefix: str) -> None:
    """Log values outside their documented typical range; they are allowed."""
    for f in fields(section):
        typical = f.metadata.get("typical")
        if not typical:
            continue
        value = getattr(section, f.name)
        lows_highs = value if isinstance(value, tuple) else (value, value)
        if min(lows_highs) < typical[0] or max(lows_highs) > typical[1]:
            log.warning("%s.%s=%s is outside the typical range %s", prefix, f.name, value, list(typical))


def validate_config(cfg: SimulationConfig) -> None:
    from .scenario import ScenarioError, build_piecewise_scenario

    run = cfg.run
    _check(run.horizon > 0, "run.horizon", "must be positive")
    _check(run.seeds > 0, "run.seeds", "must be positive")
    _check(run.parallel >= 1, "run.parallel", "must be at least 1")

    sc = cfg.scenario
    _check(len(sc.phases) > 0, "scenario.phases", "at least one phase is required")
    _check(0.0 <= sc.failure_share <= 1.0, "scenario.failure_share", "must lie in [0, 1]")
    for i, phase in enumerate(sc.phases):
        _check(phase.role in PHASE_ROLES, f"scenario.phases[{i}].role", f"must be one of {list(PHASE_ROLES)}")
    for i, window in enumerate(sc.peak_demand):
        _check(window.multiplier >= 1.0, f"scenario.peak_demand[{i}].multiplier", "demand multiplier must be >= 1")
    try:
        build_piecewise_scenario(sc, run.horizon)
    except ScenarioError as exc:
        raise ConfigError(exc.key or "scenario.phases", str(exc)) from None

    pop = cfg.population
    _check(pop.n_customers > 0, "population.n_customers", "must be positive")
    _check(pop.n_merchants > 0, "population.n_merchants", "must be positive")
    _check(
        1 <= pop.merchants_per_customer <= pop.n_merchants,
        "population.merchants_per_customer",
        "must lie in [1, n_merchants]",
    )
    _check(0.0 <= pop.initial_trust <= 1.0, "population.initial_trust", "must lie in [0, 1]")
    _check_range(pop.initial_balance, "population.initial_balance", lo=0.0)
    _check(pop.initial_balance[0] > 0.0, "population.initial_balance", "balances must be positive")
    _check_range(pop.attempt_propensity, "population.attempt_propensity", lo=0.0, hi=1.0)
    _check_range(pop.trust_threshold_upper, "population.trust_threshold_upper", lo=0.0, hi=1.0)
    _check_range(pop.trust_threshold_gap, "population.trust_threshold_gap", lo=0.0, hi=1.0)
    _check(
        pop.trust_threshold_gap[0] > 0.0,
        "population.trust_threshold_gap",
        "gap must be positive so the upper trust threshold stays above the lower one",
    )
    for name in ("trust_persistence", "scar_persistence", "rumor_persistence"):
        _check_range(getattr(pop, name), f"population.{name}", lo=0.0, hi=1.0, open_=True)
    for name in ("withdrawal_fraction",):
        _check_range(getattr(pop, name), f"population.{name}", lo=0.0, hi=1.0, open_=True)
    for name in ("scar_increment", "scar_trust_erosion", "scar_mode_weight"):
        _check_range(getattr(pop, name), f"population.{name}", lo=0.0)
        _check(getattr(pop, name)[0] > 0.0, f"population.{name}", "must be positive")
    for name in ("withdrawal_rumor_sensitivity", "withdrawal_scar_sensitivity", "withdrawal_trust_sensitivity"):
        _check_range(getattr(pop, name), f"population.{name}", lo=0.0)
        _check(getattr(pop, name)[0] > 0.0, f"population.{name}", "must be positive")
    for name in ("withdrawal_scar_threshold", "withdrawal_rumor_threshold"):
        _check_range(getattr(pop, name), f"population.{name}", lo=0.0, hi=1.0)

    net = cfg.network
    k = net.mean_degree
    _check(k >= 2 and k % 2 == 0, "network.mean_degree", "must be an even number >= 2")
    _check(pop.n_customers > k, "network.mean_degree", f"must be smaller than n_customers={pop.n_customers}")
    _check(0.0 <= net.rewire_prob <= 1.0, "network.rewire_prob", "must lie in [0, 1]")

    beh = cfg.behavior
    phi = (beh.activity_ok, beh.activity_frustrated, beh.activity_avoiding)
    _check(all(0.0 < v <= 1.0 for v in phi), "behavior.activity_ok", "activity factors must lie in (0, 1]")
    _check(
        phi[0] >= phi[1] >= phi[2],
        "behavior.activity_avoiding",
        "activity factors must not increase with avoidance (ok >= frustrated >= avoiding)",
    )
    _check(beh.broadcast_weight >= 0.0, "behavior.broadcast_weight", "must be non-negative")
    _check(beh.social_weight >= 0.0, "behavior.social_weight", "must be non-negative")
    _check(
        abs(beh.broadcast_weight + beh.social_weight - 1.0) <= 1e-9,
        "behavior.social_weight",
        f"broadcast_weight + social_weight must equal 1 (got {beh.broadcast_weight + beh.social_weight})",
    )
    _check(beh.outflow_feedback_weight >= 0.0, "behavior.outflow_feedback_weight", "must be non-negative")
    _check(beh.outflow_reference > 0.0, "behavior.outflow_reference", "must be positive")
    _check(beh.failure_severity > 0.0, "behavior.failure_severity", "must be positive")
    _check(
        beh.unknown_severity >= beh.failure_severity,
        "behavior.unknown_severity",
        "unknown outcomes must weigh at least as much as failures (unknown_severity >= failure_severity)",
    )
    _check(beh.perception_timing in PERCEPTION_TIMINGS, "behavior.perception_timing", f"must be one of {list(PERCEPTION_TIMINGS)}")

    mer = cfg.merchants
    _check(mer.window_len >= 1, "merchants.window_len", "must be at least 1")
    _check_range(mer.degradation_threshold, "merchants.degradation_threshold", lo=0.0)
    _check(mer.degradation_threshold[0] > 0.0, "merchants.degradation_threshold", "must be positive")
    _check_range(mer.fallback_gap, "merchants.fallback_gap", lo=0.0)
    _check(mer.fallback_gap[0] > 0.0, "merchants.fallback_gap", "must be positive")
    _check(0.0 < mer.unknown_weight < 1.0, "merchants.unknown_weight", "must lie in (0, 1)")
    _check(mer.epsilon > 0.0, "merchants.epsilon", "must be positive")
    _check_range(mer.dwell_steps, "merchants.dwell_steps", lo=1)
    _check(mer.clean_required >= 0, "merchants.clean_required", "must be non-negative")
    _check(mer.comm_quality >= 1.0, "merchants.comm_quality", "must be >= 1")

    sub = cfg.substitution
    for name in ("adoption_prob", "usage_prob", "transfer_success_prob"):
        _check(0.0 <= getattr(sub, name) <= 1.0, f"substitution.{name}", "must lie in [0, 1]")
    _check(sub.trigger in SUBSTITUTION_TRIGGERS, "substitution.trigger", f"must be one of {list(SUBSTITUTION_TRIGGERS)}")

    for section, prefix in ((net, "network"), (beh, "behavior"), (mer, "merchants")):
        warn_atypical(section, prefix)
    for i, window in enumerate(sc.peak_demand):
        warn_atypical(window, f"scenario.peak_demand[{i}]")
