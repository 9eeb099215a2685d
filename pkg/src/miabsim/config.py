"""Run configuration: TOML ingestion, defaults, and validation.

An empty file yields the full default configuration (the three-donor bus
scenario). Unknown keys are rejected; validation reports every violation
at once.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .channel import ChannelConfig
from .metrics import MetricsConfig
from .scenario import ScenarioConfig
from .topology import TAConfig
from .traffic import TrafficConfig


@dataclass
class MacConfig:
    duplex_pattern: tuple[str, ...] = ("DL", "UL")
    se_cap: float = 7.4
    overhead_factor: float = 0.75
    scheduler: str = "round_robin"


@dataclass
class RunSection:
    seed: int = 1
    duration_slots: int | None = None  # None: bus traversal time
    out_dir: str = "out"


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    mac: MacConfig = field(default_factory=MacConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    ta: TAConfig = field(default_factory=TAConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    run: RunSection = field(default_factory=RunSection)

    def echo(self) -> dict:
        return dataclasses.asdict(self)


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))


_SECTIONS = {
    "scenario": ScenarioConfig,
    "channel": ChannelConfig,
    "mac": MacConfig,
    "traffic": TrafficConfig,
    "ta": TAConfig,
    "metrics": MetricsConfig,
    "run": RunSection,
}

_LIST_FIELDS = {("scenario", "ped_counts"), ("mac", "duplex_pattern")}


def _apply_section(obj, section: str, data: dict, problems: list[str]):
    known = {f.name for f in fields(obj)}
    for key, value in data.items():
        if key not in known:
            problems.append(f"{section}.{key}: unknown key")
            continue
        if (section, key) in _LIST_FIELDS:
            if not isinstance(value, (list, tuple)):
                problems.append(f"{section}.{key}: expected a list")
                continue
            value = tuple(value)
        current = getattr(obj, key)
        if isinstance(current, bool) and not isinstance(value, bool):
            problems.append(f"{section}.{key}: expected a boolean")
            continue
        if isinstance(current, float) and isinstance(value, (int, float)) and not isinstance(value, bool):
            value = float(value)
        elif isinstance(current, int) and not isinstance(current, bool):
            if isinstance(value, bool) or not isinstance(value, int):
                problems.append(f"{section}.{key}: expected an integer")
                continue
        elif isinstance(current, str) and not isinstance(value, str):
            problems.append(f"{section}.{key}: expected a string")
            continue
        setattr(obj, key, value)
    return obj


def validate(cfg: RunConfig) -> list[str]:
    """All constraint violations, empty when the config is usable."""
    p: list[str] = []
    sc = cfg.scenario
    if sc.block_size_m <= 0:
        p.append("scenario.block_size_m: must be > 0")
    if sc.street_width_m <= 0:
        p.append("scenario.street_width_m: must be > 0")
    if len(sc.ped_counts) != 3:
        p.append("scenario.ped_counts: must have exactly 3 entries (one per donor)")
    elif any((not isinstance(c, int)) or c < 0 for c in sc.ped_counts):
        p.append("scenario.ped_counts: entries must be integers >= 0")
    if sc.passenger_count < 1:
        p.append("scenario.passenger_count: must be >= 1")
    if sc.bus_speed_kmh <= 0:
        p.append("scenario.bus_speed_kmh: must be > 0")
    if sc.ped_speed_kmh < 0:
        p.append("scenario.ped_speed_kmh: must be >= 0")
    if sc.donor_placement not in ("mid_edge", "corner"):
        p.append("scenario.donor_placement: must be 'mid_edge' or 'corner'")
    if sc.trajectory_overhang_m < 0:
        p.append("scenario.trajectory_overhang_m: must be >= 0")

    ch = cfg.channel
    if ch.fc_ghz <= 0:
        p.append("channel.fc_ghz: must be > 0")
    if ch.pathloss_model not in ("umi", "uma"):
        p.append("channel.pathloss_model: must be 'umi' or 'uma'")
    if ch.decorrelation_distance_m <= 0:
        p.append("channel.decorrelation_distance_m: must be > 0")
    if ch.gain_refresh_period_slots < 1:
        p.append("channel.gain_refresh_period_slots: must be >= 1")

    mc = cfg.mac
    if len(mc.duplex_pattern) == 0:
        p.append("mac.duplex_pattern: must not be empty")
    elif any(d not in ("DL", "UL") for d in mc.duplex_pattern):
        p.append("mac.duplex_pattern: entries must be 'DL' or 'UL'")
    if mc.se_cap <= 0:
        p.append("mac.se_cap: must be > 0")
    if not 0 < mc.overhead_factor <= 1:
        p.append("mac.overhead_factor: must be in (0, 1]")
    if mc.scheduler != "round_robin":
        p.append("mac.scheduler: only 'round_robin' is available")

    tr = cfg.traffic
    if tr.packet_size_bits < 1:
        p.append("traffic.packet_size_bits: must be >= 1")
    if tr.inter_arrival_slots < 1:
        p.append("traffic.inter_arrival_slots: must be >= 1")

    ta = cfg.ta
    if ta.policy not in ("standard", "load_aware"):
        p.append("ta.policy: must be 'standard' or 'load_aware'")
    if ta.min_rsrp_diff_db < 0:
        p.append("ta.min_rsrp_diff_db: must be >= 0")
    if ta.evaluation_period_slots < 1:
        p.append("ta.evaluation_period_slots: must be >= 1")
    if not 0.0 <= ta.l3_filter_coefficient <= 1.0:
        p.append("ta.l3_filter_coefficient: must be in [0, 1]")
    if ta.time_to_trigger_evals < 1:
        p.append("ta.time_to_trigger_evals: must be >= 1")
    if ta.hysteresis_db < 0:
        p.append("ta.hysteresis_db: must be >= 0")
    if ta.semantics not in ("sequential", "best_candidate"):
        p.append("ta.semantics: must be 'sequential' or 'best_candidate'")

    mt = cfg.metrics
    if mt.window_slots < 1:
        p.append("metrics.window_slots: must be >= 1")
    if mt.snapshot_cadence_slots < 1:
        p.append("metrics.snapshot_cadence_slots: must be >= 1")

    rn = cfg.run
    if rn.duration_slots is not None and rn.duration_slots < 1:
        p.append("run.duration_slots: must be >= 1 when set")
    return p


def config_from_dict(data: dict) -> RunConfig:
    problems: list[str] = []
    cfg = RunConfig()
    for section, payload in data.items():
        if section not in _SECTIONS:
            problems.append(f"{section}: unknown section")
            continue
        if not isinstance(payload, dict):
            problems.append(f"{section}: expected a table of keys")
            continue
        _apply_section(getattr(cfg, section), section, payload, problems)
    problems.extend(validate(cfg))
    if problems:
        raise ConfigError(problems)
    return cfg


def parse_config(path) -> RunConfig:
    """Load and validate a TOML run configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    with path.open("rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"TOML parse error: {exc}"]) from exc
    return config_from_dict(data)


def preset_config(name: str) -> RunConfig:
    """Built-in experiment presets differing only in ta.policy."""
    if name not in ("standard", "load_aware"):
        raise ConfigError([f"unknown preset {name!r} (use 'standard' or 'load_aware')"])
    cfg = RunConfig()
    cfg.ta.policy = name
    return cfg
