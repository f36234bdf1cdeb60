"""Run configuration and the dotted-key JSON config format.

A config file is a flat JSON object such as::

    {"hazard.spread_probability": 0.2, "sim.p_spf": 0.5, "comms.alpha": 1.0}

Nested objects (``{"hazard": {"spread_probability": 0.2}}``) are accepted too.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from evacnav.comms import COMMS_MODES, CommsParams
from evacnav.energy import BatteryParams, EnergyModel
from evacnav.hazard import HazardParams
from evacnav.spf import SpfParams

ALGORITHMS = ("dijkstra", "cpnst", "cpn-spf")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RnnParams:
    epsilon: float = 0.1
    threshold_smoothing_a: float = 0.8
    fixed_point_tolerance: float = 1e-6

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"rnn.epsilon must lie in [0, 1], got {self.epsilon}")
        if not 0.0 < self.threshold_smoothing_a < 1.0:
            raise ConfigError(f"rnn.threshold_smoothing_a must lie in (0, 1), got {self.threshold_smoothing_a}")
        if not self.fixed_point_tolerance > 0:
            raise ConfigError("rnn.fixed_point_tolerance must be positive")


@dataclass(frozen=True)
class CpnParams:
    packets_per_recompute: int = 5
    hop_limit_factor: int = 4
    congestion_gamma: float = 0.2
    walk_speed_mps: float = 1.4

    def __post_init__(self) -> None:
        if self.packets_per_recompute < 1:
            raise ConfigError("cpn.packets_per_recompute must be at least 1")
        if self.hop_limit_factor < 1:
            raise ConfigError("cpn.hop_limit_factor must be at least 1")
        if self.congestion_gamma < 0:
            raise ConfigError("cpn.congestion_gamma must be non-negative")
        if not self.walk_speed_mps > 0:
            raise ConfigError("cpn.walk_speed_mps must be positive")


@dataclass(frozen=True)
class SimConfig:
    evacuee_count: int = 30
    algorithm: str = "cpn-spf"
    comms_mode: str = "ahcpn"
    seed: int = 1
    step_s: float = 0.5
    max_steps: int = 2000
    p_spf: float = 0.5
    walk_speed_mps: float = 1.4
    hazard: HazardParams = field(default_factory=HazardParams)
    spf: SpfParams = field(default_factory=SpfParams)
    rnn: RnnParams = field(default_factory=RnnParams)
    cpn: CpnParams = field(default_factory=CpnParams)
    battery: BatteryParams = field(default_factory=BatteryParams)
    energy: EnergyModel = field(default_factory=EnergyModel)
    comms: CommsParams = field(default_factory=CommsParams)

    def __post_init__(self) -> None:
        if self.evacuee_count < 0:
            raise ConfigError(f"evacuee count must be non-negative, got {self.evacuee_count}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {', '.join(ALGORITHMS)}; got {self.algorithm!r}")
        if self.comms_mode not in COMMS_MODES:
            raise ConfigError(f"comms mode must be one of {', '.join(COMMS_MODES)}; got {self.comms_mode!r}")
        if not 0.0 <= self.p_spf <= 1.0:
            raise ConfigError(f"sim.p_spf must lie in [0, 1], got {self.p_spf}")
        if not self.step_s > 0:
            raise ConfigError("sim.step_s must be positive")
        if self.max_steps < 0:
            raise ConfigError("sim.max_steps must be non-negative")
        if not self.walk_speed_mps > 0:
            raise ConfigError("sim.walk_speed_mps must be positive")


# dotted prefix -> SimConfig attribute holding that group (None: top-level fields)
_SECTIONS = {
    "sim": None,
    "hazard": "hazard",
    "spf": "spf",
    "rnn": "rnn",
    "cpn": "cpn",
    "energy": None,  # split between battery and energy model below
    "comms": "comms",
}


def _flatten(d: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, Mapping):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(template: Any, value: Any, key: str) -> Any:
    if isinstance(template, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false, got {value!r}")
        return value
    if isinstance(template, int) and not isinstance(template, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    if isinstance(template, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    return value


def apply_overrides(cfg: SimConfig, overrides: Mapping[str, Any]) -> SimConfig:
    """Return ``cfg`` with dotted-key ``overrides`` applied."""
    groups: dict[str, dict[str, Any]] = {}
    top: dict[str, Any] = {}
    sim_fields = {f.name for f in fields(SimConfig)}
    for key, value in _flatten(overrides).items():
        section, _, name = key.partition(".")
        if section not in _SECTIONS or not name:
            raise ConfigError(f"unknown config key {key!r}")
        if section == "sim":
            if name not in sim_fields or name in {"hazard", "spf", "rnn", "cpn", "battery", "energy", "comms"}:
                raise ConfigError(f"unknown config key {key!r}")
            top[name] = _coerce(getattr(cfg, name), value, key)
            continue
        if section == "energy":
            attr = "battery" if name in {f.name for f in fields(BatteryParams)} else "energy"
        else:
            attr = _SECTIONS[section]
        group = getattr(cfg, attr)
        if name not in {f.name for f in fields(group)}:
            raise ConfigError(f"unknown config key {key!r}")
        if attr == "hazard" and name == "ignition_node":
            if not (value in ("random", "none") or (isinstance(value, int) and not isinstance(value, bool))):
                raise ConfigError(f"{key} must be 'random', 'none' or a node id, got {value!r}")
            groups.setdefault(attr, {})[name] = value
        else:
            groups.setdefault(attr, {})[name] = _coerce(getattr(group, name), value, key)
    try:
        updated = {attr: replace(getattr(cfg, attr), **vals) for attr, vals in groups.items()}
        return replace(cfg, **top, **updated)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path: str | Path) -> dict[str, Any]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc
