"""Scenario description and the YAML configuration schema."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .channel import (DEFAULT_SPREADING, SOUND_SPEED, SOURCE_LEVEL_DB_PER_WATT,
                      NoiseModelParams, subcarrier_freqs)
from .optimizer import ConfigError, TdgrsConfig
from .sensing import TargetSpec

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class UserSpec:
    depth_m: float
    range_m: float  # horizontal range


def _default_users():
    # three seabed nodes and one near-surface node
    return (UserSpec(118.0, 2000.0), UserSpec(15.0, 3500.0),
            UserSpec(118.0, 3000.0), UserSpec(110.0, 4500.0))


def _default_targets():
    return (TargetSpec(0.5, 2.0e-3, math.radians(20.0)),
            TargetSpec(0.3, 9.0e-3, math.radians(-35.0)))


@dataclass(frozen=True)
class Scenario:
    K: int = 64
    Mt: int = 4
    Mr: int = 4
    Nu: int = 2
    f_l: float = 1000.0
    bandwidth: float = 4000.0
    P_total: float = 1.0
    T_g: float = 0.05
    users: tuple = field(default_factory=_default_users)
    targets: tuple = field(default_factory=_default_targets)
    noise: NoiseModelParams = field(default_factory=NoiseModelParams)
    water_depth_m: float = 120.0
    array_depth_m: float = 20.0
    psk_order: int = 4
    oversample: int = 4
    seed: int = 0
    n_paths: int = 5
    spreading: float = DEFAULT_SPREADING
    L0: float = 1.0
    gains: tuple = (1.0, 1.0)
    source_level_db_per_watt: float = SOURCE_LEVEL_DB_PER_WATT
    sound_speed: float = SOUND_SPEED
    element_spacing_m: float | None = None  # default lambda/2 at f_l
    sensing_noise_power: float = 0.0
    channel_file: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("K", "Mt", "Mr", "Nu", "psk_order", "oversample", "n_paths"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"scenario.{name} must be >= 1")
        if self.K % self.Mt:
            raise ConfigError(f"scenario.Mt={self.Mt} must divide K={self.K}")
        if self.K % self.Nu:
            raise ConfigError(f"scenario.Nu={self.Nu} must divide K={self.K}")
        if self.psk_order < 2:
            raise ConfigError("scenario.psk_order must be >= 2")
        if self.bandwidth <= 0 or self.f_l <= 0 or self.P_total <= 0:
            raise ConfigError("scenario.f_l, bandwidth and P_total must be positive")
        if len(self.users) < self.Nu and self.channel_file is None:
            raise ConfigError(f"scenario.users lists {len(self.users)} users but Nu={self.Nu}")
        for u in self.users:
            if u.range_m <= 0 or u.depth_m <= 0 or u.depth_m > self.water_depth_m:
                raise ConfigError(f"scenario.users: invalid placement {u}")
        if not 0 < self.array_depth_m <= self.water_depth_m:
            raise ConfigError("scenario.array_depth_m must lie inside the water column")

    @property
    def M(self) -> int:
        return max(self.Mt, self.Mr)

    @property
    def df(self) -> float:
        return self.bandwidth / self.K

    @property
    def symbol_duration(self) -> float:
        return 1.0 / self.df

    @property
    def freqs(self) -> np.ndarray:
        return subcarrier_freqs(self.f_l, self.bandwidth, self.K)

    @property
    def d_r(self) -> float:
        if self.element_spacing_m is not None:
            return self.element_spacing_m
        return self.sound_speed / self.f_l / 2

    @property
    def d_t(self) -> float:
        return self.Mr * self.d_r

    def replace(self, **kw) -> "Scenario":
        return dataclasses.replace(self, **kw)


def full_scale_scenario(**kw) -> Scenario:
    """Full-scale set-up: K = 1024, 4 kHz band from 1 kHz, 4 transmit and 4 receive elements, 4 users."""
    base = dict(K=1024, Mt=4, Mr=4, Nu=4, f_l=1000.0, bandwidth=4000.0, P_total=1.0,
                water_depth_m=120.0, array_depth_m=20.0)
    base.update(kw)
    return Scenario(**base)


SCENARIO_REQUIRED = ("K", "Mt", "Mr", "Nu", "f_l", "bandwidth", "P_total")
_SCENARIO_FIELDS = {f.name for f in dataclasses.fields(Scenario)}
_SEARCH_FIELDS = {f.name for f in dataclasses.fields(TdgrsConfig)}


def _require(d: dict, keys, prefix: str):
    for k in keys:
        if k not in d:
            raise ConfigError(f"missing config key '{prefix}{k}'")


def _reject_unknown(d: dict, allowed, prefix: str):
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown config key '{prefix}{k}'")


def _target_from_dict(t: dict, i: int) -> TargetSpec:
    prefix = f"scenario.targets[{i}]."
    _require(t, ("scatter_coeff", "delay_s"), prefix)
    _reject_unknown(t, {"scatter_coeff", "delay_s", "angle_rad", "angle_deg"}, prefix)
    angle = math.radians(t["angle_deg"]) if "angle_deg" in t else float(t.get("angle_rad", 0.0))
    gamma = t["scatter_coeff"]
    if isinstance(gamma, (list, tuple)):
        gamma = complex(gamma[0], gamma[1])
    return TargetSpec(complex(gamma), float(t["delay_s"]), angle)


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ConfigError("config key 'scenario' must be a mapping")
    _require(d, SCENARIO_REQUIRED, "scenario.")
    _reject_unknown(d, _SCENARIO_FIELDS, "scenario.")
    kw = dict(d)
    if "users" in kw:
        users = []
        for i, u in enumerate(kw["users"]):
            _require(u, ("depth_m", "range_m"), f"scenario.users[{i}].")
            _reject_unknown(u, {"depth_m", "range_m"}, f"scenario.users[{i}].")
            users.append(UserSpec(float(u["depth_m"]), float(u["range_m"])))
        kw["users"] = tuple(users)
    if "targets" in kw:
        kw["targets"] = tuple(_target_from_dict(t, i) for i, t in enumerate(kw["targets"]))
    if "noise" in kw:
        _reject_unknown(kw["noise"], {"shipping_activity", "wind_speed_mps"}, "scenario.noise.")
        kw["noise"] = NoiseModelParams(**kw["noise"])
    if "gains" in kw:
        kw["gains"] = tuple(float(g) for g in kw["gains"])
    for name in ("K", "Mt", "Mr", "Nu", "psk_order", "oversample", "seed", "n_paths"):
        if name in kw:
            kw[name] = int(kw[name])
    try:
        return Scenario(**kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid scenario: {exc}") from exc


def search_from_dict(d: dict) -> TdgrsConfig:
    _reject_unknown(d, _SEARCH_FIELDS, "search.")
    kw = dict(d)
    for name in ("groups", "e1", "e2", "feasible_cap", "seed"):
        if name in kw:
            kw[name] = int(kw[name])
    for name in ("prr_min", "papr_0"):
        if name in kw:
            kw[name] = float(kw[name])
    return TdgrsConfig(**kw)


def scenario_to_dict(s: Scenario) -> dict:
    d = {}
    for f in dataclasses.fields(Scenario):
        v = getattr(s, f.name)
        if f.name == "users":
            v = [{"depth_m": u.depth_m, "range_m": u.range_m} for u in v]
        elif f.name == "targets":
            v = [{"scatter_coeff": [t.scatter_coeff.real, t.scatter_coeff.imag],
                  "delay_s": t.delay_s, "angle_rad": t.angle_rad} for t in v]
        elif f.name == "noise":
            v = dataclasses.asdict(v)
        elif f.name == "gains":
            v = list(v)
        d[f.name] = v
    return d


def load_config(path) -> dict:
    """Parse a YAML config file and check its schema version."""
    text = Path(path).read_text()
    try:
        cfg = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    _require(cfg, ("schema_version",), "")
    if int(cfg["schema_version"]) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {cfg['schema_version']}")
    _reject_unknown(cfg, {"schema_version", "scenario", "search", "sweep"}, "")
    return cfg
