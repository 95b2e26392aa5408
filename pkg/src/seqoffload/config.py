"""YAML configuration: profiles, schema validation and conversion to dataclasses."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from .model import ChannelParams
from .scenario import ScenarioConfig
from .tier2 import Tier2Options

PROFILES = ("defaults", "tier1")


class ConfigError(ValueError):
    """Config file is unreadable or violates the schema."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(message)
        self.path = path

    def as_dict(self) -> dict:
        return {"error": "config", "path": self.path, "message": str(self)}


@dataclass(frozen=True)
class ExperimentOptions:
    random_draws: int = 100
    workers: int = 1


@dataclass(frozen=True)
class Config:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    tier2: Tier2Options = field(default_factory=Tier2Options)
    experiment: ExperimentOptions = field(default_factory=ExperimentOptions)

    def with_seed(self, seed: int) -> "Config":
        return replace(self, scenario=self.scenario.replace(seed=seed))

    def to_dict(self) -> dict:
        sc = {k: (list(v) if isinstance(v, tuple) else v)
              for k, v in asdict(self.scenario).items()}
        ch = asdict(self.channel)
        ch.pop("fading")
        ch.pop("num_subchannels")
        return {"scenario": sc, "channel": ch, "tier2": asdict(self.tier2),
                "experiment": asdict(self.experiment)}


def schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("profiles/schema.json").read_text())


def _profile_text(name: str) -> str:
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}; choose from {', '.join(PROFILES)}")
    return resources.files(__package__).joinpath(f"profiles/{name}.yaml").read_text()


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def validate_raw(raw) -> None:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at top level")
    try:
        jsonschema.validate(raw, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path)
        raise ConfigError(exc.message, where) from None


def resolve(raw: dict, _depth: int = 0) -> dict:
    """Validate ``raw`` and layer it on top of its ``base`` profile (if any)."""
    validate_raw(raw)
    base_name = raw.get("base")
    if base_name is None:
        return dict(raw)
    if _depth > len(PROFILES):
        raise ConfigError("profile inheritance loop")
    base = resolve(yaml.safe_load(_profile_text(base_name)), _depth + 1)
    over_ch = raw.get("channel", {})
    # The two noise spellings are alternatives: an override replaces either.
    for key, other in (("noise_density", "noise_dbw_per_hz"),
                       ("noise_dbw_per_hz", "noise_density")):
        if key in over_ch:
            base.get("channel", {}).pop(other, None)
    merged = _merge(base, {k: v for k, v in raw.items() if k != "base"})
    return merged


def from_dict(raw: dict) -> Config:
    data = resolve(raw)
    sc = {k: (tuple(v) if isinstance(v, list) else v)
          for k, v in data.get("scenario", {}).items()}
    ch = dict(data.get("channel", {}))
    if "noise_dbw_per_hz" in ch:
        level = ch.pop("noise_dbw_per_hz")
        if "noise_density" in ch:
            raise ConfigError("give noise_density or noise_dbw_per_hz, not both", "channel")
        ch["noise_density"] = 10.0 ** (level / 10.0)
    try:
        channel = ChannelParams(**{k: v for k, v in ch.items() if k not in ("b_total", "b0")})
        channel = channel.with_bandwidth(ch.get("b_total", channel.b_total),
                                         ch.get("b0", channel.b0))
        return Config(ScenarioConfig(**sc), channel,
                      Tier2Options(**data.get("tier2", {})),
                      ExperimentOptions(**data.get("experiment", {})))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_profile(name: str) -> Config:
    return from_dict(yaml.safe_load(_profile_text(name)))


def load(source: str | Path | None = None) -> Config:
    """Config from a profile name, a YAML file path, or the defaults."""
    if source is None:
        return load_profile("defaults")
    if str(source) in PROFILES:
        return load_profile(str(source))
    path = Path(source)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", str(path)) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}", str(path)) from exc
    return from_dict(raw or {})
