"""Pipeline configuration: dataclass sections loaded from JSON and layered
as defaults < file < explicit overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .augment import FeasibilityLimits
from .events import SamplerConfig
from .ik import IKParams
from .rlprep import ObservationConfig, RewardConfig

SECTIONS = {
    "sampler": SamplerConfig,
    "ik": IKParams,
    "limits": FeasibilityLimits,
    "observation": ObservationConfig,
    "rewards": RewardConfig,
}


class ConfigError(ValueError):
    pass


def _section_dict(obj) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(obj).items()}


def _build(cls, values: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    try:
        return cls(**values)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


@dataclass(frozen=True)
class PipelineConfig:
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    ik: IKParams = field(default_factory=IKParams)
    limits: FeasibilityLimits = field(default_factory=FeasibilityLimits)
    observation: ObservationConfig = field(default_factory=ObservationConfig)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    termination_distance: float = 0.5  # m

    def to_dict(self) -> dict:
        d = {name: _section_dict(getattr(self, name)) for name in SECTIONS}
        d["termination_distance"] = self.termination_distance
        return d

    @classmethod
    def from_dict(cls, d: dict, where: str = "config") -> "PipelineConfig":
        return cls().merged(d, where)

    def merged(self, d: dict, where: str = "config") -> "PipelineConfig":
        """New config with the (possibly partial) sections of ``d`` layered on top."""
        if not isinstance(d, dict):
            raise ConfigError(f"{where}: top level must be an object")
        unknown = sorted(set(d) - set(SECTIONS) - {"termination_distance"})
        if unknown:
            raise ConfigError(f"{where}: unknown section(s) {', '.join(unknown)}")
        out = {}
        for name, cls_ in SECTIONS.items():
            if name in d:
                if not isinstance(d[name], dict):
                    raise ConfigError(f"{where}: section {name!r} must be an object")
                base = _section_dict(getattr(self, name))
                out[name] = _build(cls_, {**base, **d[name]}, f"{where}: {name}")
        if "termination_distance" in d:
            if not d["termination_distance"] > 0:
                raise ConfigError(f"{where}: termination_distance must be positive")
            out["termination_distance"] = float(d["termination_distance"])
        return replace(self, **out)

    def with_override(self, dotted: str, value) -> "PipelineConfig":
        """Apply one ``section.key`` override (``termination_distance`` has no section)."""
        if "." not in dotted:
            return self.merged({dotted: value}, "override")
        section, key = dotted.split(".", 1)
        return self.merged({section: {key: value}}, "override")


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: parse error: {e}") from None
    return PipelineConfig.from_dict(d, str(path))


def parse_override(text: str) -> tuple[str, object]:
    """``section.key=value`` with a JSON value (bare strings allowed)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like section.key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value
