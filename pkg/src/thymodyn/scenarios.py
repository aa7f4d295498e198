"""Scenario presets and JSON scenario configs.

A config file looks like::

    {
      "scenario": 3,
      "overrides": {"b": 0.0},
      "sd": {"dt": 0.0009765625},
      "abs": {"seed": 7, "replicates": 30},
      "c_from": "mu_n"
    }

Only ``scenario`` is required. ``overrides`` replaces individual
:class:`~thymodyn.model.ModelParams` fields; everything not mentioned keeps
its preset value.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

from .agents import AbsConfig
from .model import ModelParams, StateVector, proliferation_rate_from_table1
from .sd import SdConfig

__all__ = ["ConfigError", "ScenarioSpec", "PRESETS", "preset_params", "parse_config", "spec_from_dict"]

# Parameter values that differ between the three scenarios. Scenarios 2 and 3
# leave c unspecified; it is derived from the proliferation formula.
PRESETS = {
    1: dict(c=0.0, lambda_n=0.22, lambda_mn=0.05, np_bar=387.0, s_bar=0.48, b=3.4, mu_np=0.13),
    2: dict(s_bar=0.0, b=0.0, lambda_n=2.1, lambda_mn=0.0, np_bar=713.0),
    3: dict(s_bar=0.0, lambda_n=0.003, lambda_mn=0.0, np_bar=392.0, b=4.2),
}

DESCRIPTIONS = {
    1: "no peripheral proliferation",
    2: "no homeostatic reduction in thymic export or naive death rate",
    3: "homeostatic naive death rate, constant thymic export",
}

C_SOURCES = ("mu_n", "mu_np")
_PARAM_NAMES = {f.name for f in fields(ModelParams)}
_SD_KEYS = {"dt", "horizon", "record_every", "initial"}
_ABS_KEYS = {f.name for f in fields(AbsConfig)}
_TOP_KEYS = {"scenario", "overrides", "sd", "abs", "c_from"}


class ConfigError(ValueError):
    pass


def preset_params(scenario: int, overrides: dict | None = None, c_from: str = "mu_n") -> ModelParams:
    """Parameters for preset ``scenario`` (1, 2 or 3) with ``overrides`` applied.

    For scenarios without a published proliferation rate, ``c`` is
    ``mu * (1 + 300/np_bar)`` where ``mu`` is ``mu_n`` (default) or ``mu_np``
    according to ``c_from``. An explicit ``c`` override always wins.
    """
    if scenario not in PRESETS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected 1, 2 or 3")
    if c_from not in C_SOURCES:
        raise ConfigError(f"c_from must be one of {C_SOURCES}, got {c_from!r}")
    overrides = dict(overrides or {})
    unknown = set(overrides) - _PARAM_NAMES
    if unknown:
        raise ConfigError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
    values = {**PRESETS[scenario], **overrides}
    if "c" not in values:
        base = ModelParams(**{k: v for k, v in values.items()})
        mu = base.mu_n if c_from == "mu_n" else base.mu_np
        values["c"] = proliferation_rate_from_table1(mu, base.np_bar)
    try:
        return ModelParams(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: int | str = 3
    overrides: dict = field(default_factory=dict)
    sd: dict = field(default_factory=dict)
    abs: dict = field(default_factory=dict)
    c_from: str = "mu_n"

    def params(self) -> ModelParams:
        if self.scenario == "custom":
            try:
                return ModelParams(**self.overrides)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"custom scenario: {exc}") from None
        return preset_params(self.scenario, self.overrides, self.c_from)

    def sd_config(self, **flags) -> SdConfig:
        opts = {**self.sd, **{k: v for k, v in flags.items() if v is not None}}
        if "initial" in opts and not isinstance(opts["initial"], StateVector):
            opts["initial"] = StateVector(**opts["initial"])
        try:
            return SdConfig(**opts)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"sd config: {exc}") from None

    def abs_config(self, **flags) -> AbsConfig:
        opts = {**self.abs, **{k: v for k, v in flags.items() if v is not None}}
        try:
            return AbsConfig(**opts)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"abs config: {exc}") from None

    @property
    def label(self) -> str:
        return f"s{self.scenario}" if self.scenario != "custom" else "custom"

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "overrides": dict(self.overrides),
            "sd": dict(self.sd),
            "abs": dict(self.abs),
            "c_from": self.c_from,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _where(source: str, text: str, key: str) -> str:
    line = _line_of(text, key)
    return f"{source}:{line}" if line else source


def spec_from_dict(data: dict, text: str = "", source: str = "<config>") -> ScenarioSpec:
    """Validate a decoded config mapping and build a :class:`ScenarioSpec`."""
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: top level must be a JSON object")
    for key in data:
        if key not in _TOP_KEYS:
            raise ConfigError(f"{_where(source, text, key)}: unknown key {key!r}")
    if "scenario" not in data:
        raise ConfigError(f"{source}: missing required key 'scenario'")
    scenario = data["scenario"]
    if scenario != "custom" and (isinstance(scenario, bool) or scenario not in PRESETS):
        raise ConfigError(f"{_where(source, text, 'scenario')}: unknown scenario {scenario!r}")
    sections = {}
    for name, allowed in (("overrides", _PARAM_NAMES), ("sd", _SD_KEYS), ("abs", _ABS_KEYS)):
        section = data.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"{_where(source, text, name)}: {name!r} must be an object")
        for key in section:
            if key not in allowed:
                raise ConfigError(f"{_where(source, text, key)}: unknown key {key!r} in {name!r}")
        sections[name] = dict(section)
    c_from = data.get("c_from", "mu_n")
    if c_from not in C_SOURCES:
        raise ConfigError(f"{_where(source, text, 'c_from')}: c_from must be one of {C_SOURCES}")
    spec = ScenarioSpec(scenario, sections["overrides"], sections["sd"], sections["abs"], c_from)
    # surface invariant violations now rather than at run time
    try:
        spec.params()
        spec.sd_config()
        spec.abs_config()
    except ConfigError as exc:
        culprit = next((k for s in sections.values() for k in s if re.search(rf"\b{k}\b", str(exc))), None)
        where = _where(source, text, culprit) if culprit else source
        raise ConfigError(f"{where}: {exc}") from None
    return spec


def parse_config(path) -> ScenarioSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None
    return spec_from_dict(data, text, str(path))
