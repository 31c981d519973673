"""Run configuration: an INI file with one section per concern.

Every key is optional; unknown sections or keys are errors. Command-line
``--set section.key=value`` overrides are applied on top of the file.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .losses import LossWeights
from .model import MlpConfig
from .train import TrainConfig


@dataclass(frozen=True)
class DataOptions:
    input: str = ""
    format: str = ""
    normalize: bool = True
    noise_sigma: float = 0.0
    noise_seed: int = 0


@dataclass(frozen=True)
class MeshOptions:
    resolution: int = 0
    bbox_scale: float = 1.1


@dataclass(frozen=True)
class MetricOptions:
    match_radius: float = 0.01
    orient_invariant: bool = True
    samples: int = 10000
    tau: float = 20.0


@dataclass(frozen=True)
class RunConfig:
    model: MlpConfig = field(default_factory=MlpConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    data: DataOptions = field(default_factory=DataOptions)
    mesh: MeshOptions = field(default_factory=MeshOptions)
    metrics: MetricOptions = field(default_factory=MetricOptions)

    def train_config(self):
        return dataclasses.replace(self.train, weights=self.loss)

    def to_dict(self):
        out = {}
        for sec in SECTIONS:
            obj = getattr(self, sec)
            out[sec] = {f.name: _jsonable(getattr(obj, f.name)) for f in _fields(obj)}
        return out

    def to_ini(self):
        lines = []
        for sec, vals in self.to_dict().items():
            lines.append(f"[{sec}]")
            for k, v in vals.items():
                if isinstance(v, list):
                    v = ",".join(str(x) for x in v)
                lines.append(f"{k} = {v}")
            lines.append("")
        return "\n".join(lines)


SECTIONS = ("model", "train", "loss", "data", "mesh", "metrics")


def _fields(obj):
    # the loss weights live in their own section
    return [f for f in dataclasses.fields(obj) if f.name != "weights"]


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def _parse(value, default, key):
    text = value.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(int(t) for t in text.replace(" ", "").split(",") if t)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key}: '{value}'") from None


def build_config(sections):
    """``{section: {key: text}}`` -> validated :class:`RunConfig`."""
    parts = {}
    default = RunConfig()
    for sec, vals in sections.items():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown config section [{sec}]")
        base = getattr(default, sec)
        known = {f.name: getattr(base, f.name) for f in _fields(base)}
        kwargs = {}
        for key, text in vals.items():
            if key not in known:
                raise ConfigError(f"unknown config key {sec}.{key}")
            kwargs[key] = _parse(text, known[key], f"{sec}.{key}")
        parts[sec] = dataclasses.replace(base, **kwargs) if kwargs else base
    cfg = dataclasses.replace(default, **parts)
    return dataclasses.replace(cfg, train=cfg.train_config())


def read_sections(path=None, overrides=()):
    """Raw ``{section: {key: text}}`` from an INI file plus ``section.key=value`` overrides."""
    sections = {}
    if path:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for sec in parser.sections():
            sections[sec] = dict(parser.items(sec))
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override '{item}' must look like section.key=value")
        lhs, value = item.split("=", 1)
        sec, key = lhs.strip().split(".", 1)
        sections.setdefault(sec.strip(), {})[key.strip()] = value
    return sections


def load_config(path=None, overrides=()):
    return build_config(read_sections(path, overrides))
