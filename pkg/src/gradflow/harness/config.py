"""Experiment configuration files.

Grammar (read with :mod:`configparser`)::

    # comments start with '#' or ';'
    [defaults]            ; optional, inherited by every experiment
    output = out
    seed = 0

    [disc]                ; one section per experiment, the name is the header
    kind = tv-dirichlet   ; tv-dirichlet | tv-neumann | wflow | smooth-ls | certify-kl | rates-table
    preset = disc
    n = 128
    tau = 2.5e-4
    alpha = 0.25, 0.5, 1  ; comma separated values become lists

Keys are case-insensitive. ``kind``, ``output`` and ``seed`` are reserved;
every other key is an experiment parameter. Scalars are parsed as int, then
float, then ``true``/``false``, otherwise kept as strings.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

__all__ = ["KINDS", "ExperimentConfig", "ConfigError", "parse_value", "load_config", "loads_config"]

KINDS = ("tv-dirichlet", "tv-neumann", "wflow", "smooth-ls", "certify-kl", "rates-table")

# presets each kind understands; checked at load so typos fail early
PRESETS = {
    "tv-dirichlet": ("disc", "box"),
    "tv-neumann": ("half", "disc"),
    "wflow": ("fokker-planck", "porous-medium", "doubly-nonlinear", "drift-interaction"),
    "smooth-ls": ("quadratic", "quartic", "coscup", "polynomial", "saddle"),
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _scalar(text: str) -> Any:
    t = text.strip()
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    if t.lower() in ("true", "yes", "on"):
        return True
    if t.lower() in ("false", "no", "off"):
        return False
    return t


def parse_value(text: str) -> Any:
    """Scalar or comma-separated list."""
    if "," in text:
        return [_scalar(x) for x in text.split(",") if x.strip()]
    return _scalar(text)


@dataclass
class ExperimentConfig:
    """One experiment: kind, parameters, output directory and seed."""

    name: str
    kind: str
    params: dict = field(default_factory=dict)
    output: str = "out"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"[{self.name}] unknown kind {self.kind!r}; expected one of {KINDS}")
        if not isinstance(self.seed, int):
            raise ConfigError(f"[{self.name}] seed must be an integer")
        preset = self.params.get("preset")
        if preset is not None and self.kind in PRESETS and preset not in PRESETS[self.kind]:
            raise ConfigError(f"[{self.name}] unknown preset {preset!r} for {self.kind}")
        if self.kind == "certify-kl" and "cloud" not in self.params:
            raise ConfigError(f"[{self.name}] certify-kl needs a 'cloud' csv path")

    def get(self, key: str, default=None):
        return self.params.get(key, default)

    @property
    def directory(self) -> Path:
        return Path(self.output) / self.name


def _from_parser(cp: configparser.ConfigParser, base: Path) -> list:
    out = []
    for sec in cp.sections():
        if sec == "defaults":
            continue
        raw = {k: parse_value(v) for k, v in cp.items(sec)}
        if "kind" not in raw:
            raise ConfigError(f"[{sec}] missing 'kind'")
        kind = str(raw.pop("kind"))
        output = str(raw.pop("output", "out"))
        if not Path(output).is_absolute():
            output = str(base / output)
        seed = raw.pop("seed", 0)
        if isinstance(raw.get("cloud"), str) and not Path(raw["cloud"]).is_absolute():
            raw["cloud"] = str(base / raw["cloud"])
        out.append(ExperimentConfig(sec, kind, raw, output, seed))
    if not out:
        raise ConfigError("configuration defines no experiment")
    return out


def _parser() -> configparser.ConfigParser:
    return configparser.ConfigParser(default_section="defaults", inline_comment_prefixes=(";", "#"),
                                     interpolation=None)


def loads_config(text: str, base=".") -> list:
    """Parse configuration text into a list of :class:`ExperimentConfig`."""
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return _from_parser(cp, Path(base))


def load_config(path) -> list:
    """Read a configuration file; relative paths resolve against its folder."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    return loads_config(path.read_text(), path.parent)
