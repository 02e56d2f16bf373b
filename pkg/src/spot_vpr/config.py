"""Pipeline configuration: ``key = value`` files with ``--set`` overrides.

Defaults are the published parameter set. ``h_c`` (camera height above the
ground) has no default and must be supplied.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Optional

from .descriptor import DescriptorParams
from .distance import METRICS, ShiftSet
from .mapping import MappingParams
from .matching import MATCHERS, MatchingParams


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    r_d: float = 35.35
    r_k: float = 35.35
    r_a: float = 90.0
    s: float = 2.0
    r_lo: float = 25.0
    r_la: float = 25.0
    m: int = 25
    n: int = 25
    h_c: Optional[float] = None
    s_lo: tuple = (-2, -1, 0, 1, 2)
    s_la: tuple = tuple(range(-5, 6))
    w: int = 75
    v_min: float = 0.6
    v_max: float = 1.4
    n_v: int = 9
    exclusion_half_width: Optional[int] = None
    metric: str = "VD"
    matcher: str = "DD"
    rk_top_k: int = 10
    r_m: tuple = (15.0, 80.0)
    stationary_eps: float = 0.05
    workers: int = 1

    def mapping_params(self) -> MappingParams:
        return MappingParams(self.r_d, self.r_k, self.r_a, self.s)

    def descriptor_params(self) -> DescriptorParams:
        return DescriptorParams(self.h_c, self.r_lo, self.r_la, self.m, self.n)

    def shifts(self) -> ShiftSet:
        return ShiftSet(self.s_lo, self.s_la)

    def matching_params(self) -> MatchingParams:
        return MatchingParams(self.w, self.v_min, self.v_max, self.n_v, self.exclusion_half_width)

    def validate(self) -> "PipelineConfig":
        if self.h_c is None:
            raise ConfigError("h_c (camera height above ground) is required")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.matcher not in MATCHERS:
            raise ConfigError(f"matcher must be one of {MATCHERS}, got {self.matcher!r}")
        if not self.r_m or any(not (r > 0) for r in self.r_m):
            raise ConfigError("r_m must list positive radii")
        if self.rk_top_k < 1 or self.workers < 1:
            raise ConfigError("rk_top_k and workers must be >= 1")
        try:
            mapping = self.mapping_params()
            desc = self.descriptor_params()
            desc.check_against(mapping)
            self.shifts().validate(self.m, self.n)
            self.matching_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in fields(PipelineConfig)}
_INT_KEYS = {"m", "n", "w", "n_v", "rk_top_k", "workers"}
_INT_LIST_KEYS = {"s_lo", "s_la"}
_STR_KEYS = {"metric", "matcher"}


def _parse_int_list(text: str) -> tuple:
    text = text.strip()
    if ".." in text and "," not in text:
        lo, hi = text.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(t) for t in text.split(",") if t.strip())


def _parse_value(key: str, text: str):
    text = text.strip()
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        if key in _INT_LIST_KEYS:
            return _parse_int_list(text)
        if key == "r_m":
            return tuple(float(t) for t in text.split(",") if t.strip())
        if key in _STR_KEYS:
            return text.upper()
        if text.lower() in ("none", ""):
            if key in ("h_c", "exclusion_half_width"):
                return None
            raise ConfigError(f"{key} cannot be empty")
        if key in _INT_KEYS or key == "exclusion_half_width":
            return int(text)
        value = float(text)
        if not math.isfinite(value):
            raise ConfigError(f"{key} must be finite")
        return value
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value for {key}: {text!r}") from None


def parse_assignments(lines: Iterable[str], source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        out[key] = _parse_value(key, value)
    return out


def load_config(path=None, overrides: Iterable[str] = (), validate: bool = True) -> PipelineConfig:
    values = {}
    if path is not None:
        path = Path(path)
        values.update(parse_assignments(path.read_text().splitlines(), str(path)))
    values.update(parse_assignments(overrides, "--set"))
    cfg = PipelineConfig(**values)
    return cfg.validate() if validate else cfg


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: PipelineConfig) -> str:
    return "".join(f"{f.name} = {_format_value(getattr(cfg, f.name))}\n" for f in fields(cfg))
