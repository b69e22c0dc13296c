"""Pipeline configuration and run provenance.

The on-disk form is one ``key = value`` pair per line, values written as
JSON literals (numbers, strings, booleans). Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from . import __version__
from .calibrate import DEFAULT_BIN_WIDTH, GEOMETRY_MODES, WEIGHTING_MODES
from .core import InvalidInputError, ValidityThresholds
from .fusion import EPSILON, EXPOSURE_FLOOR, LOG_DELTA
from .mosaic import CHANNELS


class ConfigError(InvalidInputError):
    stage = "config"


@dataclass(frozen=True)
class PipelineConfig:
    # thresholds are given in 8-bit code units and scaled to the data's depth
    p_min: float = 5.0
    p_max: float = 250.0
    bin_width_deg: float = math.degrees(DEFAULT_BIN_WIDTH)
    geometry: str = "joint"
    weighting: str = "precision"
    channel: str = "luma"
    epsilon: float = EPSILON
    exposure_floor: float = EXPOSURE_FLOOR
    # extinction ratio assumed when turning angles into exposures (0: cos^2)
    assumed_rho: float = 0.0
    tonemap: bool = True
    tonemap_key: float = 0.18
    white_percentile: float = 99.9
    log_delta: float = LOG_DELTA
    # simulator
    phi_deg: float = 77.0
    rho: float = 0.0
    dolp: float = 0.0
    aop_deg: float = 0.0
    bits: int = 8
    gain: float = 1.0
    exposure_time: float = 1.0
    read_noise_sigma: float = 0.0
    shot_noise: bool = False
    unpolarized_samples: int = 64
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            expected = {"float": (int, float), "int": (int,), "bool": (bool,), "str": (str,)}[f.type]
            if isinstance(v, bool) and f.type != "bool":
                raise ConfigError(f"{f.name}: expected {f.type}, got bool")
            if not isinstance(v, expected):
                raise ConfigError(f"{f.name}: expected {f.type}, got {type(v).__name__}")
            if f.type == "float":
                object.__setattr__(self, f.name, float(v))
        if self.geometry not in GEOMETRY_MODES:
            raise ConfigError(f"geometry must be one of {GEOMETRY_MODES}")
        if self.weighting not in WEIGHTING_MODES:
            raise ConfigError(f"weighting must be one of {WEIGHTING_MODES}")
        if self.channel not in CHANNELS:
            raise ConfigError(f"channel must be one of {CHANNELS}")
        for name in ("rho", "assumed_rho"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1)")
        if not self.bin_width_deg > 0:
            raise ConfigError("bin_width_deg must be positive")
        if not 0 <= self.p_min < self.p_max <= 255:
            raise ConfigError("thresholds need 0 <= p_min < p_max <= 255 (8-bit units)")

    def thresholds(self, bit_depth: int) -> ValidityThresholds:
        return ValidityThresholds.for_bit_depth(bit_depth, self.p_min, self.p_max)

    @property
    def bin_width(self) -> float:
        return math.radians(self.bin_width_deg)

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return "".join(f"{k} = {json.dumps(v)}\n" for k, v in self.to_dict().items())

    @classmethod
    def loads(cls, text: str) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, raw = line.partition("=")
            key = key.strip()
            if not sep:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            if key not in known:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            try:
                values[key] = json.loads(raw.strip())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key!r}: {raw.strip()}") from exc
        return cls(**values)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.loads(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    def with_overrides(self, **overrides) -> "PipelineConfig":
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}")
        return replace(self, **overrides)

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()


def provenance(config: PipelineConfig | None = None, inputs=()) -> dict:
    """Tool version, config hash and input file hashes for embedding in reports."""
    from .io import file_sha256

    out = {"tool": "polhdr", "version": __version__}
    if config is not None:
        out["config_sha256"] = config.digest()
        out["config"] = config.to_dict()
    out["inputs"] = {str(p): file_sha256(p) for p in inputs}
    return out


def version_and_provenance(config: PipelineConfig | None = None, inputs=()) -> str:
    return json.dumps(provenance(config, inputs), indent=2, sort_keys=True)
