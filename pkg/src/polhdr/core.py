"""Shared pixel containers, optical configuration records and error types.

Images are plain 2-D ``float64`` numpy arrays (row-major, non-negative,
finite). The record types below wrap them with the metadata each stage needs
and freeze the underlying buffers so they can be shared read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

#: Nominal sensor polarizer angles, indexed like the polarity stack.
SENSOR_ANGLES = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4)
#: File-name labels (degrees, zero padded) matching ``SENSOR_ANGLES``.
ANGLE_LABELS = ("000", "045", "090", "135")


class PolHdrError(Exception):
    """Base class for pipeline errors; ``stage`` names the failing step."""

    stage = "polhdr"

    def __init__(self, message: str, stage: str | None = None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage


class InvalidInputError(PolHdrError, ValueError):
    stage = "input"


class CalibrationError(PolHdrError):
    stage = "calibrate"


class FusionError(PolHdrError):
    stage = "fuse"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def as_image(data, name: str = "image") -> np.ndarray:
    """Validate ``data`` as a single-channel linear image and return a frozen float64 copy."""
    arr = np.array(data, dtype=np.float64, copy=True)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    if np.any(arr < 0):
        raise InvalidInputError(f"{name} contains negative values")
    return _frozen(arr)


def clip(value, max_code):
    """Clamp ``value`` to ``[0, max_code]``; works on scalars and arrays."""
    if max_code <= 0:
        raise InvalidInputError("max_code must be positive")
    out = np.minimum(np.maximum(value, 0.0), max_code)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LdrImage:
    """Quantized (clipped) sensor codes at a given bit depth.

    Codes are kept as float64 so that averaged channels (e.g. the two greens)
    survive without rounding.
    """

    data: np.ndarray
    bit_depth: int = 8

    def __post_init__(self):
        if not 1 <= self.bit_depth <= 16:
            raise InvalidInputError(f"unsupported bit depth {self.bit_depth}")
        arr = as_image(self.data, "LDR image")
        if arr.max() > self.max_code:
            raise InvalidInputError(
                f"LDR values exceed max code {self.max_code} for {self.bit_depth}-bit data"
            )
        object.__setattr__(self, "data", arr)

    @property
    def max_code(self) -> int:
        return 2**self.bit_depth - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class PolarityStack:
    """The four co-registered images ``I(0), I(pi/4), I(pi/2), I(3pi/4)`` of one snapshot."""

    images: tuple[LdrImage, LdrImage, LdrImage, LdrImage]

    def __post_init__(self):
        images = tuple(self.images)
        if len(images) != 4:
            raise InvalidInputError(f"a polarity stack needs exactly 4 images, got {len(images)}")
        shapes = {im.shape for im in images}
        if len(shapes) != 1:
            raise InvalidInputError(f"polarity images differ in size: {sorted(shapes)}")
        if len({im.bit_depth for im in images}) != 1:
            raise InvalidInputError("polarity images differ in bit depth")
        object.__setattr__(self, "images", images)

    @classmethod
    def from_arrays(cls, arrays: Sequence, bit_depth: int = 8) -> "PolarityStack":
        return cls(tuple(LdrImage(a, bit_depth) for a in arrays))

    def __getitem__(self, i: int) -> LdrImage:
        return self.images[i]

    def __len__(self) -> int:
        return 4

    @property
    def shape(self) -> tuple[int, int]:
        return self.images[0].shape

    @property
    def bit_depth(self) -> int:
        return self.images[0].bit_depth

    @property
    def max_code(self) -> int:
        return self.images[0].max_code


@dataclass(frozen=True)
class ValidityThresholds:
    """Inclusive code range ``[p_min, p_max]`` of well-exposed pixels."""

    p_min: float = 5.0
    p_max: float = 250.0

    def __post_init__(self):
        if not (0 <= self.p_min < self.p_max):
            raise InvalidInputError(f"need 0 <= p_min < p_max, got {self.p_min}, {self.p_max}")

    @classmethod
    def for_bit_depth(cls, bit_depth: int, p_min: float = 5.0, p_max: float = 250.0):
        """Scale 8-bit thresholds proportionally to another bit depth."""
        s = (2**bit_depth - 1) / 255.0
        return cls(p_min * s, p_max * s)

    def contains(self, values: np.ndarray) -> np.ndarray:
        return (values >= self.p_min) & (values <= self.p_max)


@dataclass(frozen=True)
class PolarizerRig:
    """Front polarizer orientation and extinction ratios.

    ``rho`` applies to the front polarizer; ``rho_sensor`` to the on-chip
    array and defaults to ``rho``. Peak transmission is fixed at 1.
    """

    phi: float = 0.0
    rho: float = 0.0
    rho_sensor: float | None = None

    def __post_init__(self):
        if self.rho_sensor is None:
            object.__setattr__(self, "rho_sensor", self.rho)
        for r in (self.rho, self.rho_sensor):
            if not (0.0 <= r < 1.0):
                raise InvalidInputError(f"extinction ratio must lie in [0, 1), got {r}")
        if not math.isfinite(self.phi):
            raise InvalidInputError("phi must be finite")

    t_max = 1.0


@dataclass(frozen=True)
class SceneLight:
    """Incident light: radiance plus degree/angle of linear polarization.

    ``dolp`` and ``aop`` may be scalars or maps of the radiance's shape.
    ``aop`` is measured in the sensor frame, like the rig's ``phi``.
    """

    radiance: np.ndarray
    dolp: float | np.ndarray = 0.0
    aop: float | np.ndarray = 0.0

    def __post_init__(self):
        rad = as_image(self.radiance, "scene radiance")
        object.__setattr__(self, "radiance", rad)
        for name in ("dolp", "aop"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.ndim not in (0, 2) or (v.ndim == 2 and v.shape != rad.shape):
                raise InvalidInputError(f"{name} must be a scalar or a {rad.shape} map")
            if not np.all(np.isfinite(v)):
                raise InvalidInputError(f"{name} contains non-finite values")
        d = np.asarray(self.dolp)
        if np.any(d < 0) or np.any(d > 1):
            raise InvalidInputError("dolp must lie in [0, 1]")

    def dolp_map(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.dolp, dtype=np.float64), self.radiance.shape)

    def aop_map(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.aop, dtype=np.float64), self.radiance.shape)


@dataclass(frozen=True)
class ExposureEstimate:
    """Per-polarity angle estimates and the exposures ``cos^2`` they imply."""

    theta_hat: tuple[float, float, float, float]
    valid_pixel_count: tuple[int, int, int, int]
    histogram: dict = field(default_factory=dict, compare=False)
    exposure: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta_hat)
        if len(theta) != 4:
            raise InvalidInputError("need four angle estimates")
        if any(not (0.0 <= t <= math.pi / 2) for t in theta):
            raise InvalidInputError(f"angle estimates must lie in [0, pi/2], got {theta}")
        object.__setattr__(self, "theta_hat", theta)
        object.__setattr__(self, "exposure", tuple(math.cos(t) ** 2 for t in theta))
        object.__setattr__(self, "valid_pixel_count", tuple(int(c) for c in self.valid_pixel_count))

    def to_dict(self) -> dict:
        return {
            "theta_hat_rad": list(self.theta_hat),
            "theta_hat_deg": [math.degrees(t) for t in self.theta_hat],
            "exposure": list(self.exposure),
            "valid_pixel_count": list(self.valid_pixel_count),
            "histogram": self.histogram,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExposureEstimate":
        return cls(
            theta_hat=tuple(d["theta_hat_rad"]),
            valid_pixel_count=tuple(d.get("valid_pixel_count", (0, 0, 0, 0))),
            histogram=d.get("histogram", {}),
        )
