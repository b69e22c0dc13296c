"""Exposure-normalized merging of LDR images into linear HDR, and tone mapping."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import forward
from .core import (
    ExposureEstimate,
    FusionError,
    InvalidInputError,
    LdrImage,
    PolarityStack,
    ValidityThresholds,
    as_image,
)

EPSILON = 1e-6
EXPOSURE_FLOOR = 1e-6
LOG_DELTA = 1e-6


@dataclass(frozen=True)
class HdrImage:
    """Linear radiance plus the number of well-exposed samples behind each pixel.

    Pixels with zero coverage were filled by the fallback rule in
    :func:`fuse_images` and should be excluded from evaluation.
    """

    image: np.ndarray
    coverage: np.ndarray

    def __post_init__(self):
        img = as_image(self.image, "HDR image")
        cov = np.asarray(self.coverage)
        if cov.shape != img.shape:
            raise InvalidInputError("coverage map does not match image size")
        cov = cov.astype(np.int64)
        cov.setflags(write=False)
        object.__setattr__(self, "image", img)
        object.__setattr__(self, "coverage", cov)

    @property
    def covered(self) -> np.ndarray:
        return self.coverage > 0


@dataclass(frozen=True)
class Bracket:
    """Co-registered shots of a static scene with strictly increasing exposure times."""

    snapshots: tuple[tuple[LdrImage, float], ...]

    def __post_init__(self):
        snaps = tuple((img, float(t)) for img, t in self.snapshots)
        if not snaps:
            raise InvalidInputError("empty bracket")
        times = [t for _, t in snaps]
        if any(t <= 0 for t in times):
            raise InvalidInputError("exposure times must be positive")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidInputError("exposure times must be strictly increasing")
        if len({img.shape for img, _ in snaps}) != 1:
            raise InvalidInputError("bracket images differ in size")
        object.__setattr__(self, "snapshots", snaps)

    @property
    def times(self) -> list[float]:
        return [t for _, t in self.snapshots]

    @property
    def images(self) -> list[LdrImage]:
        return [img for img, _ in self.snapshots]


def scale_image(img: LdrImage, exposure: float, exposure_floor: float = EXPOSURE_FLOOR) -> np.ndarray:
    if exposure <= exposure_floor:
        raise InvalidInputError(
            f"exposure {exposure:g} is at or below the floor {exposure_floor:g}; image carries no usable signal"
        )
    return img.data / exposure


def weight_mask(img: LdrImage, thresholds: ValidityThresholds) -> np.ndarray:
    """1.0 where the (unscaled) code lies in ``[p_min, p_max]``, else 0.0."""
    return thresholds.contains(img.data).astype(np.float64)


def fuse_images(images: Sequence[LdrImage], exposures: Sequence[float],
                thresholds: ValidityThresholds, epsilon: float = EPSILON,
                exposure_floor: float = EXPOSURE_FLOOR) -> HdrImage:
    """Normalized weighted sum of exposure-scaled images.

    Weights are binary and computed on the raw codes. A pixel that no image
    exposes well takes the scaled value of the brightest-exposed image that is
    not saturated there, or, if every image saturates, of the dimmest one;
    its coverage stays 0.
    """
    if len(images) != len(exposures):
        raise InvalidInputError("need one exposure per image")
    kept = []
    for img, e in zip(images, exposures):
        if e <= exposure_floor:
            warnings.warn(f"dropping image with exposure {e:g} (floor {exposure_floor:g})", stacklevel=2)
            continue
        kept.append((img, float(e)))
    if not kept:
        raise FusionError("every image fell below the exposure floor")
    if len({img.shape for img, _ in kept}) != 1:
        raise InvalidInputError("images differ in size")

    codes = np.stack([img.data for img, _ in kept])
    exps = np.array([e for _, e in kept])
    scaled = codes / exps[:, None, None]
    weights = thresholds.contains(codes).astype(np.float64)
    total = weights.sum(axis=0)
    hdr = (weights * scaled).sum(axis=0) / (total + epsilon)

    empty = total == 0
    if empty.any():
        fill = np.full(hdr.shape, np.nan)
        unsaturated = codes <= thresholds.p_max
        for i in np.argsort(-exps, kind="stable"):
            take = empty & np.isnan(fill) & unsaturated[i]
            fill[take] = scaled[i][take]
        dimmest = int(np.argmin(exps))
        rest = empty & np.isnan(fill)
        fill[rest] = scaled[dimmest][rest]
        hdr[empty] = fill[empty]
    return HdrImage(hdr, total.astype(np.int64))


def fuse_hdr(stack: PolarityStack, estimate: ExposureEstimate,
             thresholds: ValidityThresholds | None = None, epsilon: float = EPSILON,
             exposure_floor: float = EXPOSURE_FLOOR, extinction_ratio: float = 0.0) -> HdrImage:
    """Merge a polarity stack using its estimated exposures.

    The exposures are ``cos^2`` of the estimated angles. A nonzero
    ``extinction_ratio`` (the polarizers' datasheet value) replaces them by
    the leaky-polarizer transmission at the same angles, which matters for
    polarities close to crossed.
    """
    if thresholds is None:
        thresholds = ValidityThresholds.for_bit_depth(stack.bit_depth)
    exposures = fusion_exposures(estimate, extinction_ratio)
    return fuse_images(stack.images, exposures, thresholds, epsilon, exposure_floor)


def fusion_exposures(estimate: ExposureEstimate, extinction_ratio: float = 0.0) -> tuple[float, ...]:
    if extinction_ratio == 0.0:
        return estimate.exposure
    return tuple(float(e) for e in forward.relative_exposure(estimate.theta_hat, extinction_ratio))


def fuse_bracket(bracket: Bracket, thresholds: ValidityThresholds | None = None,
                 epsilon: float = EPSILON, reference_time: float | None = None) -> HdrImage:
    """Merge a time bracket; the result is in units of ``reference_time`` (default: shortest shot)."""
    if len(bracket.snapshots) < 2:
        raise InvalidInputError("a bracket needs at least two shots")
    if thresholds is None:
        thresholds = ValidityThresholds.for_bit_depth(bracket.images[0].bit_depth)
    ref = bracket.times[0] if reference_time is None else float(reference_time)
    if ref <= 0:
        raise InvalidInputError("reference time must be positive")
    exposures = [t / ref for t in bracket.times]
    return fuse_images(bracket.images, exposures, thresholds, epsilon, exposure_floor=0.0)


@dataclass(frozen=True)
class ReinhardParams:
    key: float
    log_average: float
    white: float

    def to_dict(self) -> dict:
        return {"key": self.key, "log_average": self.log_average, "white": self.white}


def reinhard_parameters(hdr, key: float = 0.18, white: float | None = None,
                        white_percentile: float = 99.9, delta: float = LOG_DELTA,
                        mask=None) -> ReinhardParams:
    """Global operator parameters for ``hdr``; ``white`` is in key-scaled units."""
    lum = np.asarray(hdr.image if isinstance(hdr, HdrImage) else hdr, dtype=np.float64)
    if np.any(lum < 0):
        raise InvalidInputError("tone mapping needs non-negative radiance")
    sample = lum[mask] if mask is not None and np.any(mask) else lum
    log_avg = float(np.exp(np.mean(np.log(delta + sample))))
    if white is None:
        white = float(np.percentile(sample * (key / log_avg), white_percentile))
    return ReinhardParams(key, log_avg, float(white))


def tonemap_reinhard(hdr, key: float = 0.18, white: float | None = None,
                     white_percentile: float = 99.9, bit_depth: int = 8,
                     params: ReinhardParams | None = None, delta: float = LOG_DELTA) -> LdrImage:
    """Reinhard's global operator with white-point burn, scaled to ``[0, max_code]``.

    Pass ``params`` to apply exactly the operator derived from another image.
    """
    lum = np.asarray(hdr.image if isinstance(hdr, HdrImage) else hdr, dtype=np.float64)
    if params is None:
        params = reinhard_parameters(lum, key, white, white_percentile, delta)
    elif np.any(lum < 0):
        raise InvalidInputError("tone mapping needs non-negative radiance")
    scaled = lum * (params.key / params.log_average)
    if params.white > 0 and math.isfinite(params.white):
        # L(1 + L/W^2) written as L + (L/W)^2 so a tiny white point cannot
        # overflow; the curve reaches 1 at L = W and saturates beyond it
        ratio = np.minimum(scaled / params.white, 1.0)
        mapped = np.where(ratio >= 1.0, 1.0, (scaled + ratio * ratio) / (1.0 + scaled))
    else:
        mapped = scaled / (1.0 + scaled)
    max_code = 2**bit_depth - 1
    return LdrImage(np.clip(mapped, 0.0, 1.0) * max_code, bit_depth)
