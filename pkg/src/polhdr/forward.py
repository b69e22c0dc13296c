"""Forward simulation of the front-polarizer + polarization-sensor optical chain.

Amplitudes are real (phases never change the intensity of this all-real
chain). Angles are in radians. The relative angle ``theta`` of a sensor
polarizer is its sensor-frame angle minus the front polarizer angle ``phi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    SENSOR_ANGLES,
    InvalidInputError,
    LdrImage,
    PolarizerRig,
    SceneLight,
)
from .mosaic import COLOR_BLOCKS, SUPERPIXEL, MosaicFrame, pixel_slices

#: Incident angles averaged to model unpolarized light.
UNPOLARIZED_SAMPLES = 64


@dataclass(frozen=True)
class JonesVector:
    """Real field amplitudes along the front polarizer's transmission (x) and extinction (y) axes."""

    x: float | np.ndarray
    y: float | np.ndarray

    @classmethod
    def at_angle(cls, angle, amplitude=1.0) -> "JonesVector":
        """Linearly polarized light at ``angle`` from the transmission axis."""
        return cls(amplitude * np.cos(angle), amplitude * np.sin(angle))


@dataclass(frozen=True)
class SensorModel:
    bit_depth: int = 8
    gain: float = 1.0
    read_noise_sigma: float = 0.0
    shot_noise: bool = False

    def __post_init__(self):
        if self.gain <= 0:
            raise InvalidInputError("sensor gain must be positive")
        if self.read_noise_sigma < 0:
            raise InvalidInputError("read noise sigma must be non-negative")
        if not 1 <= self.bit_depth <= 16:
            raise InvalidInputError(f"unsupported bit depth {self.bit_depth}")

    @property
    def max_code(self) -> int:
        return 2**self.bit_depth - 1


def malus_transmission(theta):
    return np.cos(theta) ** 2


def alpha_from_rho(rho: float) -> float:
    """Amplitude attenuation along a polarizer's extinction axis for extinction ratio ``rho``."""
    if not (0.0 <= rho < 1.0):
        raise InvalidInputError(f"extinction ratio must lie in [0, 1), got {rho}")
    return math.sqrt(rho / (rho + 1.0))


def jones_through_pair(e0: JonesVector, theta, alpha, alpha_sensor=None) -> JonesVector:
    """Propagate ``e0`` through the front polarizer and a sensor polarizer at ``theta``.

    The front polarizer scales the extinction component by ``alpha``; the
    field is then expressed in the sensor polarizer's axes, its extinction
    component scaled by ``alpha_sensor`` (default ``alpha``), and rotated back.
    Returned components are in the front polarizer's frame.
    """
    a1 = alpha
    a2 = alpha if alpha_sensor is None else alpha_sensor
    for a in (a1, a2):
        if not (0.0 <= a < math.sqrt(0.5)):
            raise InvalidInputError(f"attenuation factor must lie in [0, sqrt(1/2)), got {a}")
    c, s = np.cos(theta), np.sin(theta)
    x0, y0 = e0.x, e0.y
    x = x0 * (c * c + a2 * s * s) + a1 * (1.0 - a2) * y0 * s * c
    y = (1.0 - a2) * x0 * s * c + a1 * y0 * (s * s + a2 * c * c)
    return JonesVector(x, y)


def intensity(e: JonesVector):
    return e.x * e.x + e.y * e.y


def relative_angles(phi: float) -> tuple[float, float, float, float]:
    """Angles between each sensor polarizer and the front polarizer.

    The orthogonal partners are built by adding ``pi/2`` so that
    ``theta_3 = theta_1 + pi/2`` and ``theta_4 = theta_2 + pi/2`` hold exactly.
    """
    t1 = SENSOR_ANGLES[0] - phi
    t2 = t1 + math.pi / 4
    return (t1, t2, t1 + math.pi / 2, t2 + math.pi / 2)


def chain_transmission(theta, rig: PolarizerRig, dolp=0.0, aop=0.0,
                       n_unpolarized: int = UNPOLARIZED_SAMPLES):
    """Fraction of incident intensity reaching a pixel whose polarizer sits at relative angle ``theta``.

    The polarized fraction ``dolp`` arrives at ``aop`` (sensor frame); the
    remainder is unpolarized and is averaged over ``n_unpolarized`` equally
    spaced incident angles.
    """
    if n_unpolarized < 2:
        raise InvalidInputError("need at least two samples to represent unpolarized light")
    a1 = alpha_from_rho(rig.rho)
    a2 = alpha_from_rho(rig.rho_sensor)
    gamma = np.asarray(aop, dtype=np.float64) - rig.phi
    polarized = intensity(jones_through_pair(JonesVector.at_angle(gamma), theta, a1, a2))
    unpolarized = 0.0
    for k in range(n_unpolarized):
        e = JonesVector.at_angle(k * math.pi / n_unpolarized)
        unpolarized = unpolarized + intensity(jones_through_pair(e, theta, a1, a2))
    unpolarized = unpolarized / n_unpolarized
    dolp = np.asarray(dolp, dtype=np.float64)
    return dolp * polarized + (1.0 - dolp) * unpolarized


def relative_exposure(theta, rho: float = 0.0,
                      n_unpolarized: int = UNPOLARIZED_SAMPLES) -> np.ndarray:
    """Transmission of unpolarized light at relative angle ``theta``, normalized to ``theta = 0``.

    With ``rho = 0`` this is ``cos^2(theta)``; otherwise it includes the light
    leaking through both polarizers' extinction axes.
    """
    rig = PolarizerRig(0.0, rho)
    t0 = chain_transmission(0.0, rig, 0.0, 0.0, n_unpolarized)
    return chain_transmission(np.asarray(theta, dtype=np.float64), rig, 0.0, 0.0, n_unpolarized) / t0


def expected_polarity_codes(scene: SceneLight, rig: PolarizerRig, sensor: SensorModel,
                            exposure_time: float,
                            n_unpolarized: int = UNPOLARIZED_SAMPLES) -> list[np.ndarray]:
    """Noise-free, unclipped sensor codes of the four polarity images."""
    if not exposure_time > 0:
        raise InvalidInputError("exposure time must be positive")
    scale = scene.radiance * (sensor.gain * exposure_time)
    dolp, aop = scene.dolp_map(), scene.aop_map()
    return [
        scale * chain_transmission(t, rig, dolp, aop, n_unpolarized)
        for t in relative_angles(rig.phi)
    ]


def ground_truth(scene: SceneLight, rig: PolarizerRig, sensor: SensorModel,
                 exposure_time: float, n_unpolarized: int = UNPOLARIZED_SAMPLES) -> np.ndarray:
    """Linear HDR reference: the unclipped code a sensor polarizer aligned with the front polarizer would record."""
    if not exposure_time > 0:
        raise InvalidInputError("exposure time must be positive")
    t = chain_transmission(0.0, rig, scene.dolp_map(), scene.aop_map(), n_unpolarized)
    return scene.radiance * (sensor.gain * exposure_time) * t


def simulate_capture(scene: SceneLight, rig: PolarizerRig, sensor: SensorModel,
                     exposure_time: float, seed: int = 0,
                     n_unpolarized: int = UNPOLARIZED_SAMPLES) -> MosaicFrame:
    """Render one raw mosaic frame of ``scene``.

    Every pixel of a 4x4 superpixel sees the radiance of the matching scene
    pixel, so the frame is four times the scene size in each direction. All
    colour blocks receive the same (gray) signal. Noise draws come from one
    generator seeded with ``seed`` and consumed in row-major pixel order.
    """
    codes = expected_polarity_codes(scene, rig, sensor, exposure_time, n_unpolarized)
    h, w = scene.radiance.shape
    expected = np.empty((h * SUPERPIXEL, w * SUPERPIXEL))
    for color in COLOR_BLOCKS:
        for i in range(4):
            expected[pixel_slices(color, i)] = codes[i]

    rng = np.random.default_rng(seed)
    signal = expected
    if sensor.shot_noise:
        signal = rng.poisson(signal).astype(np.float64)
    if sensor.read_noise_sigma > 0:
        signal = signal + rng.normal(0.0, sensor.read_noise_sigma, signal.shape)
    raw = np.clip(np.rint(signal), 0, sensor.max_code)
    return MosaicFrame(LdrImage(raw, sensor.bit_depth))


def synthetic_scene(height: int, width: int, decades: float = 4.0, seed: int = 0) -> np.ndarray:
    """Smooth test radiance spanning ``decades`` orders of magnitude, peak 1.

    A diagonal log ramp is modulated by a few random Gaussian blobs and a
    fine sinusoidal texture so that every exposure level has structure.
    """
    if height < 1 or width < 1:
        raise InvalidInputError("scene size must be positive")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width]
    u = (xx / max(width - 1, 1) + yy / max(height - 1, 1)) / 2
    log_r = u.copy()
    for _ in range(6):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        s = rng.uniform(0.05, 0.2) * max(height, width)
        log_r += rng.uniform(-0.25, 0.25) * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s * s))
    log_r += 0.03 * np.sin(xx * 0.9) * np.cos(yy * 0.7)
    log_r = (log_r - log_r.min()) / (log_r.max() - log_r.min())
    return 10.0 ** (decades * (log_r - 1.0))
