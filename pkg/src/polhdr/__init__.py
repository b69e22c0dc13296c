"""Snapshot HDR reconstruction for polarization cameras fitted with a front linear polarizer."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    CalibrationError,
    ExposureEstimate,
    FusionError,
    InvalidInputError,
    LdrImage,
    PolarityStack,
    PolarizerRig,
    PolHdrError,
    SceneLight,
    ValidityThresholds,
    clip,
)
from .calibrate import aggregate_mode, estimate_angle_map, estimate_exposures, sweep_extinction_error  # noqa: E402
from .fusion import Bracket, HdrImage, fuse_bracket, fuse_hdr, tonemap_reinhard  # noqa: E402
from .mosaic import MosaicFrame, demux, remux  # noqa: E402
from .forward import SensorModel, simulate_capture  # noqa: E402
from .metrics import psnr, ssim  # noqa: E402
