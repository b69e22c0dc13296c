"""Full-reference image quality metrics (PSNR, SSIM)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .core import InvalidInputError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass
class MetricReport:
    """Scores of one comparison; the reserved fields hold externally computed metrics."""

    psnr: float
    ssim: float
    evaluated_pixel_count: int
    masked: bool
    ms_ssim: float | None = None
    q_score: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(self.psnr):
            d["psnr"] = "inf"
        return d


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"image sizes differ: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise InvalidInputError("metrics expect single-channel 2-D images")
    return a, b


def psnr(a, b, peak: float, mask=None) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical inputs."""
    a, b = _pair(a, b)
    if not peak > 0:
        raise InvalidInputError("peak must be positive")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != a.shape:
            raise InvalidInputError("mask does not match image size")
        a, b = a[mask], b[mask]
    if a.size == 0:
        raise InvalidInputError("empty evaluation region")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def ssim_map(a, b, peak: float, window: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Local SSIM over every fully contained window (the 'valid' region)."""
    a, b = _pair(a, b)
    if min(a.shape) < window:
        raise InvalidInputError(f"images must be at least {window}x{window} for SSIM")
    if not peak > 0:
        raise InvalidInputError("peak must be positive")
    g = gaussian_window(window, sigma)
    r = window // 2

    def blur(x):
        y = correlate1d(correlate1d(x, g, axis=0, mode="constant"), g, axis=1, mode="constant")
        return y[r:x.shape[0] - r, r:x.shape[1] - r]

    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a**2
    var_b = blur(b * b) - mu_b**2
    cov = blur(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, peak: float, mask=None) -> float:
    """Mean SSIM (11x11 Gaussian window, sigma 1.5).

    With ``mask``, only windows centred on masked-in pixels are averaged.
    """
    a, b = _pair(a, b)
    smap = ssim_map(a, b, peak)
    if mask is not None:
        r = SSIM_WINDOW // 2
        mask = np.asarray(mask, dtype=bool)[r:a.shape[0] - r, r:a.shape[1] - r]
        if not mask.any():
            raise InvalidInputError("empty evaluation region")
        smap = smap[mask]
    return float(np.mean(smap))


def evaluate(ref, test, peak: float, mask=None) -> MetricReport:
    ref, test = _pair(ref, test)
    count = int(np.count_nonzero(mask)) if mask is not None else ref.size
    return MetricReport(
        psnr=psnr(ref, test, peak, mask),
        ssim=ssim(ref, test, peak, mask),
        evaluated_pixel_count=count,
        masked=mask is not None,
    )
