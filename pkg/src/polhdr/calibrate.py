"""Self-calibration of per-polarity exposures from a single polarity stack.

For an orthogonal pair of sensor polarizers the ratio of their intensities
is ``tan^2`` of the angle between the first one and the front polarizer, so
every pixel where both are well exposed yields an angle estimate. The
estimates are pooled with a histogram mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import forward
from .core import (
    CalibrationError,
    ExposureEstimate,
    InvalidInputError,
    LdrImage,
    PolarityStack,
    PolarizerRig,
    ValidityThresholds,
)

DEFAULT_BIN_WIDTH = math.radians(0.25)
HALF_PI = math.pi / 2
QUARTER_PI = math.pi / 4

GEOMETRY_MODES = ("joint", "independent")
WEIGHTING_MODES = ("precision", "uniform")
#: Joint geometry is abandoned when the partner pair disagrees with both
#: geometric candidates by more than this.
JOINT_TOLERANCE = math.radians(5.0)


@dataclass(frozen=True)
class AngleHistogram:
    bin_width: float
    counts: tuple[int, ...]

    def __post_init__(self):
        if not self.bin_width > 0:
            raise InvalidInputError("histogram bin width must be positive")

    @property
    def edges(self) -> np.ndarray:
        return np.arange(len(self.counts) + 1) * self.bin_width

    def to_dict(self) -> dict:
        return {"bin_width_rad": self.bin_width, "counts": list(self.counts)}


def _data(img) -> np.ndarray:
    return img.data if isinstance(img, LdrImage) else np.asarray(img, dtype=np.float64)


def estimate_angle_map(i_parallel, i_orthogonal, thresholds: ValidityThresholds):
    """Per-pixel angle between the ``i_parallel`` polarizer and the front polarizer.

    Returns ``(angles, mask)``; pixels where either input falls outside
    ``[p_min, p_max]`` are masked out and hold NaN.
    """
    par, orth = _data(i_parallel), _data(i_orthogonal)
    if par.shape != orth.shape:
        raise InvalidInputError(f"image sizes differ: {par.shape} vs {orth.shape}")
    mask = thresholds.contains(par) & thresholds.contains(orth) & ((par > 0) | (orth > 0))
    angles = np.full(par.shape, np.nan)
    angles[mask] = np.arctan2(np.sqrt(orth[mask]), np.sqrt(par[mask]))
    return angles, mask


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    return float(values[order][np.searchsorted(cum, 0.5 * cum[-1])])


def aggregate_mode(angles, mask=None, bin_width: float = DEFAULT_BIN_WIDTH, weights=None):
    """Mode of angle estimates in ``[0, pi/2]``.

    The winning histogram bin (lowest angle on ties) is refined to the
    median of the estimates that fell into it. With ``weights`` the bins
    compete on summed weight and the refinement is a weighted median; the
    returned histogram always holds plain counts. Returns ``(theta, histogram)``.
    """
    angles = np.asarray(angles, dtype=np.float64)
    if mask is None:
        mask = np.isfinite(angles)
    values = angles[mask]
    if values.size == 0:
        raise CalibrationError("no valid pixels to estimate the polarizer angle from")
    if not bin_width > 0:
        raise InvalidInputError("histogram bin width must be positive")
    n_bins = math.ceil(HALF_PI / bin_width)
    idx = np.clip(np.floor(values / bin_width).astype(np.int64), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    if weights is None:
        winner = int(np.argmax(counts))
        theta = float(np.median(values[idx == winner]))
    else:
        w = np.broadcast_to(np.asarray(weights, dtype=np.float64), angles.shape)[mask]
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidInputError("weights must be finite and non-negative")
        winner = int(np.argmax(np.bincount(idx, weights=w, minlength=n_bins)))
        sel = idx == winner
        theta = _weighted_median(values[sel], w[sel]) if w[sel].sum() > 0 else float(np.median(values[sel]))
    return theta, AngleHistogram(bin_width, tuple(int(c) for c in counts))


def precision_weights(i_parallel, i_orthogonal) -> np.ndarray:
    """Inverse variance of the log intensity ratio under uniform code quantization.

    Estimates from low codes sit on a coarse lattice of rational ratios;
    these weights keep such lattice spikes from out-voting the precise
    high-code estimates.
    """
    par, orth = _data(i_parallel), _data(i_orthogonal)
    with np.errstate(divide="ignore"):
        inv = 1.0 / np.square(np.maximum(par, 1e-12)) + 1.0 / np.square(np.maximum(orth, 1e-12))
    return 1.0 / inv


@dataclass(frozen=True)
class PairEstimate:
    """Angle estimate from one orthogonal pair; ``theta`` is None when no pixel qualified."""

    theta: float | None
    valid_count: int
    histogram: AngleHistogram | None = field(default=None, compare=False)


def estimate_pair(i_parallel, i_orthogonal, thresholds: ValidityThresholds,
                  bin_width: float = DEFAULT_BIN_WIDTH, weighting: str = "precision") -> PairEstimate:
    if weighting not in WEIGHTING_MODES:
        raise InvalidInputError(f"unknown weighting {weighting!r}")
    angles, mask = estimate_angle_map(i_parallel, i_orthogonal, thresholds)
    count = int(mask.sum())
    if count == 0:
        return PairEstimate(None, 0)
    weights = precision_weights(i_parallel, i_orthogonal) if weighting == "precision" else None
    theta, hist = aggregate_mode(angles, mask, bin_width, weights)
    return PairEstimate(theta, count, hist)


def _partner_candidates(theta: float) -> tuple[float, float]:
    # the other pair sits 45 degrees away; folding into [0, pi/2] loses the
    # sign, which leaves two complementary candidates
    d = abs(QUARTER_PI - theta)
    return d, HALF_PI - d


def _parallel_is_brighter(i_parallel, i_orthogonal, thresholds: ValidityThresholds) -> bool:
    par, orth = _data(i_parallel), _data(i_orthogonal)
    usable = (par <= thresholds.p_max) & (orth <= thresholds.p_max)
    usable &= np.maximum(par, orth) >= thresholds.p_min
    if not usable.any():
        raise CalibrationError("no usable pixels to resolve the polarizer orientation")
    return float(np.sum(par[usable] - orth[usable])) >= 0.0


def _resolve_partner(anchor: float, direct: float | None, i_parallel, i_orthogonal,
                     thresholds: ValidityThresholds) -> float:
    lo, hi = sorted(_partner_candidates(anchor))
    if direct is not None:
        return lo if abs(lo - direct) <= abs(hi - direct) else hi
    return lo if _parallel_is_brighter(i_parallel, i_orthogonal, thresholds) else hi


def estimate_exposures(stack: PolarityStack, thresholds: ValidityThresholds | None = None,
                       bin_width: float = DEFAULT_BIN_WIDTH,
                       geometry: str = "joint", weighting: str = "precision") -> ExposureEstimate:
    """Estimate the angle (and exposure ``cos^2``) of each polarity image.

    The 0/90 pair gives theta_1, the 45/135 pair theta_2; theta_3 and
    theta_4 are their complements. With ``geometry="joint"`` the pair whose
    angle is closer to 45 degrees (the better conditioned ratio) anchors
    the other one through the fixed 45 degree sensor spacing, and the other
    pair's own estimate only picks between the two mirror candidates. With
    ``"independent"`` both pairs are used as measured. Joint mode falls back
    to the measured pairs when they contradict the 45 degree spacing by more
    than ``JOINT_TOLERANCE``. Either way a pair without valid pixels is
    derived from the other one.

    ``weighting="precision"`` weights every pixel's vote by
    :func:`precision_weights`; ``"uniform"`` takes the plain mode.
    """
    if geometry not in GEOMETRY_MODES:
        raise InvalidInputError(f"unknown geometry mode {geometry!r}")
    if thresholds is None:
        thresholds = ValidityThresholds.for_bit_depth(stack.bit_depth)
    p1 = estimate_pair(stack[0], stack[2], thresholds, bin_width, weighting)
    p2 = estimate_pair(stack[1], stack[3], thresholds, bin_width, weighting)

    if p1.theta is None and p2.theta is None:
        raise CalibrationError("no pixel is well exposed in both images of either orthogonal pair")
    if p1.theta is None:
        t2 = p2.theta
        t1 = _resolve_partner(t2, None, stack[0], stack[2], thresholds)
    elif p2.theta is None:
        t1 = p1.theta
        t2 = _resolve_partner(t1, None, stack[1], stack[3], thresholds)
    elif geometry == "independent":
        t1, t2 = p1.theta, p2.theta
    elif abs(p1.theta - QUARTER_PI) <= abs(p2.theta - QUARTER_PI):
        t1 = p1.theta
        t2 = _resolve_partner(t1, p2.theta, stack[1], stack[3], thresholds)
    else:
        t2 = p2.theta
        t1 = _resolve_partner(t2, p1.theta, stack[0], stack[2], thresholds)
    used = geometry if p1.theta is not None and p2.theta is not None else "derived"
    if used == "joint" and max(abs(t1 - p1.theta), abs(t2 - p2.theta)) > JOINT_TOLERANCE:
        # the pairs cannot come from polarizers 45 degrees apart; trust each as measured
        t1, t2 = p1.theta, p2.theta
        used = "independent"

    diagnostics = {
        "geometry": geometry,
        "geometry_used": used,
        "weighting": weighting,
        "bin_width_rad": bin_width,
        "pair_direct_rad": [p1.theta, p2.theta],
    }
    for name, p in (("pair_000_090", p1), ("pair_045_135", p2)):
        diagnostics[name] = p.histogram.to_dict() if p.histogram is not None else None
    return ExposureEstimate(
        theta_hat=(t1, t2, HALF_PI - t1, HALF_PI - t2),
        valid_pixel_count=(p1.valid_count, p2.valid_count, p1.valid_count, p2.valid_count),
        histogram=diagnostics,
    )


def nominal_exposures(phi: float) -> tuple[float, ...]:
    """Exposures ``cos^2`` implied by a known front polarizer angle."""
    return tuple(math.cos(t) ** 2 for t in forward.relative_angles(phi))


def fold_angle(theta):
    """Map an angle onto ``[0, pi/2]`` keeping ``cos^2`` unchanged."""
    return np.abs((np.asarray(theta) + HALF_PI) % math.pi - HALF_PI)


@dataclass(frozen=True)
class SweepScenario:
    """Synthetic setup for the extinction-ratio error sweep.

    ``incident`` is ``"parallel"`` (fully polarized along the front
    polarizer's transmission axis) or ``"orthogonal"`` (along its extinction
    axis). ``theta_deg`` is the angle between the first sensor polarizer and
    the front polarizer. Intensities are noise free and unquantized.
    """

    incident: str = "parallel"
    theta_deg: float = 10.0
    levels: tuple[float, ...] = tuple(np.linspace(0.25, 1.0, 64))
    bin_width: float = DEFAULT_BIN_WIDTH

    def __post_init__(self):
        if self.incident not in ("parallel", "orthogonal"):
            raise InvalidInputError(f"unknown incident polarization {self.incident!r}")

    @property
    def reference_angle(self) -> float:
        """Angle the estimator should converge to as the polarizers become ideal."""
        t = float(fold_angle(math.radians(self.theta_deg)))
        # light leaking through the extinction axis is polarized along it
        return t if self.incident == "parallel" else HALF_PI - t

    def to_dict(self) -> dict:
        return {
            "incident": self.incident,
            "theta_deg": self.theta_deg,
            "levels": [float(v) for v in self.levels],
            "bin_width_rad": self.bin_width,
        }


@dataclass(frozen=True)
class SweepRow:
    rho: float
    alpha: float
    theta_true: float
    theta_hat: float
    error_pct: float


def sweep_extinction_error(rho_grid, scenario: SweepScenario | None = None) -> list[SweepRow]:
    """Relative angle-estimate error (%) as a function of extinction ratio.

    Rows where no pixel is measurable (e.g. orthogonal light through ideal
    polarizers) carry NaN.
    """
    scenario = scenario or SweepScenario()
    levels = np.asarray(scenario.levels, dtype=np.float64)[None, :]
    aop = 0.0 if scenario.incident == "parallel" else HALF_PI
    theta = math.radians(scenario.theta_deg)
    truth = scenario.reference_angle
    thresholds = ValidityThresholds(1e-12, float(levels.max()))
    rows = []
    for rho in rho_grid:
        rho = float(rho)
        rig = PolarizerRig(phi=0.0, rho=rho)
        i_par = levels * forward.chain_transmission(theta, rig, dolp=1.0, aop=aop)
        i_orth = levels * forward.chain_transmission(theta + HALF_PI, rig, dolp=1.0, aop=aop)
        angles, mask = estimate_angle_map(i_par, i_orth, thresholds)
        if mask.any():
            est, _ = aggregate_mode(angles, mask, scenario.bin_width)
            err = abs(est - truth) / truth * 100.0
        else:
            est = err = float("nan")
        rows.append(SweepRow(rho, forward.alpha_from_rho(rho), truth, est, err))
    return rows
