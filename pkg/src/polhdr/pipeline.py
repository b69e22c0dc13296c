"""End-to-end reconstruction: raw mosaic -> polarity stack -> exposures -> HDR."""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import calibrate, forward, fusion, io, mosaic
from .config import PipelineConfig, provenance
from .core import ExposureEstimate, PolarityStack, PolarizerRig, PolHdrError, SceneLight
from .report import write_json


@contextmanager
def stage(name: str):
    """Tag any error raised inside the block with the pipeline stage ``name``."""
    try:
        yield
    except PolHdrError as exc:
        if exc.stage in ("input", "polhdr"):
            exc.stage = name
        raise
    except (ValueError, OSError) as exc:
        raise PolHdrError(f"{name}: {exc}", stage=name) from exc


@dataclass(frozen=True)
class Reconstruction:
    stack: PolarityStack
    estimate: ExposureEstimate
    hdr: fusion.HdrImage


def reconstruct(frame: mosaic.MosaicFrame, config: PipelineConfig) -> Reconstruction:
    with stage("demux"):
        stack = mosaic.demux(frame, config.channel)
    thresholds = config.thresholds(stack.bit_depth)
    with stage("calibrate"):
        estimate = calibrate.estimate_exposures(stack, thresholds, config.bin_width,
                                                config.geometry, config.weighting)
    with stage("fuse"):
        hdr = fusion.fuse_hdr(stack, estimate, thresholds, config.epsilon, config.exposure_floor,
                              config.assumed_rho)
    return Reconstruction(stack, estimate, hdr)


def simulate_from_config(radiance: np.ndarray, config: PipelineConfig):
    """Simulated raw frame and its linear ground truth for a radiance map."""
    scene = SceneLight(radiance, config.dolp, np.radians(config.aop_deg))
    rig = PolarizerRig(np.radians(config.phi_deg), config.rho)
    sensor = forward.SensorModel(config.bits, config.gain, config.read_noise_sigma, config.shot_noise)
    frame = forward.simulate_capture(scene, rig, sensor, config.exposure_time, config.seed,
                                     config.unpolarized_samples)
    truth = forward.ground_truth(scene, rig, sensor, config.exposure_time, config.unpolarized_samples)
    return frame, truth


def run_pipeline(raw_path, config: PipelineConfig, out_dir, preview: bool | None = None) -> tuple[Reconstruction, dict]:
    """Reconstruct ``raw_path`` and write ``hdr.pfm``, ``coverage.pfm``, ``calib.json`` and an optional preview."""
    out_dir = Path(out_dir)
    with stage("input"):
        out_dir.mkdir(parents=True, exist_ok=True)
        frame = mosaic.MosaicFrame(io.read_ldr(raw_path))
    result = reconstruct(frame, config)
    with stage("output"):
        io.write_pfm(out_dir / "hdr.pfm", result.hdr.image)
        io.write_pfm(out_dir / "coverage.pfm", result.hdr.coverage.astype(np.float64))
        report = {
            "provenance": provenance(config, [raw_path]),
            "calibration": result.estimate.to_dict(),
            "fusion_exposure": list(fusion.fusion_exposures(result.estimate, config.assumed_rho)),
            "coverage_fraction": float(result.hdr.covered.mean()),
        }
        if config.tonemap if preview is None else preview:
            tm = fusion.tonemap_reinhard(result.hdr, config.tonemap_key,
                                         white_percentile=config.white_percentile,
                                         delta=config.log_delta)
            io.write_ldr(out_dir / "preview.png", tm)
            report["preview"] = "preview.png"
        write_json(out_dir / "calib.json", report)
    return result, report
