"""Command line interface: ``polhdr <subcommand> ...``.

Exit status is 0 on success, 2 for usage errors and a stage-specific code
otherwise (see ``EXIT_CODES``).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__, calibrate, forward, fusion, io, metrics, mosaic, plotting
from .config import ConfigError, PipelineConfig, provenance
from .core import ANGLE_LABELS, ExposureEstimate, InvalidInputError, PolarityStack, PolHdrError
from .pipeline import run_pipeline, simulate_from_config, stage
from .report import loglog_fit, semilog_fit, write_json, write_sweep_csv

EXIT_CODES = {
    "input": 3,
    "config": 4,
    "simulate": 5,
    "demux": 6,
    "calibrate": 7,
    "fuse": 8,
    "eval": 9,
    "sweep": 10,
    "output": 11,
}


def _load_config(args) -> PipelineConfig:
    with stage("config"):
        return PipelineConfig.load(args.config) if args.config else PipelineConfig()


def _label_index(path: Path) -> int:
    m = re.search(r"(000|045|090|135)(?=\.[^.]+$)", path.name)
    if m is None:
        raise InvalidInputError(f"{path}: file name must end in one of {ANGLE_LABELS}")
    return ANGLE_LABELS.index(m.group(1))


def _read_stack(paths) -> PolarityStack:
    paths = [Path(p) for p in paths]
    if len(paths) != 4:
        raise InvalidInputError(f"expected 4 polarity images, got {len(paths)}")
    by_index = {}
    for p in paths:
        i = _label_index(p)
        if i in by_index:
            raise InvalidInputError(f"duplicate polarity {ANGLE_LABELS[i]}")
        by_index[i] = io.read_ldr(p)
    return PolarityStack(tuple(by_index[i] for i in range(4)))


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    overrides = {
        k: v
        for k, v in {
            "dolp": args.dolp, "aop_deg": args.aop_deg, "phi_deg": args.phi_deg, "rho": args.rho,
            "bits": args.bits, "gain": args.gain, "exposure_time": args.time, "seed": args.seed,
            "read_noise_sigma": args.read_noise, "shot_noise": args.shot_noise,
        }.items()
        if v is not None
    }
    with stage("config"):
        cfg = cfg.with_overrides(**overrides)
    with stage("input"):
        if args.scene:
            radiance = io.read_pfm(args.scene)
        else:
            radiance = forward.synthetic_scene(args.size, args.size, args.decades, cfg.seed)
    with stage("simulate"):
        frame, truth = simulate_from_config(radiance, cfg)
    with stage("output"):
        io.write_ldr(args.out, frame.image)
        truth_path = args.truth or str(Path(args.out).with_suffix("")) + "_truth.pfm"
        io.write_pfm(truth_path, truth)
        if args.scene_out:
            io.write_pfm(args.scene_out, radiance)
    print(f"wrote {args.out} ({frame.shape[1]}x{frame.shape[0]}, {cfg.bits}-bit) and {truth_path}")
    return 0


def cmd_demux(args) -> int:
    with stage("input"):
        frame = mosaic.MosaicFrame(io.read_ldr(args.input))
    with stage("demux"):
        stack = mosaic.demux(frame, args.channel)
    with stage("output"):
        for label, img in zip(ANGLE_LABELS, stack.images):
            io.write_ldr(f"{args.out_prefix}{label}.{args.format}", img)
    print(f"wrote {args.out_prefix}{{{','.join(ANGLE_LABELS)}}}.{args.format}")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    overrides = {k: v for k, v in {"p_min": args.pmin, "p_max": args.pmax,
                                   "geometry": args.geometry, "weighting": args.weighting,
                                   "bin_width_deg": args.bin_width_deg}.items() if v is not None}
    with stage("config"):
        cfg = cfg.with_overrides(**overrides)
    with stage("input"):
        stack = _read_stack(args.stack)
    with stage("calibrate"):
        estimate = calibrate.estimate_exposures(stack, cfg.thresholds(stack.bit_depth),
                                                cfg.bin_width, cfg.geometry, cfg.weighting)
    report = {"provenance": provenance(cfg, args.stack), "calibration": estimate.to_dict()}
    with stage("output"):
        write_json(args.report, report)
        if args.figure:
            plotting.plot_angle_histograms(estimate, args.figure)
    degs = ", ".join(f"{math.degrees(t):.3f}" for t in estimate.theta_hat)
    exps = ", ".join(f"{e:.5f}" for e in estimate.exposure)
    print(f"theta_hat (deg): {degs}\nexposure: {exps}")
    return 0


def cmd_fuse(args) -> int:
    cfg = _load_config(args)
    overrides = {k: v for k, v in {"tonemap_key": args.key, "assumed_rho": args.assumed_rho}.items()
                 if v is not None}
    with stage("config"):
        cfg = cfg.with_overrides(**overrides)
    with stage("input"):
        stack = _read_stack(args.stack)
        calib = json.loads(Path(args.calib).read_text())
        estimate = ExposureEstimate.from_dict(calib.get("calibration", calib))
    with stage("fuse"):
        hdr = fusion.fuse_hdr(stack, estimate, cfg.thresholds(stack.bit_depth),
                              cfg.epsilon, cfg.exposure_floor, cfg.assumed_rho)
    with stage("output"):
        io.write_pfm(args.out, hdr.image)
        cov_path = args.coverage or str(Path(args.out).with_suffix("")) + "_coverage.pfm"
        io.write_pfm(cov_path, hdr.coverage.astype(np.float64))
        if args.tonemap:
            tm = fusion.tonemap_reinhard(hdr, cfg.tonemap_key, white_percentile=cfg.white_percentile,
                                         delta=cfg.log_delta)
            io.write_ldr(args.tonemap, tm)
    print(f"wrote {args.out} (coverage {hdr.covered.mean():.1%}) and {cov_path}")
    return 0


def _read_times(path, shots) -> list[tuple[str, float]]:
    rows = [r for r in csv.reader(Path(path).read_text().splitlines()) if r and r[0].strip()]
    if rows and len(rows[0]) == 2:
        try:
            float(rows[0][1])
        except ValueError:
            rows = rows[1:]  # header
        named = {Path(name.strip()).name: float(t) for name, t in rows}
        try:
            return [(s, named[Path(s).name]) for s in shots]
        except KeyError as exc:
            raise InvalidInputError(f"no exposure time listed for {exc.args[0]}") from exc
    times = []
    for r in rows:
        try:
            times.append(float(r[0]))
        except ValueError:
            continue  # header
    if len(times) != len(shots):
        raise InvalidInputError(f"{len(times)} exposure times for {len(shots)} shots")
    return list(zip(shots, times))


def cmd_fuse_bracket(args) -> int:
    cfg = _load_config(args)
    with stage("input"):
        pairs = sorted(_read_times(args.times, args.shots), key=lambda p: p[1])
        bracket = fusion.Bracket(tuple((io.read_ldr(p), t) for p, t in pairs))
    with stage("fuse"):
        hdr = fusion.fuse_bracket(bracket, cfg.thresholds(bracket.images[0].bit_depth),
                                  cfg.epsilon, args.reference_time)
    with stage("output"):
        io.write_pfm(args.out, hdr.image)
        cov_path = args.coverage or str(Path(args.out).with_suffix("")) + "_coverage.pfm"
        io.write_pfm(cov_path, hdr.coverage.astype(np.float64))
    print(f"wrote {args.out} from {len(pairs)} shots")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    with stage("input"):
        ref = io.read_pfm(args.ref)
        test = io.read_pfm(args.test)
        mask = io.read_pfm(args.coverage) > 0 if args.coverage else None
    with stage("eval"):
        if ref.shape != test.shape:
            raise InvalidInputError(f"reference {ref.shape} and test {test.shape} differ in size")
        region = mask if mask is not None else np.ones(ref.shape, dtype=bool)
        scale = 1.0
        if args.match_scale:
            # least-squares gain aligning the test image to the reference
            scale = float(np.sum(ref[region] * test[region]) / np.sum(test[region] ** 2))
            test = test * scale
        peak = float(ref[region].max()) if np.any(region) else 0.0
        if peak <= 0:
            raise InvalidInputError("reference is zero on the evaluated region")
        linear = metrics.evaluate(ref, test, peak, mask)
        report = {
            "provenance": provenance(cfg, [args.ref, args.test]),
            "linear": linear.to_dict(),
            "linear_peak": peak,
            "test_scale": scale,
        }
        if args.tonemap:
            params = fusion.reinhard_parameters(ref, cfg.tonemap_key, white_percentile=cfg.white_percentile,
                                                delta=cfg.log_delta)
            ref_tm = fusion.tonemap_reinhard(ref, params=params)
            test_tm = fusion.tonemap_reinhard(test, params=params)
            tm = metrics.evaluate(ref_tm.data, test_tm.data, ref_tm.max_code)
            report["tonemapped"] = tm.to_dict()
            report["tonemap_params"] = params.to_dict()
    with stage("output"):
        write_json(args.report, report)
        if args.figure:
            if not args.tonemap:
                params = fusion.reinhard_parameters(ref, cfg.tonemap_key,
                                                    white_percentile=cfg.white_percentile)
                ref_tm = fusion.tonemap_reinhard(ref, params=params)
                test_tm = fusion.tonemap_reinhard(test, params=params)
            plotting.plot_comparison(ref_tm.data, test_tm.data, args.figure, ref_tm.max_code)
    line = f"linear: PSNR {linear.psnr:.2f} dB, SSIM {linear.ssim:.4f} over {linear.evaluated_pixel_count} px"
    if args.tonemap:
        line += f"\ntone-mapped: PSNR {tm.psnr:.2f} dB, SSIM {tm.ssim:.4f}"
    print(line)
    return 0


def cmd_sweep(args) -> int:
    with stage("sweep"):
        if not (0 < args.rho_min < args.rho_max < 1):
            raise InvalidInputError("need 0 < rho-min < rho-max < 1")
        grid = list(np.logspace(math.log10(args.rho_min), math.log10(args.rho_max), args.steps))
        if args.include_zero:
            grid = [0.0] + grid
        scenario = calibrate.SweepScenario(incident=args.incident, theta_deg=args.theta_deg)
        rows = calibrate.sweep_extinction_error(grid, scenario)
    with stage("output"):
        write_sweep_csv(args.out, rows)
        figure = args.figure or str(Path(args.out).with_suffix(".png"))
        if not args.no_figure:
            plotting.plot_sweep(rows, figure)
    fit_rows = [r for r in rows if r.rho > 0 and math.isfinite(r.error_pct) and r.error_pct > 0]
    if len(fit_rows) >= 2:
        rho = [r.rho for r in fit_rows]
        err = [r.error_pct for r in fit_rows]
        _, _, r2_semi = semilog_fit(rho, err)
        slope, _, r2_log = loglog_fit(rho, err)
        print(f"fit error~log10(rho): R^2={r2_semi:.4f}; "
              f"log10(error)~log10(rho): slope={slope:.3f}, R^2={r2_log:.4f}")
    at500 = calibrate.sweep_extinction_error([1 / 500], scenario)[0]
    print(f"error at rho=1/500: {at500.error_pct:.3f}%  -> {args.out}")
    return 0


def cmd_pipeline(args) -> int:
    cfg = _load_config(args)
    result, report = run_pipeline(args.raw, cfg, args.out_dir,
                                  preview=False if args.no_preview else None)
    degs = ", ".join(f"{math.degrees(t):.3f}" for t in result.estimate.theta_hat)
    print(f"theta_hat (deg): {degs}; coverage {report['coverage_fraction']:.1%}; wrote {args.out_dir}")
    return 0


def cmd_config(args) -> int:
    cfg = _load_config(args)
    text = cfg.dumps()
    if args.write:
        Path(args.write).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_version(args) -> int:
    cfg = _load_config(args)
    print(json.dumps(provenance(cfg, args.inputs), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polhdr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"polhdr {__version__}")
    parser.add_argument("--config", help="pipeline config file (key = value lines)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a raw mosaic frame from a radiance map")
    p.add_argument("--scene", help="radiance PFM (omit for a built-in synthetic scene)")
    p.add_argument("--size", type=int, default=128, help="synthetic scene size in superpixels")
    p.add_argument("--decades", type=float, default=4.0, help="dynamic range of the synthetic scene")
    p.add_argument("--dolp", type=float)
    p.add_argument("--aop-deg", type=float)
    p.add_argument("--phi-deg", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--bits", type=int)
    p.add_argument("--gain", type=float)
    p.add_argument("--time", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--read-noise", type=float)
    p.add_argument("--shot-noise", action="store_true", default=None)
    p.add_argument("--out", required=True, help="raw frame (.png or .pgm)")
    p.add_argument("--truth", help="ground-truth PFM (default: <out>_truth.pfm)")
    p.add_argument("--scene-out", help="also write the radiance map used")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("demux", help="split a raw mosaic into four polarity images")
    p.add_argument("input")
    p.add_argument("--channel", default="luma", choices=mosaic.CHANNELS)
    p.add_argument("--out-prefix", default="stack_")
    p.add_argument("--format", default="png", choices=("png", "pgm"))
    p.set_defaults(func=cmd_demux)

    p = sub.add_parser("calibrate", help="estimate per-polarity exposures")
    p.add_argument("stack", nargs=4, help="stack_000/045/090/135 images")
    p.add_argument("--pmin", type=float, help="lower valid code (8-bit units)")
    p.add_argument("--pmax", type=float, help="upper valid code (8-bit units)")
    p.add_argument("--geometry", choices=calibrate.GEOMETRY_MODES)
    p.add_argument("--weighting", choices=calibrate.WEIGHTING_MODES)
    p.add_argument("--bin-width-deg", type=float)
    p.add_argument("--report", required=True)
    p.add_argument("--figure", help="write angle histograms to this image")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fuse", help="merge a polarity stack into linear HDR")
    p.add_argument("stack", nargs=4)
    p.add_argument("--calib", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--coverage", help="coverage PFM (default: <out>_coverage.pfm)")
    p.add_argument("--tonemap", help="write a tone-mapped preview")
    p.add_argument("--key", type=float)
    p.add_argument("--assumed-rho", type=float, help="polarizer extinction ratio used for the exposures")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("fuse-bracket", help="merge a time bracket into linear HDR")
    p.add_argument("--times", required=True, help="CSV of exposure times (one per shot, or file,time)")
    p.add_argument("shots", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--coverage")
    p.add_argument("--reference-time", type=float)
    p.set_defaults(func=cmd_fuse_bracket)

    p = sub.add_parser("eval", help="compare an HDR result with a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--coverage", help="restrict linear metrics to coverage > 0 of this PFM")
    p.add_argument("--tonemap", action="store_true", help="also score tone-mapped images")
    p.add_argument("--match-scale", action="store_true", help="fit a global gain to the test image first")
    p.add_argument("--report", required=True)
    p.add_argument("--figure")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="angle error versus extinction ratio")
    p.add_argument("--rho-min", type=float, default=1e-4)
    p.add_argument("--rho-max", type=float, default=1e-1)
    p.add_argument("--steps", type=int, default=40)
    p.add_argument("--include-zero", action="store_true")
    p.add_argument("--incident", default="parallel", choices=("parallel", "orthogonal"))
    p.add_argument("--theta-deg", type=float, default=10.0)
    p.add_argument("--out", required=True)
    p.add_argument("--figure", help="figure path (default: next to --out)")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pipeline", help="demux, calibrate, fuse and tone map one raw frame")
    p.add_argument("raw")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-preview", action="store_true")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("config", help="print or write the effective config")
    p.add_argument("--write")
    p.set_defaults(func=cmd_config)

    p = sub.add_parser("provenance", help="print version, config hash and input hashes")
    p.add_argument("inputs", nargs="*")
    p.set_defaults(func=cmd_version)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"polhdr [config]: {exc}", file=sys.stderr)
        return EXIT_CODES["config"]
    except PolHdrError as exc:
        print(f"polhdr [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.stage, 1)


if __name__ == "__main__":
    sys.exit(main())
