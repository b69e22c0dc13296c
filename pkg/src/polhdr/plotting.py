"""Matplotlib figures written next to the CSV/JSON reports."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

params = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "figure.dpi": 150,
    "savefig.bbox": "tight",
}

golden_mean = (math.sqrt(5) - 1.0) / 2.0


def _figure(width=4.5, height=None, ncols=1):
    with plt.rc_context(params):
        return plt.subplots(1, ncols, figsize=(width, height or width * golden_mean))


def _save(fig, path):
    with plt.rc_context(params):
        fig.savefig(path)
    plt.close(fig)


def plot_sweep(rows, path, marker_rho: float | None = 1 / 500):
    """Angle-estimate error against extinction ratio on log-log axes."""
    rho = np.array([r.rho for r in rows])
    err = np.array([r.error_pct for r in rows])
    keep = (rho > 0) & np.isfinite(err) & (err > 0)
    fig, ax = _figure()
    ax.loglog(rho[keep], err[keep], "o-", color="#2b8cbe", label="estimate error")
    if marker_rho is not None:
        ax.axvline(marker_rho, ls=":", c="#d7301f", label=f"rho = 1:{round(1 / marker_rho)}")
    ax.set_xlabel("extinction ratio rho")
    ax.set_ylabel("relative angle error (%)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)


def plot_angle_histograms(estimate, path):
    """Per-pair histograms of per-pixel angle estimates with the chosen angle marked."""
    fig, axes = _figure(width=7.0, height=2.6, ncols=2)
    diag = estimate.histogram
    for ax, key, theta in zip(axes, ("pair_000_090", "pair_045_135"), estimate.theta_hat[:2]):
        hist = diag.get(key)
        if hist:
            bw = hist["bin_width_rad"]
            counts = np.asarray(hist["counts"])
            centers = np.degrees((np.arange(counts.size) + 0.5) * bw)
            ax.bar(centers, counts, width=math.degrees(bw), color="#7bccc4")
        else:
            ax.text(0.5, 0.5, "no valid pixels", ha="center", transform=ax.transAxes)
        ax.axvline(math.degrees(theta), c="#08589e", ls="--")
        ax.set_title(key.replace("_", " "))
        ax.set_xlabel("angle (deg)")
    axes[0].set_ylabel("pixels")
    _save(fig, path)


def plot_comparison(reference, test, path, max_code: int = 255):
    """Tone-mapped reference, test and absolute difference side by side."""
    fig, axes = _figure(width=9.0, height=3.0, ncols=3)
    ref = np.asarray(reference)
    tst = np.asarray(test)
    for ax, img, title in ((axes[0], ref, "reference"), (axes[1], tst, "test")):
        ax.imshow(img, cmap="gray", vmin=0, vmax=max_code)
        ax.set_title(title)
    im = axes[2].imshow(np.abs(ref - tst), cmap="magma")
    axes[2].set_title("|difference|")
    fig.colorbar(im, ax=axes[2], fraction=0.046)
    for ax in axes:
        ax.set_axis_off()
    _save(fig, path)
