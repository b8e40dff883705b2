"""Fidelity and temporal-stability metrics.

PSNR and SSIM follow the standard definitions on [0, 1] data (SSIM: 11x11
Gaussian window, sigma 1.5, K1/K2 = 0.01/0.03, computed on luma).  The two
video metrics are reference-free: warp_error aligns consecutive frames
with this package's own flow estimator and averages the occlusion-masked
squared error, MABD is the mean absolute difference of successive frame
luminance means.  Both are reported x100 to land in a readable range.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .frameio import Sequence, to_luma, validate_frame
from .inter import FlowConfig, estimate_flow, estimate_occlusion, warp

__all__ = [
    "MetricReport",
    "METRIC_FLOW",
    "psnr",
    "ssim",
    "warp_error",
    "mabd",
    "report",
    "write_report",
]

#: flow settings for the warp-error metric: stiffer than the enhancer's so
#: the estimator does not chase per-frame noise
METRIC_FLOW = FlowConfig(lambda_hs=0.25, iters=60, pyr_min=32, warps=2)

_SSIM_SIGMA = 1.5
_SSIM_RADIUS = 5  # 11-tap window
_C1 = 0.01**2
_C2 = 0.03**2


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = validate_frame(a)
    b = validate_frame(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for unit-range data, capped at 100."""
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return 100.0
    return min(100.0, 10.0 * np.log10(1.0 / mse))


def _ssim_window() -> np.ndarray:
    x = np.arange(-_SSIM_RADIUS, _SSIM_RADIUS + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * _SSIM_SIGMA**2))
    return k / k.sum()


_SSIM_K = _ssim_window()


def _ssim_filter(img: np.ndarray) -> np.ndarray:
    out = ndimage.correlate1d(img, _SSIM_K, axis=0, mode="reflect")
    return ndimage.correlate1d(out, _SSIM_K, axis=1, mode="reflect")


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity on luma (Gaussian-weighted local stats).

    Border pixels inside the filter radius are cropped before averaging so
    padding never contributes.
    """
    a, b = _check_pair(a, b)
    x = to_luma(a)
    y = to_luma(b)
    if min(x.shape) < 2 * _SSIM_RADIUS + 1:
        raise ValueError(f"frame too small for SSIM window: {x.shape}")
    mu_x = _ssim_filter(x)
    mu_y = _ssim_filter(y)
    var_x = _ssim_filter(x * x) - mu_x * mu_x
    var_y = _ssim_filter(y * y) - mu_y * mu_y
    cov = _ssim_filter(x * y) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + _C1) * (2.0 * cov + _C2)
    den = (mu_x * mu_x + mu_y * mu_y + _C1) * (var_x + var_y + _C2)
    smap = num / den
    r = _SSIM_RADIUS
    return float(smap[r:-r, r:-r].mean())


def warp_error(seq: Sequence, flow_cfg: FlowConfig = METRIC_FLOW) -> float:
    """Occlusion-masked squared alignment error between consecutive frames.

    For each pair the previous frame is warped onto the current one with
    estimated flow, forward-backward occlusions and invalid samples are
    dropped, and the mean squared error over what remains is accumulated;
    the pair average is reported x100.
    """
    if len(seq) < 2:
        raise ValueError("warp_error needs at least two frames")
    total = 0.0
    for t in range(1, len(seq)):
        cur, prev = seq.frames[t], seq.frames[t - 1]
        fwd = estimate_flow(cur, prev, flow_cfg)
        bwd = estimate_flow(prev, cur, flow_cfg)
        mask = estimate_occlusion(fwd, bwd).values
        warped, valid = warp(prev, fwd)
        m = mask * valid
        diff2 = (warped - cur) ** 2
        if diff2.ndim == 3:
            diff2 = diff2.mean(axis=2)
        weight = float(m.sum())
        if weight > 0.0:
            total += float((m * diff2).sum()) / weight
    return 100.0 * total / (len(seq) - 1)


def mabd(seq: Sequence) -> float:
    """Mean absolute brightness difference of successive frames, x100."""
    if len(seq) < 2:
        raise ValueError("mabd needs at least two frames")
    means = np.array([float(to_luma(f).mean()) for f in seq.frames])
    return 100.0 * float(np.mean(np.abs(np.diff(means))))


@dataclass
class MetricReport:
    """Per-frame fidelity plus sequence-level stability numbers."""

    psnr: list[float]
    ssim: list[float]
    warp: float
    mabd: float

    @property
    def mean_psnr(self) -> float | None:
        return float(np.mean(self.psnr)) if self.psnr else None

    @property
    def mean_ssim(self) -> float | None:
        return float(np.mean(self.ssim)) if self.ssim else None


def report(seq: Sequence, reference: Sequence | None = None) -> MetricReport:
    """Evaluate a sequence, with per-frame PSNR/SSIM when a reference exists."""
    psnr_rows: list[float] = []
    ssim_rows: list[float] = []
    if reference is not None:
        if len(reference) != len(seq):
            raise ValueError("reference length does not match sequence")
        for out, ref in zip(seq.frames, reference.frames):
            psnr_rows.append(psnr(out, ref))
            ssim_rows.append(ssim(out, ref))
    return MetricReport(
        psnr=psnr_rows,
        ssim=ssim_rows,
        warp=warp_error(seq) if len(seq) > 1 else 0.0,
        mabd=mabd(seq) if len(seq) > 1 else 0.0,
    )


def write_report(rep: MetricReport, path: str | Path) -> None:
    """CSV layout: frame rows, a summary mean row, then warp and mabd rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "psnr", "ssim"])
        for i, (p, s) in enumerate(zip(rep.psnr, rep.ssim)):
            writer.writerow([i, f"{p:.4f}", f"{s:.4f}"])
        if rep.psnr:
            writer.writerow(["summary", f"{rep.mean_psnr:.4f}", f"{rep.mean_ssim:.4f}"])
        else:
            writer.writerow(["summary", "", ""])
        writer.writerow(["warp", f"{rep.warp:.4f}"])
        writer.writerow(["mabd", f"{rep.mabd:.4f}"])
