"""Temporal (cross-frame) proximal operator.

The center frame of a 5-frame window is fused with its flow-aligned
neighbours: a pixel-wise occlusion-weighted trimmed mean forms a structure
estimate, a soft-shrunk detail layer restores what fusion smoothed away,
and an exponential noise mask keeps bright noise from re-entering.

Flow convention used throughout: ``estimate_flow(src, dst)`` returns a
field sampled on the src grid with ``src(p) ~ dst(p + flow(p))``, so
``warp(dst, flow)`` aligns dst onto src.  For a translation of the scene
content by d pixels between src and dst, the flow is d.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .frameio import FrameWindow, to_luma, validate_frame

__all__ = [
    "FlowField",
    "FlowConfig",
    "InterConfig",
    "MaskMap",
    "InterResidual",
    "estimate_flow",
    "refine_flow",
    "warp",
    "estimate_occlusion",
    "noise_mask",
    "structure_estimate",
    "detail_compensation",
    "temporal_consistency_loss",
    "inter_prox",
    "read_flo",
    "write_flo",
]


@dataclass
class FlowField:
    """Dense displacement field: u is horizontal (+x right), v vertical (+y down).

    ``valid`` marks pixels whose displaced position lands inside the frame.
    """

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.u.shape != self.v.shape:
            raise ValueError("flow components must share one shape")
        if self.valid is None:
            self.valid = np.ones(self.u.shape, dtype=bool)
        self.valid = np.asarray(self.valid, dtype=bool)

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape


def zero_flow(shape: tuple[int, int]) -> FlowField:
    return FlowField(np.zeros(shape), np.zeros(shape), np.ones(shape, dtype=bool))


@dataclass(frozen=True)
class FlowConfig:
    """Pyramidal Horn-Schunck settings.

    ``lambda_hs`` is the smoothness weight entering the update denominator,
    ``iters`` the number of relaxation sweeps per pyramid level (split over
    ``warps`` re-warping rounds), ``pyr_min`` the coarsest level's minimum
    side length.
    """

    lambda_hs: float = 0.02
    iters: int = 50
    pyr_min: int = 16
    warps: int = 2

    def __post_init__(self) -> None:
        if self.lambda_hs <= 0.0:
            raise ValueError("lambda_hs must be positive")
        if self.iters < 1 or self.warps < 1 or self.pyr_min < 4:
            raise ValueError("bad flow configuration")


@dataclass(frozen=True)
class InterConfig:
    """Temporal prior knobs; tau=0 with a huge omega makes it an identity."""

    omega: float = 0.01
    tau: float = 0.01
    refine_steps: int = 10
    refine_step_size: float = 0.5
    flow: FlowConfig = field(default_factory=FlowConfig)

    def __post_init__(self) -> None:
        if self.omega <= 0.0:
            raise ValueError("omega must be positive")
        if self.tau < 0.0:
            raise ValueError("tau must be nonnegative")
        if self.refine_steps < 0:
            raise ValueError("refine_steps must be nonnegative")


@dataclass
class MaskMap:
    """Soft per-pixel weights in [0, 1]; ``omega`` records the width used, if any."""

    values: np.ndarray
    omega: float | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)


@dataclass
class InterResidual:
    """Output of the temporal prox: enhanced = input + residual exactly."""

    structure: np.ndarray
    residual: np.ndarray
    enhanced: np.ndarray


# ---------------------------------------------------------------------------
# optical flow
# ---------------------------------------------------------------------------

_AVG_KERNEL = np.array([[0.0, 0.25, 0.0], [0.25, 0.0, 0.25], [0.0, 0.25, 0.0]])


def _bilinear(img: np.ndarray, sy: np.ndarray, sx: np.ndarray) -> np.ndarray:
    """Sample a 2-D array at fractional coordinates, clamped to the border."""
    h, w = img.shape
    sy = np.clip(sy, 0.0, h - 1.0)
    sx = np.clip(sx, 0.0, w - 1.0)
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = sy - y0
    fx = sx - x0
    return (
        (1.0 - fy) * (1.0 - fx) * img[y0, x0]
        + (1.0 - fy) * fx * img[y0, x1]
        + fy * (1.0 - fx) * img[y1, x0]
        + fy * fx * img[y1, x1]
    )


def warp(frame: np.ndarray, flow: FlowField) -> tuple[np.ndarray, np.ndarray]:
    """Backward-warp a frame: output(p) = frame(p + flow(p)).

    Returns the warped frame and a validity mask; out-of-bounds samples are
    filled from the nearest border pixel and marked invalid.  Zero flow
    reproduces the input bit-exactly.
    """
    x = validate_frame(frame)
    h, w = x.shape[:2]
    if flow.shape != (h, w):
        raise ValueError(f"flow shape {flow.shape} does not match frame {x.shape}")
    ys, xs = np.mgrid[0:h, 0:w]
    sy = ys + flow.v
    sx = xs + flow.u
    valid = (sy >= 0.0) & (sy <= h - 1.0) & (sx >= 0.0) & (sx <= w - 1.0)
    if x.ndim == 2:
        out = _bilinear(x, sy, sx)
    else:
        out = np.stack([_bilinear(x[:, :, c], sy, sx) for c in range(3)], axis=-1)
    return out, valid


def _shrink2(img: np.ndarray) -> np.ndarray:
    return ndimage.gaussian_filter(img, 1.0, mode="reflect")[::2, ::2]


def _resize_flow(u: np.ndarray, v: np.ndarray, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    h, w = shape
    hs, ws = u.shape
    sy = np.linspace(0.0, hs - 1.0, h)[:, None] * np.ones((1, w))
    sx = np.ones((h, 1)) * np.linspace(0.0, ws - 1.0, w)[None, :]
    scale_x = w / ws
    scale_y = h / hs
    return _bilinear(u, sy, sx) * scale_x, _bilinear(v, sy, sx) * scale_y


def _hs_level(
    src: np.ndarray, dst: np.ndarray, u: np.ndarray, v: np.ndarray, cfg: FlowConfig
) -> tuple[np.ndarray, np.ndarray]:
    h, w = src.shape
    ys, xs = np.mgrid[0:h, 0:w]
    sweeps = max(cfg.iters // cfg.warps, 1)
    for _ in range(cfg.warps):
        dst_w = _bilinear(dst, ys + v, xs + u)
        gy_s, gx_s = np.gradient(src)
        gy_d, gx_d = np.gradient(dst_w)
        ix = 0.5 * (gx_s + gx_d)
        iy = 0.5 * (gy_s + gy_d)
        it = dst_w - src
        denom = cfg.lambda_hs + ix * ix + iy * iy
        du = np.zeros_like(u)
        dv = np.zeros_like(v)
        for _ in range(sweeps):
            du_avg = ndimage.correlate(du, _AVG_KERNEL, mode="nearest")
            dv_avg = ndimage.correlate(dv, _AVG_KERNEL, mode="nearest")
            t = (ix * du_avg + iy * dv_avg + it) / denom
            du = du_avg - ix * t
            dv = dv_avg - iy * t
        u = u + du
        v = v + dv
    return u, v


def estimate_flow(src: np.ndarray, dst: np.ndarray, cfg: FlowConfig = FlowConfig()) -> FlowField:
    """Pyramidal Horn-Schunck flow from src toward dst (luma-based).

    The result is sampled on the src grid; see the module docstring for the
    convention.  Identical inputs or textureless inputs give (near-)zero
    flow because only the smoothness term remains.
    """
    a = to_luma(src)
    b = to_luma(dst)
    if a.shape != b.shape:
        raise ValueError("src and dst must share one shape")
    pyr_a, pyr_b = [a], [b]
    while min(pyr_a[-1].shape) >= 2 * cfg.pyr_min:
        pyr_a.append(_shrink2(pyr_a[-1]))
        pyr_b.append(_shrink2(pyr_b[-1]))
    u = np.zeros_like(pyr_a[-1])
    v = np.zeros_like(pyr_a[-1])
    for level in range(len(pyr_a) - 1, -1, -1):
        if u.shape != pyr_a[level].shape:
            u, v = _resize_flow(u, v, pyr_a[level].shape)
        u, v = _hs_level(pyr_a[level], pyr_b[level], u, v, cfg)
    h, w = a.shape
    ys, xs = np.mgrid[0:h, 0:w]
    valid = (ys + v >= 0.0) & (ys + v <= h - 1.0) & (xs + u >= 0.0) & (xs + u <= w - 1.0)
    return FlowField(u, v, valid)


def _photometric(flow: FlowField, src_l: np.ndarray, dst_l: np.ndarray) -> float:
    warped, _ = warp(dst_l, flow)
    return float(np.mean(np.abs(warped - src_l)))


def refine_flow(
    flow: FlowField,
    src: np.ndarray,
    dst: np.ndarray,
    steps: int = 10,
    step_size: float = 0.5,
) -> FlowField:
    """Descent steps on the photometric L1 alignment error.

    Each step moves against the sign of the residual times the warped
    spatial gradient, followed by a light smoothing pull.  The best iterate
    seen is returned, so the photometric objective never increases; if
    nothing improves, the input flow comes back unchanged.
    """
    src_l = to_luma(src)
    dst_l = to_luma(dst)
    h, w = src_l.shape
    ys, xs = np.mgrid[0:h, 0:w]
    gy, gx = np.gradient(dst_l)
    best = flow
    best_obj = _photometric(flow, src_l, dst_l)
    u, v = flow.u.copy(), flow.v.copy()
    for _ in range(steps):
        warped = _bilinear(dst_l, ys + v, xs + u)
        r = np.sign(warped - src_l)
        gxw = _bilinear(gx, ys + v, xs + u)
        gyw = _bilinear(gy, ys + v, xs + u)
        u = u - step_size * r * gxw
        v = v - step_size * r * gyw
        u = u + 0.5 * (ndimage.correlate(u, _AVG_KERNEL, mode="nearest") - u)
        v = v + 0.5 * (ndimage.correlate(v, _AVG_KERNEL, mode="nearest") - v)
        candidate = FlowField(u.copy(), v.copy(), flow.valid)
        obj = _photometric(candidate, src_l, dst_l)
        if obj < best_obj:
            best, best_obj = candidate, obj
    if best is not flow:
        valid = (ys + best.v >= 0) & (ys + best.v <= h - 1) & (xs + best.u >= 0) & (xs + best.u <= w - 1)
        best = FlowField(best.u, best.v, valid)
    return best


def estimate_occlusion(f_fwd: FlowField, f_bwd: FlowField, rel: float = 0.01, abs_: float = 0.5) -> MaskMap:
    """Forward-backward consistency mask on the forward flow's grid.

    A pixel is occluded when |f_fwd(p) + f_bwd(p + f_fwd(p))|^2 exceeds
    rel * (|f_fwd(p)|^2 + |f_bwd(p + f_fwd(p))|^2) + abs_; mask value 1
    means consistent.
    """
    h, w = f_fwd.shape
    ys, xs = np.mgrid[0:h, 0:w]
    sy = ys + f_fwd.v
    sx = xs + f_fwd.u
    bu = _bilinear(f_bwd.u, sy, sx)
    bv = _bilinear(f_bwd.v, sy, sx)
    diff2 = (f_fwd.u + bu) ** 2 + (f_fwd.v + bv) ** 2
    mag2 = f_fwd.u**2 + f_fwd.v**2 + bu**2 + bv**2
    consistent = diff2 <= rel * mag2 + abs_
    return MaskMap(values=consistent.astype(np.float64))


# ---------------------------------------------------------------------------
# fusion
# ---------------------------------------------------------------------------


def noise_mask(x_tilde: np.ndarray, s: np.ndarray, omega: float = 0.01) -> MaskMap:
    """Soft gate against overshoot: exp(-relu(x_tilde - s)^2 / omega).

    Pixels at or below the structure estimate keep weight 1; the further a
    pixel overshoots it (bright speck behaviour), the harder it is pulled
    toward the structure.
    """
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    overshoot = np.maximum(np.asarray(x_tilde, dtype=np.float64) - np.asarray(s, dtype=np.float64), 0.0)
    return MaskMap(values=np.exp(-(overshoot**2) / omega), omega=omega)


def _warp_member(member: np.ndarray, flow: FlowField | None) -> tuple[np.ndarray, np.ndarray]:
    if flow is None:
        return np.asarray(member, dtype=np.float64), np.ones(member.shape[:2], dtype=bool)
    return warp(member, flow)


def structure_estimate(win: FrameWindow, weights: list[np.ndarray] | None = None) -> np.ndarray:
    """Occlusion-weighted trimmed mean of the window's aligned members.

    Neighbours are warped onto the centre with ``flows_to_center`` (None
    entries mean identity).  Per neighbour, the weight is warp validity
    times the supplied per-pixel weight (e.g. an occlusion mask).  Where at
    least four samples are valid (weight >= 0.5), the min and max samples
    are dropped and the rest averaged; elsewhere a plain weighted mean with
    the centre as anchor is used.
    """
    center = validate_frame(win.center)
    h, w = center.shape[:2]
    samples = [center]
    sample_w = [np.ones((h, w))]
    for j, member in enumerate(win.neighbors()):
        warped, valid = _warp_member(member, win.flows_to_center[j])
        wgt = valid.astype(np.float64)
        if weights is not None and weights[j] is not None:
            wgt = wgt * np.asarray(weights[j], dtype=np.float64)
        samples.append(warped)
        sample_w.append(wgt)
    vals = np.stack(samples)  # (5, H, W[, C])
    wts = np.stack(sample_w)  # (5, H, W)
    if vals.ndim == 4:
        wts = wts[:, :, :, None] * np.ones((1, 1, 1, vals.shape[3]))
    # averaging deviations from the centre keeps a static window bit-exact
    devs = vals - center[None]
    valid = wts >= 0.5
    n_valid = valid.sum(axis=0)
    # drop the (first) min and then the max among the remaining valid samples
    lo_masked = np.where(valid, devs, np.inf)
    imin = np.argmin(lo_masked, axis=0)
    valid2 = valid.copy()
    np.put_along_axis(valid2, imin[None], False, axis=0)
    hi_masked = np.where(valid2, devs, -np.inf)
    imax = np.argmax(hi_masked, axis=0)
    w_trim = np.where(valid, wts, 0.0)
    np.put_along_axis(w_trim, imin[None], 0.0, axis=0)
    np.put_along_axis(w_trim, imax[None], 0.0, axis=0)
    trimmed = (w_trim * devs).sum(axis=0) / np.maximum(w_trim.sum(axis=0), 1e-12)
    plain = (wts * devs).sum(axis=0) / np.maximum(wts.sum(axis=0), 1e-12)
    return center + np.where(n_valid >= 4, trimmed, plain)


def _soft_shrink(r: np.ndarray, tau: float) -> np.ndarray:
    if tau == 0.0:
        return r
    return np.sign(r) * np.maximum(np.abs(r) - tau, 0.0)


def detail_compensation(
    x: np.ndarray, s: np.ndarray, mask: MaskMap, tau: float = 0.01
) -> InterResidual:
    """Re-inject masked, soft-shrunk detail on top of the structure estimate.

    enhanced = s + mask * soft_shrink(x - s, tau); with tau = 0 and an
    all-ones mask this reduces to the identity on x.
    """
    x = validate_frame(x)
    d = _soft_shrink(x - np.asarray(s, dtype=np.float64), tau)
    m = mask.values
    if x.ndim == 3 and m.ndim == 2:
        m = m[:, :, None]
    enhanced = s + m * d
    return InterResidual(structure=np.asarray(s, dtype=np.float64), residual=enhanced - x, enhanced=enhanced)


def temporal_consistency_loss(
    warped: list[np.ndarray], targets: list[np.ndarray], masks: list[MaskMap]
) -> float:
    """Mask-weighted mean absolute difference over aligned neighbour pairs.

    Normalized by the total mask weight across all pairs; all-zero masks
    give 0 by convention.
    """
    if not (len(warped) == len(targets) == len(masks)):
        raise ValueError("warped/targets/masks must align")
    num = 0.0
    den = 0.0
    for wf, tf, mm in zip(warped, targets, masks):
        wf = np.asarray(wf, dtype=np.float64)
        tf = np.asarray(tf, dtype=np.float64)
        m = mm.values
        if wf.ndim == 3 and m.ndim == 2:
            m = m[:, :, None]
        m = np.broadcast_to(m, wf.shape)
        num += float(np.sum(m * np.abs(wf - tf)))
        den += float(np.sum(m))
    return num / den if den > 0.0 else 0.0


def inter_prox(win: FrameWindow, cfg: InterConfig = InterConfig()) -> InterResidual:
    """Full temporal prox on a window whose centre is the current target.

    Missing window flows are estimated (and photometrically refined) here;
    occlusion masks from forward-backward checks weight the fusion.
    """
    center = validate_frame(win.center)
    occ_weights: list[np.ndarray | None] = []
    for j, neighbor in enumerate(win.neighbors()):
        f_to = win.flows_to_center[j]
        f_from = win.flows_from_center[j]
        if f_to is None:
            f_to = estimate_flow(center, neighbor, cfg.flow)
            if cfg.refine_steps:
                f_to = refine_flow(f_to, center, neighbor, cfg.refine_steps, cfg.refine_step_size)
            win.flows_to_center[j] = f_to
        if f_from is None:
            f_from = estimate_flow(neighbor, center, cfg.flow)
            if cfg.refine_steps:
                f_from = refine_flow(f_from, neighbor, center, cfg.refine_steps, cfg.refine_step_size)
            win.flows_from_center[j] = f_from
        occ_weights.append(estimate_occlusion(f_to, f_from).values)
    s = structure_estimate(win, occ_weights)
    mask = noise_mask(center, s, cfg.omega)
    return detail_compensation(center, s, mask, cfg.tau)


# ---------------------------------------------------------------------------
# Middlebury .flo container
# ---------------------------------------------------------------------------

_FLO_MAGIC = 202021.25


def write_flo(path: str | Path, flow: FlowField) -> None:
    """Write a flow field in the Middlebury .flo layout (little-endian)."""
    h, w = flow.shape
    data = np.empty((h, w, 2), dtype="<f4")
    data[:, :, 0] = flow.u
    data[:, :, 1] = flow.v
    with open(path, "wb") as fh:
        fh.write(struct.pack("<fii", _FLO_MAGIC, w, h))
        fh.write(data.tobytes())


def read_flo(path: str | Path) -> FlowField:
    """Read a Middlebury .flo file back into a FlowField (all pixels valid)."""
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise ValueError(f"{path}: truncated .flo header")
    magic, w, h = struct.unpack("<fii", raw[:12])
    if abs(magic - _FLO_MAGIC) > 1e-3:
        raise ValueError(f"{path}: bad .flo magic {magic!r}")
    data = np.frombuffer(raw, dtype="<f4", count=h * w * 2, offset=12)
    if data.size != h * w * 2:
        raise ValueError(f"{path}: truncated .flo payload")
    data = data.reshape(h, w, 2).astype(np.float64)
    return FlowField(data[:, :, 0], data[:, :, 1], np.ones((h, w), dtype=bool))
