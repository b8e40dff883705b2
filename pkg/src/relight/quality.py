"""No-reference quality scoring from natural scene statistics.

A frame's luma is normalized to MSCN coefficients (local mean subtracted,
local deviation divided out, 7x7 Gaussian window with sigma 7/6 and
C = 1/255 stabilizer).  A generalized Gaussian is moment-matched to the
coefficients and an asymmetric one to the four orientation products, at the
native scale and after 2x2 box downsampling: 2 x (2 + 4*4) = 36 features.

Scores are produced by a small pluggable model; by convention lower is
better.  Two kinds exist:

``linear``
    dot(weights, normalized features) + bias.
``pristine_distance``
    Mahalanobis distance from the normalized features to a corpus of clean
    images (the classic fit-to-pristine-statistics approach); no opinion
    labels needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.special import gamma as gamma_fn

from .frameio import to_luma

__all__ = [
    "NssFeatures",
    "QualityModel",
    "mscn",
    "fit_ggd",
    "fit_aggd",
    "extract_features",
    "score",
    "save_model",
    "load_model",
    "fit_pristine_model",
    "default_model",
]

#: stabilizer added to the local deviation, in [0,1] units
C_STAB = 1.0 / 255.0

_WINDOW = 7
_SIGMA = 7.0 / 6.0

#: orientation shifts for pairwise products: horizontal, vertical, two diagonals
_SHIFTS = ((0, 1), (1, 0), (1, 1), (-1, 1))


def _gaussian_kernel() -> np.ndarray:
    half = _WINDOW // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k1 = np.exp(-(x**2) / (2.0 * _SIGMA**2))
    k2 = np.outer(k1, k1)
    return k2 / k2.sum()


_KERNEL = _gaussian_kernel()


def mscn(frame: np.ndarray) -> np.ndarray:
    """Mean-subtracted contrast-normalized coefficients of the luma."""
    lum = to_luma(frame)
    mu = ndimage.correlate(lum, _KERNEL, mode="reflect")
    var = ndimage.correlate(lum * lum, _KERNEL, mode="reflect") - mu * mu
    sigma = np.sqrt(np.abs(var))
    return (lum - mu) / (sigma + C_STAB)


@lru_cache(maxsize=1)
def _ggd_ratio_table() -> tuple[np.ndarray, np.ndarray]:
    beta = np.arange(0.2, 10.001, 0.001)
    ratio = gamma_fn(1.0 / beta) * gamma_fn(3.0 / beta) / gamma_fn(2.0 / beta) ** 2
    return beta, ratio


def _ggd_ratio(beta: float) -> float:
    return float(gamma_fn(1.0 / beta) * gamma_fn(3.0 / beta) / gamma_fn(2.0 / beta) ** 2)


def fit_ggd(x: np.ndarray) -> tuple[float, float]:
    """Moment-match a zero-mean generalized Gaussian; returns (shape, variance).

    Uses the classic ratio rho = E[x^2] / E[|x|]^2 looked up over a dense
    shape grid, then bisection-refines between neighbouring grid points.
    Degenerate (all-constant) input returns the Gaussian sentinel (2, 0).
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    m_abs = np.mean(np.abs(x))
    m2 = np.mean(x * x)
    if m2 < 1e-12 or m_abs < 1e-9:
        return 2.0, 0.0
    rho = m2 / (m_abs * m_abs)
    beta_grid, ratio_grid = _ggd_ratio_table()
    idx = int(np.argmin(np.abs(ratio_grid - rho)))
    lo = beta_grid[max(idx - 1, 0)]
    hi = beta_grid[min(idx + 1, len(beta_grid) - 1)]
    # ratio is strictly decreasing in beta; bisect the bracket
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if _ggd_ratio(mid) > rho:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), float(m2)


def fit_aggd(x: np.ndarray) -> tuple[float, float, float, float]:
    """Moment-match an asymmetric GGD; returns (shape, mean, var_left, var_right).

    Left/right second moments are taken over strictly negative/positive
    samples; the mean parameter is the standard eta expression from the
    fitted shape and the two deviations.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    neg = x[x < 0.0]
    pos = x[x > 0.0]
    if neg.size == 0 or pos.size == 0 or np.mean(x * x) < 1e-12:
        return 2.0, 0.0, 0.0, 0.0
    sigma_l = np.sqrt(np.mean(neg * neg))
    sigma_r = np.sqrt(np.mean(pos * pos))
    gamma_hat = sigma_l / sigma_r
    r_hat = np.mean(np.abs(x)) ** 2 / np.mean(x * x)
    r_norm = r_hat * (gamma_hat**3 + 1.0) * (gamma_hat + 1.0) / (gamma_hat**2 + 1.0) ** 2
    beta_grid, ratio_grid = _ggd_ratio_table()
    # same table: AGGD matches 1/ratio against r_norm
    idx = int(np.argmin(np.abs(1.0 / ratio_grid - r_norm)))
    lo = beta_grid[max(idx - 1, 0)]
    hi = beta_grid[min(idx + 1, len(beta_grid) - 1)]
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if 1.0 / _ggd_ratio(mid) < r_norm:
            lo = mid
        else:
            hi = mid
    shape = 0.5 * (lo + hi)
    eta = (sigma_r - sigma_l) * (
        gamma_fn(2.0 / shape) / gamma_fn(1.0 / shape)
    ) * np.sqrt(gamma_fn(1.0 / shape) / gamma_fn(3.0 / shape))
    return float(shape), float(eta), float(sigma_l**2), float(sigma_r**2)


@dataclass(frozen=True)
class NssFeatures:
    """The 36-entry feature vector plus the scales it was computed at."""

    values: np.ndarray
    scales: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.shape != (self.scales * 18,):
            raise ValueError(f"expected {self.scales * 18} features, got {self.values.shape}")


def _downsample2(lum: np.ndarray) -> np.ndarray:
    h, w = lum.shape
    h2, w2 = h - h % 2, w - w % 2
    block = lum[:h2, :w2].reshape(h2 // 2, 2, w2 // 2, 2)
    return block.mean(axis=(1, 3))


def extract_features(frame: np.ndarray) -> NssFeatures:
    """Compute the 36 NSS features of a frame (luma only)."""
    lum = to_luma(frame)
    if lum.shape[0] < 16 or lum.shape[1] < 16:
        raise ValueError(f"frame too small for NSS features: {lum.shape}, need >= 16x16")
    feats: list[float] = []
    for scale in range(2):
        if scale:
            lum = _downsample2(lum)
        coeffs = mscn(lum)
        shape, variance = fit_ggd(coeffs)
        feats.extend([shape, variance])
        for dy, dx in _SHIFTS:
            product = coeffs * np.roll(coeffs, (dy, dx), axis=(0, 1))
            feats.extend(fit_aggd(product))
    return NssFeatures(np.array(feats))


# ---------------------------------------------------------------------------
# scoring models
# ---------------------------------------------------------------------------


@dataclass
class QualityModel:
    """Feature normalization plus either linear weights or pristine statistics.

    ``kind`` is "linear" (weights, bias) or "pristine_distance" (covariance
    of the normalized pristine features; the normalization mean is the
    pristine mean).  Lower scores mean better quality for both kinds.
    """

    kind: str
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    weights: np.ndarray | None = None
    bias: float = 0.0
    covariance: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.feature_mean = np.asarray(self.feature_mean, dtype=np.float64)
        self.feature_scale = np.asarray(self.feature_scale, dtype=np.float64)
        if self.kind not in ("linear", "pristine_distance"):
            raise ValueError(f"unknown quality model kind {self.kind!r}")
        if np.any(self.feature_scale <= 0.0):
            raise ValueError("feature_scale entries must be positive")
        if self.kind == "linear" and self.weights is None:
            raise ValueError("linear model needs weights")
        if self.kind == "pristine_distance" and self.covariance is None:
            raise ValueError("pristine_distance model needs a covariance")


def score(frame_or_features: np.ndarray | NssFeatures, model: QualityModel) -> float:
    """Score a frame (or precomputed features); lower is better."""
    feats = (
        frame_or_features
        if isinstance(frame_or_features, NssFeatures)
        else extract_features(frame_or_features)
    )
    g = (feats.values - model.feature_mean) / model.feature_scale
    if model.kind == "linear":
        return float(np.dot(model.weights, g) + model.bias)
    cov = model.covariance + 0.1 * np.eye(len(g))
    return float(np.sqrt(g @ np.linalg.solve(cov, g)))


def fit_pristine_model(images: list[np.ndarray]) -> QualityModel:
    """Build a pristine_distance model from a corpus of clean images."""
    if not images:
        raise ValueError("empty corpus")
    table = np.stack([extract_features(img).values for img in images])
    mean = table.mean(axis=0)
    scale = np.maximum(table.std(axis=0), 1e-3)
    normalized = (table - mean) / scale
    cov = np.cov(normalized, rowvar=False) if len(images) > 1 else np.zeros((36, 36))
    return QualityModel(
        kind="pristine_distance",
        feature_mean=mean,
        feature_scale=scale,
        covariance=np.atleast_2d(cov),
    )


@lru_cache(maxsize=1)
def default_model() -> QualityModel:
    """Deterministic built-in model fitted to the bundled synthetic corpus."""
    from .synth import make_corpus

    return fit_pristine_model(make_corpus(count=16, size=128, seed=500))


# ---------------------------------------------------------------------------
# model file format: one "key value..." line per field, repr'd floats
# ---------------------------------------------------------------------------


def _fmt(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(values).ravel())


def save_model(model: QualityModel, path: str | Path) -> None:
    lines = [
        f"kind {model.kind}",
        f"mean {_fmt(model.feature_mean)}",
        f"scale {_fmt(model.feature_scale)}",
    ]
    if model.kind == "linear":
        lines.append(f"weights {_fmt(model.weights)}")
        lines.append(f"bias {model.bias!r}")
    else:
        lines.append(f"covariance {_fmt(model.covariance)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path: str | Path) -> QualityModel:
    fields: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValueError(f"unreadable quality model file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, _, value = line.partition(" ")
        if not value:
            raise ValueError(f"{path}:{lineno}: malformed model line {line!r}")
        fields[key] = value
    def vector(key: str) -> np.ndarray:
        return np.array([float(tok) for tok in fields[key].split()], dtype=np.float64)

    try:
        kind = fields["kind"].strip()
        mean = vector("mean")
        scale = vector("scale")
        if kind == "linear":
            return QualityModel(
                kind=kind,
                feature_mean=mean,
                feature_scale=scale,
                weights=vector("weights"),
                bias=float(fields["bias"]),
            )
        cov = vector("covariance").reshape(mean.size, mean.size)
        return QualityModel(kind=kind, feature_mean=mean, feature_scale=scale, covariance=cov)
    except (KeyError, ValueError) as exc:
        raise ValueError(f"corrupt quality model file {path}: {exc}") from exc
