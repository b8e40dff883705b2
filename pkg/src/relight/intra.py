"""Spatial (within-frame) proximal operator.

The operator brightens and cleans a single frame in three moves:

1. percentile-match the frame's luminance onto a profile learned from
   well-exposed footage (monotone piecewise-linear remap, chroma scaled by
   the per-pixel luminance ratio);
2. generate a small set of gamma/linear illumination candidates around the
   matched frame and keep the one a no-reference quality scorer likes best,
   taking a single relaxed step toward it;
3. non-local-means denoise.

Since proximal steps must report how far they moved, the result carries
both the enhanced frame and the additive residual with respect to the
input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional, Sequence as Seq

import numpy as np
from scipy import ndimage

from .frameio import to_luma, validate_frame
from .quality import NssFeatures, QualityModel, extract_features
from .quality import score as quality_score

__all__ = [
    "IlluminationProfile",
    "CandidateParams",
    "IntraConfig",
    "IntraResidual",
    "PROFILE_LEVELS",
    "build_profile",
    "save_profile",
    "load_profile",
    "default_profile",
    "apply_profile",
    "gamma_candidate",
    "sample_candidates",
    "select_by_feedback",
    "denoise_prox",
    "estimate_gain",
    "intra_prox",
]

#: luminance percentile probes: min, 1, 4, ..., 97, max
PROFILE_LEVELS = np.concatenate(([0.0], np.arange(1.0, 98.0, 3.0), [100.0]))


@dataclass
class IlluminationProfile:
    """Pooled luminance statistics of a corpus of well-exposed images."""

    percentiles: np.ndarray
    target_mean: float
    target_std: float
    source_count: int

    def __post_init__(self) -> None:
        self.percentiles = np.asarray(self.percentiles, dtype=np.float64)
        if self.percentiles.shape != PROFILE_LEVELS.shape:
            raise ValueError(
                f"profile needs {PROFILE_LEVELS.size} percentile values, got {self.percentiles.shape}"
            )
        if np.any(np.diff(self.percentiles) < 0.0):
            raise ValueError("percentile vector must be nondecreasing")
        if np.any(self.percentiles < 0.0) or np.any(self.percentiles > 1.0):
            raise ValueError("percentile values must lie in [0, 1]")


@dataclass(frozen=True)
class CandidateParams:
    """One illumination candidate m = beta * (alpha * x)^gamma."""

    alpha: float
    beta: float
    gamma: float

    IDENTITY = None  # set below

    @property
    def is_identity(self) -> bool:
        return self.alpha == self.beta == self.gamma == 1.0


CandidateParams.IDENTITY = CandidateParams(1.0, 1.0, 1.0)


@dataclass(frozen=True)
class IntraConfig:
    """Spatial prior knobs (all optional pieces can be disabled).

    strength 0 disables the remap, n_candidates 1 leaves only the identity
    candidate, denoise_h 0 disables denoising; that combination makes the
    whole operator an exact identity.
    """

    strength: float = 1.0
    n_candidates: int = 8
    range_lo: float = 1.0
    range_hi: float = 1.1
    denoise_h: float = 0.04
    relax_rho: float = 0.5
    seed: int = 0
    fixed_selection: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError("strength must lie in [0, 1]")
        if self.n_candidates < 1:
            raise ValueError("need at least the identity candidate")
        if not 1.0 <= self.range_lo <= self.range_hi:
            raise ValueError("candidate range must satisfy 1 <= lo <= hi")
        if self.denoise_h < 0.0:
            raise ValueError("denoise_h must be nonnegative")
        if not 0.0 < self.relax_rho <= 1.0:
            raise ValueError("relax_rho must lie in (0, 1]")


@dataclass
class IntraResidual:
    """Output of the spatial prox: enhanced = input + residual exactly."""

    residual: np.ndarray
    enhanced: np.ndarray
    selected_candidate: int = 0


# ---------------------------------------------------------------------------
# illumination profile
# ---------------------------------------------------------------------------


def build_profile(images: Seq[np.ndarray]) -> IlluminationProfile:
    """Pool luminance samples over a corpus and summarize their distribution.

    Pooling (rather than averaging per-image statistics) makes the profile
    of two merged corpora equal the profile of the concatenated corpus.
    """
    if len(images) == 0:
        raise ValueError("empty corpus")
    pooled = np.concatenate([to_luma(validate_frame(img)).ravel() for img in images])
    return IlluminationProfile(
        percentiles=np.percentile(pooled, PROFILE_LEVELS),
        target_mean=float(pooled.mean()),
        target_std=float(pooled.std()),
        source_count=len(images),
    )


def save_profile(profile: IlluminationProfile, path: str | Path) -> None:
    payload = {
        "percentiles": [float(v) for v in profile.percentiles],
        "mean": profile.target_mean,
        "std": profile.target_std,
        "count": profile.source_count,
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_profile(path: str | Path) -> IlluminationProfile:
    try:
        payload = json.loads(Path(path).read_text())
        return IlluminationProfile(
            percentiles=np.asarray(payload["percentiles"], dtype=np.float64),
            target_mean=float(payload["mean"]),
            target_std=float(payload["std"]),
            source_count=int(payload["count"]),
        )
    except OSError as exc:
        raise ValueError(f"unreadable profile file {path}: {exc}") from exc
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValueError(f"corrupt profile file {path}: {exc}") from exc


@lru_cache(maxsize=1)
def default_profile() -> IlluminationProfile:
    """Profile of the bundled synthetic corpus (used when none is supplied)."""
    from .synth import make_corpus

    return build_profile(make_corpus(count=16, size=128, seed=500))


def _monotone_knots(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # np.interp needs strictly usable x-knots: collapse duplicate sources
    keep = np.concatenate(([True], np.diff(src) > 1e-12))
    return src[keep], dst[keep]


def apply_profile(
    frame: np.ndarray, profile: IlluminationProfile, strength: float = 1.0
) -> IntraResidual:
    """Percentile-match the frame's luminance onto the profile.

    The remap m sends the frame's own percentile knots onto the profile's
    and interpolates linearly in between (monotone by construction).  The
    result is blended with the input luminance by ``strength``; chroma is
    carried along by per-pixel ratio scaling and the output is clamped to
    [0, 1].
    """
    x = validate_frame(frame)
    if not 0.0 <= strength <= 1.0:
        raise ValueError("strength must lie in [0, 1]")
    if strength == 0.0:
        return IntraResidual(residual=np.zeros_like(x), enhanced=x.copy())
    lum = to_luma(x)
    src = np.percentile(lum, PROFILE_LEVELS)
    if src[-1] - src[0] < 1e-9:
        # constant frame: fall back to a pure gain toward the target mean
        gain = profile.target_mean / max(float(lum.mean()), 1e-6)
        mapped = np.clip(lum * gain, 0.0, 1.0)
    else:
        knots_x, knots_y = _monotone_knots(src, profile.percentiles)
        mapped = np.interp(lum, knots_x, knots_y)
    out_lum = (1.0 - strength) * lum + strength * mapped
    if x.ndim == 2:
        enhanced = np.clip(out_lum, 0.0, 1.0)
    else:
        ratio = out_lum / np.maximum(lum, 1e-6)
        enhanced = np.clip(x * ratio[:, :, None], 0.0, 1.0)
    return IntraResidual(residual=enhanced - x, enhanced=enhanced)


# ---------------------------------------------------------------------------
# illumination candidates and quality feedback
# ---------------------------------------------------------------------------


def gamma_candidate(frame: np.ndarray, params: CandidateParams) -> np.ndarray:
    """Apply m = beta * (alpha * x)^gamma per channel, clamped to [0, 1]."""
    x = np.clip(validate_frame(frame), 0.0, None)
    return np.clip(params.beta * (params.alpha * x) ** params.gamma, 0.0, 1.0)


def sample_candidates(
    n: int, lo: float = 1.0, hi: float = 1.1, seed: int | Seq[int] = 0
) -> list[CandidateParams]:
    """Identity plus n-1 random triples with alpha, beta, gamma ~ U(lo, hi)."""
    if n < 1:
        raise ValueError("need at least one candidate")
    rng = np.random.default_rng(seed)
    out = [CandidateParams.IDENTITY]
    for _ in range(n - 1):
        alpha, beta, gamma = rng.uniform(lo, hi, size=3)
        out.append(CandidateParams(float(alpha), float(beta), float(gamma)))
    return out


def select_by_feedback(
    candidates: Seq[np.ndarray],
    scorer: QualityModel | Callable[[np.ndarray], float],
) -> tuple[int, float]:
    """Pick the candidate with the lowest quality score (ties: lowest index)."""
    if len(candidates) == 0:
        raise ValueError("no candidates to select from")
    score_fn = scorer if callable(scorer) else (lambda f: quality_score(f, scorer))
    scores = []
    for i, cand in enumerate(candidates):
        try:
            scores.append(float(score_fn(cand)))
        except Exception as exc:
            raise RuntimeError(f"scorer failed on candidate {i}: {exc}") from exc
    best = int(np.argmin(scores))  # argmin returns the first minimum
    return best, scores[best]


# ---------------------------------------------------------------------------
# denoiser
# ---------------------------------------------------------------------------


def _nlm_channel(chan: np.ndarray, h: float, search: int = 3, patch: int = 1) -> np.ndarray:
    """Vectorized non-local means: one shifted comparison per search offset."""
    pad = search + patch
    padded = np.pad(chan, pad, mode="reflect")
    hh, ww = chan.shape
    acc = np.zeros_like(chan)
    weight_sum = np.zeros_like(chan)
    box = np.ones((2 * patch + 1, 2 * patch + 1))
    box /= box.size
    for dy in range(-search, search + 1):
        for dx in range(-search, search + 1):
            shifted = padded[pad + dy : pad + dy + hh, pad + dx : pad + dx + ww]
            diff2 = (chan - shifted) ** 2
            dist = ndimage.correlate(diff2, box, mode="reflect")
            w = np.exp(-dist / (h * h))
            acc += w * shifted
            weight_sum += w
    return acc / weight_sum


def denoise_prox(frame: np.ndarray, h: float) -> np.ndarray:
    """Non-local means over a 7x7 search window with 3x3 patches.

    ``h`` is the filtering strength in the same units as the pixel values;
    h = 0 returns the input unchanged.
    """
    x = validate_frame(frame)
    if h < 0.0:
        raise ValueError("h must be nonnegative")
    if h == 0.0:
        return x.copy()
    if x.ndim == 2:
        return _nlm_channel(x, h)
    return np.stack([_nlm_channel(x[:, :, c], h) for c in range(3)], axis=-1)


# ---------------------------------------------------------------------------
# gain estimation and the assembled prox
# ---------------------------------------------------------------------------


def estimate_gain(
    frame: np.ndarray,
    profile: IlluminationProfile,
    strength: float = 1.0,
    eps: float = 1e-3,
) -> np.ndarray:
    """Per-pixel illumination gain of an observed frame.

    Smoothed observed luminance over smoothed profile-matched luminance,
    clipped to (0, 1]; 15x15 box smoothing keeps the estimate from chasing
    texture.
    """
    lum = to_luma(frame)
    matched = to_luma(apply_profile(frame, profile, strength).enhanced)
    num = ndimage.uniform_filter(lum, size=15, mode="reflect")
    den = np.maximum(ndimage.uniform_filter(matched, size=15, mode="reflect"), eps)
    return np.clip(num / den, eps, 1.0)


def intra_prox(
    u_tilde: np.ndarray,
    profile: IlluminationProfile,
    scorer: QualityModel | Callable[[np.ndarray], float] | None,
    cfg: IntraConfig = IntraConfig(),
) -> IntraResidual:
    """Full spatial prox: remap, feedback-selected candidate step, denoise.

    The candidate step is a single relaxed move x <- x - rho * (x - m*)
    toward the selected illumination m*; with only the identity candidate
    it is a no-op.  ``scorer`` may be None when ``cfg.fixed_selection``
    pins the choice.
    """
    x_in = validate_frame(u_tilde)
    x = apply_profile(x_in, profile, cfg.strength).enhanced
    params = sample_candidates(cfg.n_candidates, cfg.range_lo, cfg.range_hi, cfg.seed)
    if cfg.fixed_selection is not None:
        if not 0 <= cfg.fixed_selection < len(params):
            raise ValueError("fixed_selection out of candidate range")
        chosen = cfg.fixed_selection
    elif len(params) == 1:
        chosen = 0
    else:
        if scorer is None:
            raise ValueError("scorer required when selection is not fixed")
        candidates = [gamma_candidate(x, p) for p in params]
        chosen, _ = select_by_feedback(candidates, scorer)
    target = gamma_candidate(x, params[chosen])
    x = x - cfg.relax_rho * (x - target)
    x = denoise_prox(x, cfg.denoise_h)
    return IntraResidual(residual=x - x_in, enhanced=x, selected_candidate=chosen)
