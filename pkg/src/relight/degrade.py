"""Synthetic low-light degradation.

The forward model is ``y = a * x + n`` with per-pixel noise variance
``k * a * x + sigma_r**2``: a signal-dependent (shot-like) term on the
attenuated signal plus a constant read-noise floor.  Degradation is the
inverse problem's ground truth generator, so it is seeded and reproducible
down to the bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frameio import Sequence, validate_frame

__all__ = ["DegradeParams", "degrade_frame", "degrade_sequence"]


@dataclass(frozen=True)
class DegradeParams:
    """Knobs of the degradation model.

    gain
        Illumination attenuation ``a``, scalar in (0, 1] or a per-pixel map.
    shot, read
        Noise coefficients ``k`` and ``sigma_r``; both may be zero.
    quantize
        If true, clamp to [0, 1] and round to the 8-bit grid (clamp first,
        then quantize, matching the file writers).
    seed
        Base RNG seed.
    """

    gain: float | np.ndarray = 0.5
    shot: float = 0.0
    read: float = 0.0
    quantize: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        g = np.asarray(self.gain, dtype=np.float64)
        if np.any(g <= 0.0) or np.any(g > 1.0):
            raise ValueError("gain must lie in (0, 1]")
        if self.shot < 0.0 or self.read < 0.0:
            raise ValueError("noise coefficients must be nonnegative")


def _apply(frame: np.ndarray, p: DegradeParams, rng: np.random.Generator) -> np.ndarray:
    x = validate_frame(frame)
    gain = np.asarray(p.gain, dtype=np.float64)
    if gain.ndim == 2 and x.ndim == 3:
        gain = gain[:, :, None]
    y = gain * x
    if p.shot > 0.0 or p.read > 0.0:
        sigma = np.sqrt(p.shot * np.clip(y, 0.0, None) + p.read**2)
        y = y + sigma * rng.standard_normal(x.shape)
    if p.quantize:
        y = np.round(np.clip(y, 0.0, 1.0) * 255.0) / 255.0
    return y


def degrade_frame(frame: np.ndarray, p: DegradeParams) -> np.ndarray:
    """Degrade a single frame with the given parameters and seed."""
    return _apply(frame, p, np.random.default_rng(p.seed))


def degrade_sequence(seq: Sequence, p: DegradeParams) -> Sequence:
    """Degrade every frame independently with derived seeds ``seed + t``.

    Derived seeding keeps single-frame runs reproducible regardless of
    sequence length or processing order.
    """
    frames = [
        _apply(frame, p, np.random.default_rng(p.seed + t))
        for t, frame in enumerate(seq.frames)
    ]
    return Sequence(frames, frame_rate=seq.frame_rate)
