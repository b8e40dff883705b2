"""Deterministic synthetic footage for tests, demos and the self-test.

The generator layers a 1/f random field (natural-image-like amplitude
spectrum), a handful of soft-edged shapes and a gentle illumination
gradient, so no-reference quality statistics behave roughly as they do on
photographs.  Everything is seeded; identical arguments give identical
pixels on every run.
"""

from __future__ import annotations

import numpy as np

from .frameio import Sequence

__all__ = ["make_image", "make_corpus", "make_sequence"]


def _pink_field(h: int, w: int, rng: np.random.Generator, slope: float = 1.2) -> np.ndarray:
    """Random field with a ~1/f^slope amplitude spectrum, scaled to unit std."""
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    radius = np.hypot(fy, fx)
    radius[0, 0] = 1.0
    spectrum = rng.normal(size=(h, w // 2 + 1)) + 1j * rng.normal(size=(h, w // 2 + 1))
    spectrum *= radius**-slope
    spectrum[0, 0] = 0.0
    field = np.fft.irfft2(spectrum, s=(h, w))
    return field / max(field.std(), 1e-12)


def _soft_disc(h: int, w: int, cy: float, cx: float, r: float, softness: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    d = np.hypot(yy - cy, xx - cx)
    return 1.0 / (1.0 + np.exp((d - r) / max(softness, 1e-6)))


def make_image(
    height: int = 128,
    width: int = 128,
    seed: int = 0,
    channels: int = 3,
    mean: float = 0.5,
    contrast: float = 0.16,
    weave: float = 0.0,
) -> np.ndarray:
    """One synthetic "photograph" in [0, 1] with the requested mean level.

    ``weave`` adds a regular woven texture (crossed gratings), useful when a
    fixture needs the strongly bimodal local statistics of fabric- or
    brick-like surfaces; 0 keeps the default smooth look.
    """
    rng = np.random.default_rng(seed)
    base = _pink_field(height, width, rng)
    # soft shapes give the scene distinct objects and occlusion-style edges
    for _ in range(rng.integers(3, 7)):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        r = rng.uniform(0.08, 0.3) * min(height, width)
        disc = _soft_disc(height, width, cy, cx, r, softness=rng.uniform(0.8, 3.0))
        base = base + rng.uniform(-1.6, 1.6) * disc
    # slow illumination ramp across the scene
    gy, gx = np.mgrid[0:height, 0:width]
    base = base + rng.uniform(-0.6, 0.6) * (gy / height) + rng.uniform(-0.6, 0.6) * (gx / width)
    if weave > 0.0:
        fy, fx = rng.uniform(0.12, 0.22, size=2)
        py, px = rng.uniform(0, 2 * np.pi, size=2)
        base = base + weave * (
            np.sin(2 * np.pi * fy * gy + py) + np.sin(2 * np.pi * fx * gx + px)
        )
    base = (base - base.mean()) / max(base.std(), 1e-12)
    luma = np.clip(mean + contrast * base, 0.02, 0.98)
    if channels == 1:
        return luma
    # mildly varying chroma: blend the luma with two more smooth fields
    tint = np.stack([_pink_field(height, width, rng, 1.5) for _ in range(2)])
    rgb = np.stack(
        [
            luma * (1.0 + 0.18 * tint[0]),
            luma,
            luma * (1.0 + 0.18 * tint[1]),
        ],
        axis=-1,
    )
    return np.clip(rgb, 0.0, 1.0)


def make_corpus(count: int = 12, size: int = 128, seed: int = 100, channels: int = 3) -> list[np.ndarray]:
    """A list of well-exposed synthetic stills (used for profiles/quality models)."""
    return [
        make_image(size, size, seed=seed + i, channels=channels, mean=0.48 + 0.04 * ((i % 3) - 1))
        for i in range(count)
    ]


def make_sequence(
    height: int = 64,
    width: int = 64,
    length: int = 12,
    seed: int = 0,
    channels: int = 3,
    velocity: tuple[float, float] = (0.0, 0.0),
    frame_rate: float = 24.0,
) -> Sequence:
    """Panning sequence cut from one larger master image.

    ``velocity`` is the per-frame camera shift (dx, dy) in pixels; integer
    shifts crop exactly, fractional shifts sample the master bilinearly, so
    ground-truth inter-frame motion is exactly ``velocity``.
    """
    dx, dy = velocity
    pad = int(np.ceil(max(abs(dx), abs(dy)) * length)) + 4
    master = make_image(height + 2 * pad, width + 2 * pad, seed=seed, channels=channels)
    frames = []
    for t in range(length):
        oy, ox = pad + dy * t, pad + dx * t
        iy, ix = int(np.floor(oy)), int(np.floor(ox))
        fy, fx = oy - iy, ox - ix
        block = master[iy : iy + height + 1, ix : ix + width + 1]
        # bilinear mix of the four integer-aligned crops
        out = (
            (1 - fy) * (1 - fx) * block[:-1, :-1]
            + (1 - fy) * fx * block[:-1, 1:]
            + fy * (1 - fx) * block[1:, :-1]
            + fy * fx * block[1:, 1:]
        )
        frames.append(np.asarray(out, dtype=np.float64))
    return Sequence(frames, frame_rate=frame_rate)
