import numpy as np
import pytest

from relight import synth
from relight.frameio import Sequence


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def gray_image():
    return synth.make_image(48, 48, seed=10, channels=1)


@pytest.fixture
def color_image():
    return synth.make_image(48, 48, seed=11, channels=3)


@pytest.fixture
def pan_sequence():
    """Short panning sequence with known per-frame velocity (0.5, 0.25) px."""
    return synth.make_sequence(48, 48, length=8, seed=12, velocity=(0.5, 0.25))


@pytest.fixture
def static_noisy_sequence(rng):
    base = synth.make_image(48, 48, seed=13, channels=1)
    frames = [np.clip(base + 0.05 * rng.standard_normal(base.shape), 0, 1) for _ in range(8)]
    return Sequence(frames)
