import numpy as np
import pytest

from relight import synth
from relight.degrade import DegradeParams, degrade_frame, degrade_sequence
from relight.frameio import Sequence
from relight.metrics import mabd


def test_params_validation():
    with pytest.raises(ValueError):
        DegradeParams(gain=0.0)
    with pytest.raises(ValueError):
        DegradeParams(gain=1.5)
    with pytest.raises(ValueError):
        DegradeParams(gain=0.5, shot=-0.1)
    with pytest.raises(ValueError):
        DegradeParams(gain=0.5, read=-0.1)
    DegradeParams(gain=1.0)  # boundary is legal


def test_noiseless_identity():
    x = synth.make_image(16, 16, seed=1)
    p = DegradeParams(gain=1.0, shot=0.0, read=0.0, quantize=False)
    np.testing.assert_array_equal(degrade_frame(x, p), x)


def test_pure_attenuation():
    x = np.full((8, 8), 0.5)
    p = DegradeParams(gain=0.2, shot=0.0, read=0.0, quantize=False)
    np.testing.assert_allclose(degrade_frame(x, p), 0.1)


def test_monte_carlo_variance():
    """a=0.5, k=0.01, sigma_r=0.02 at x=0.5: variance = k*a*x + sigma_r^2 = 0.0029."""
    x = np.full((200, 500), 0.5)  # 1e5 pixels
    p = DegradeParams(gain=0.5, shot=0.01, read=0.02, quantize=False, seed=99)
    y = degrade_frame(x, p)
    var = float(np.var(y))
    assert abs(var - 0.0029) <= 0.05 * 0.0029


def test_mean_is_attenuated_signal():
    x = np.full((200, 500), 0.5)
    p = DegradeParams(gain=0.5, shot=0.01, read=0.02, quantize=False, seed=7)
    y = degrade_frame(x, p)
    se = np.sqrt(0.0029 / x.size)
    assert abs(float(np.mean(y)) - 0.25) < 3 * se


def test_variance_affine_in_signal():
    """Regressing empirical variance on a*x recovers slope k, intercept sigma_r^2."""
    rng_levels = np.linspace(0.1, 0.9, 9)
    k, read = 0.01, 0.03
    slopes_x, var_y = [], []
    for i, level in enumerate(rng_levels):
        x = np.full((100, 1000), level)
        p = DegradeParams(gain=0.5, shot=k, read=read, quantize=False, seed=100 + i)
        y = degrade_frame(x, p)
        slopes_x.append(0.5 * level)
        var_y.append(np.var(y))
    slope, intercept = np.polyfit(slopes_x, var_y, 1)
    assert abs(slope - k) < 0.1 * k
    assert abs(intercept - read**2) < 0.1 * read**2


def test_quantize_lands_on_grid():
    x = synth.make_image(16, 16, seed=2)
    p = DegradeParams(gain=0.5, shot=0.002, read=0.01, quantize=True, seed=3)
    y = degrade_frame(x, p)
    np.testing.assert_array_equal(y, np.round(y * 255) / 255)
    assert y.min() >= 0.0 and y.max() <= 1.0


def test_gain_map_broadcasts_over_channels():
    x = synth.make_image(12, 12, seed=4, channels=3)
    gain = np.full((12, 12), 0.25)
    p = DegradeParams(gain=gain, shot=0.0, read=0.0, quantize=False)
    np.testing.assert_allclose(degrade_frame(x, p), 0.25 * x)


def test_gain_map_validation():
    with pytest.raises(ValueError):
        DegradeParams(gain=np.full((4, 4), 0.0))


def test_sequence_noise_temporally_independent():
    base = synth.make_image(24, 24, seed=5)
    seq = Sequence([base.copy() for _ in range(6)])
    p = DegradeParams(gain=0.8, shot=0.0, read=0.05, quantize=False, seed=11)
    out = degrade_sequence(seq, p)
    assert mabd(out) > 0.0
    assert not np.array_equal(out.frames[0], out.frames[1])


def test_sequence_noiseless_is_scaled_copy():
    seq = synth.make_sequence(16, 16, length=4, seed=6)
    p = DegradeParams(gain=0.3, shot=0.0, read=0.0, quantize=False)
    out = degrade_sequence(seq, p)
    for a, b in zip(out.frames, seq.frames):
        np.testing.assert_allclose(a, 0.3 * b)


def test_same_seed_bit_identical():
    seq = synth.make_sequence(16, 16, length=4, seed=8)
    p = DegradeParams(gain=0.4, shot=0.005, read=0.02, quantize=True, seed=21)
    a = degrade_sequence(seq, p)
    b = degrade_sequence(seq, p)
    for fa, fb in zip(a.frames, b.frames):
        np.testing.assert_array_equal(fa, fb)


def test_frame_seeds_differ_from_sequence_position():
    base = synth.make_image(16, 16, seed=9)
    p = DegradeParams(gain=0.5, shot=0.0, read=0.05, quantize=False, seed=33)
    seq = degrade_sequence(Sequence([base, base]), p)
    # frame t uses seed + t, so frame 1 must differ from a fresh seed-33 frame
    solo = degrade_frame(base, p)
    np.testing.assert_array_equal(seq.frames[0], solo)
    assert not np.array_equal(seq.frames[1], solo)
