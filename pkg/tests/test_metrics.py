import numpy as np
import pytest
from skimage.metrics import structural_similarity

from relight import synth
from relight.frameio import Sequence
from relight.metrics import MetricReport, mabd, psnr, report, ssim, warp_error, write_report


# --- psnr ----------------------------------------------------------------------


def test_psnr_identical_frames_capped(gray_image):
    assert psnr(gray_image, gray_image) == 100.0


def test_psnr_known_mse_values():
    a = np.zeros((16, 16))
    assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-9)
    assert psnr(a, a + 0.01) == pytest.approx(40.0, abs=1e-9)


def test_psnr_symmetry(gray_image, rng):
    other = np.clip(gray_image + 0.1 * rng.standard_normal(gray_image.shape), 0, 1)
    assert psnr(gray_image, other) == psnr(other, gray_image)


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError, match="shape mismatch"):
        psnr(np.zeros((8, 8)), np.zeros((8, 9)))


# --- ssim ----------------------------------------------------------------------


def test_ssim_self_is_one(gray_image):
    assert ssim(gray_image, gray_image) == pytest.approx(1.0, abs=1e-9)


def test_ssim_inverted_structure_is_low():
    ramp = np.tile(np.linspace(0.1, 0.9, 64), (64, 1))
    assert ssim(ramp, 1.0 - ramp) < 0.2


def test_ssim_tolerates_brightness_offset(gray_image):
    shifted = np.clip(gray_image + 0.1, 0.0, 1.0)
    assert ssim(gray_image, shifted) > 0.8


def test_ssim_symmetry(gray_image, rng):
    other = np.clip(gray_image + 0.05 * rng.standard_normal(gray_image.shape), 0, 1)
    assert abs(ssim(gray_image, other) - ssim(other, gray_image)) < 1e-9


@pytest.mark.parametrize("seed,sigma", [(81, 0.02), (82, 0.08), (83, 0.2)])
def test_ssim_matches_reference_implementation(seed, sigma):
    a = synth.make_image(96, 96, seed=seed, channels=1)
    noise_rng = np.random.default_rng(seed + 1000)
    b = np.clip(a + sigma * noise_rng.standard_normal(a.shape), 0, 1)
    ours = ssim(a, b)
    theirs = structural_similarity(
        a,
        b,
        gaussian_weights=True,
        sigma=1.5,
        use_sample_covariance=False,
        data_range=1.0,
    )
    assert ours == pytest.approx(theirs, abs=2e-3)


def test_ssim_rejects_tiny_frames():
    with pytest.raises(ValueError, match="too small"):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))


def test_ssim_color_uses_luma(color_image):
    # permuting chroma while preserving luma leaves SSIM at ~1
    lum_only = np.repeat(
        (0.299 * color_image[:, :, 0] + 0.587 * color_image[:, :, 1] + 0.114 * color_image[:, :, 2])[
            :, :, None
        ],
        3,
        axis=2,
    )
    assert ssim(color_image, lum_only) == pytest.approx(1.0, abs=1e-9)


# --- warp error ------------------------------------------------------------------


def test_warp_error_static_sequence_near_zero():
    img = synth.make_image(64, 64, seed=90, channels=1)
    seq = Sequence(frames=[img.copy() for _ in range(4)])
    assert warp_error(seq) < 1e-6


def test_warp_error_tracks_iid_noise_level():
    base = synth.make_image(64, 64, seed=91, channels=1)
    rng = np.random.default_rng(17)
    sigma = 0.05
    frames = [np.clip(base + sigma * rng.standard_normal(base.shape), 0, 1) for _ in range(6)]
    we = warp_error(Sequence(frames=frames))
    # independent noise on both frames -> expected masked MSE ~ 2 sigma^2 = 0.5 x100,
    # minus what the flow estimator absorbs
    assert 0.2 < we < 0.7


def test_warp_error_penalizes_brightness_flicker():
    base = synth.make_image(64, 64, seed=92, channels=1)
    steady = Sequence(frames=[base.copy() for _ in range(4)])
    flicker = Sequence(
        frames=[np.clip(base + (0.05 if t % 2 else -0.05), 0, 1) for t in range(4)]
    )
    assert warp_error(flicker) > warp_error(steady) + 0.01


def test_warp_error_needs_two_frames():
    with pytest.raises(ValueError):
        warp_error(Sequence(frames=[np.zeros((32, 32))]))


# --- mabd ------------------------------------------------------------------------


def test_mabd_static_is_zero(gray_image):
    seq = Sequence(frames=[gray_image.copy() for _ in range(5)])
    assert mabd(seq) == 0.0


def test_mabd_alternating_brightness():
    frames = [np.full((16, 16), 0.4 if t % 2 == 0 else 0.5) for t in range(6)]
    assert mabd(Sequence(frames=frames)) == pytest.approx(10.0, abs=1e-9)


def test_mabd_invariant_to_spatial_shuffle(rng):
    frames = [synth.make_image(16, 16, seed=s, channels=1) for s in (1, 2, 3)]
    perm = rng.permutation(frames[0].size)
    shuffled = [f.ravel()[perm].reshape(f.shape) for f in frames]
    assert mabd(Sequence(frames=shuffled)) == pytest.approx(
        mabd(Sequence(frames=frames)), abs=1e-9
    )


def test_mabd_ignores_mean_preserving_noise(rng):
    base = np.full((64, 64), 0.5)
    frames = []
    for _ in range(5):
        n = rng.standard_normal(base.shape)
        frames.append(base + 0.01 * (n - n.mean()))
    assert mabd(Sequence(frames=frames)) < 0.01


def test_mabd_needs_two_frames():
    with pytest.raises(ValueError):
        mabd(Sequence(frames=[np.zeros((8, 8))]))


# --- report ------------------------------------------------------------------------


def test_report_with_reference(pan_sequence):
    rng = np.random.default_rng(23)
    noisy = Sequence(
        frames=[np.clip(f + 0.02 * rng.standard_normal(f.shape), 0, 1) for f in pan_sequence.frames],
        frame_rate=pan_sequence.frame_rate,
    )
    rep = report(noisy, pan_sequence)
    assert len(rep.psnr) == len(pan_sequence) and len(rep.ssim) == len(pan_sequence)
    assert all(20.0 < p < 45.0 for p in rep.psnr)
    assert rep.mean_psnr == pytest.approx(float(np.mean(rep.psnr)))
    assert rep.warp > 0.0 and rep.mabd >= 0.0


def test_report_without_reference(pan_sequence):
    rep = report(pan_sequence)
    assert rep.psnr == [] and rep.ssim == []
    assert rep.mean_psnr is None and rep.mean_ssim is None
    assert rep.warp >= 0.0


def test_report_length_mismatch(pan_sequence):
    short = Sequence(frames=pan_sequence.frames[:-1])
    with pytest.raises(ValueError, match="length"):
        report(pan_sequence, short)


def test_write_report_layout(tmp_path):
    rep = MetricReport(psnr=[20.0, 22.5], ssim=[0.8, 0.85], warp=0.1234, mabd=0.05)
    out = tmp_path / "m.csv"
    write_report(rep, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "frame,psnr,ssim"
    assert lines[1] == "0,20.0000,0.8000"
    assert lines[2] == "1,22.5000,0.8500"
    assert lines[3] == "summary,21.2500,0.8250"
    assert lines[4] == "warp,0.1234"
    assert lines[5] == "mabd,0.0500"


def test_write_report_no_reference_keeps_summary_row(tmp_path):
    rep = MetricReport(psnr=[], ssim=[], warp=0.5, mabd=0.1)
    out = tmp_path / "m.csv"
    write_report(rep, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "frame,psnr,ssim"
    assert lines[1] == "summary,,"
    assert lines[2] == "warp,0.5000"
    assert lines[3] == "mabd,0.1000"
