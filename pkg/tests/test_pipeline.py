import numpy as np
import pytest

from relight import synth
from relight.degrade import DegradeParams, degrade_sequence
from relight.frameio import Sequence
from relight.intra import IntraConfig, build_profile, default_profile
from relight.pipeline import PipelineConfig, enhance_frame, enhance_sequence
from relight.quality import default_model
from relight.solver import StageConfig


FAST = PipelineConfig(
    solver=StageConfig(num_stages=1, inner_iters=2),
    intra=IntraConfig(n_candidates=3),
)


def _clip(length=5, size=40, seed=160):
    clean = synth.make_sequence(size, size, length, seed=seed, channels=1, velocity=(0.4, 0.2))
    dark = degrade_sequence(clean, DegradeParams(gain=0.35, shot=0.002, read=0.01, seed=seed + 1))
    return clean, dark


def test_thread_count_never_changes_output():
    clean, dark = _clip()
    profile = build_profile(list(clean.frames))
    model = default_model()
    tele1: list = []
    tele3: list = []
    out1, sel1 = enhance_sequence(dark, FAST, profile, model, telemetry=tele1)
    out3, sel3 = enhance_sequence(
        dark, PipelineConfig(solver=FAST.solver, intra=FAST.intra, threads=3),
        profile, model, telemetry=tele3,
    )
    assert sel1 == sel3
    for a, b in zip(out1.frames, out3.frames):
        np.testing.assert_array_equal(a, b)
    assert tele1 == tele3


def test_rerun_is_bit_identical():
    clean, dark = _clip(seed=161)
    profile = build_profile(list(clean.frames))
    model = default_model()
    out_a, _ = enhance_sequence(dark, FAST, profile, model)
    out_b, _ = enhance_sequence(dark, FAST, profile, model)
    for a, b in zip(out_a.frames, out_b.frames):
        np.testing.assert_array_equal(a, b)


def test_telemetry_rows_ordered_per_frame():
    _, dark = _clip(length=4, seed=162)
    tele: list = []
    enhance_sequence(dark, FAST, default_profile(), default_model(), telemetry=tele)
    stages, iters = FAST.solver.num_stages, FAST.solver.inner_iters
    assert len(tele) == len(dark) * stages * iters
    for t in range(len(dark)):
        rows = tele[t * stages * iters : (t + 1) * stages * iters]
        assert all(r[0] == t for r in rows)
        assert [r[2] for r in rows] == list(range(1, iters + 1)) * stages
        assert all(np.isfinite(r[3]) and np.isfinite(r[4]) for r in rows)


def test_selections_pinned_across_frames():
    _, dark = _clip(length=5, seed=163)
    record_per_frame: list[dict[int, int]] = []
    profile = default_profile()
    model = default_model()
    _, selections = enhance_sequence(dark, FAST, profile, model)
    assert len(selections) == FAST.solver.num_stages
    for stage, choice in selections:
        assert 0 <= choice < FAST.intra.n_candidates
    # pinning the recorded choice reproduces the sequence output frame by frame
    pinned = [choice for _, choice in selections]
    out, _ = enhance_sequence(dark, FAST, profile, model)
    direct = enhance_frame(dark, 1, FAST, profile, None, selections=pinned)
    np.testing.assert_array_equal(out.frames[1], direct)
    assert record_per_frame == []


def test_enhancement_brightens_dark_input():
    clean, dark = _clip(length=5, size=48, seed=164)
    profile = build_profile(list(clean.frames))
    out, _ = enhance_sequence(dark, FAST, profile, default_model())
    assert float(np.mean(np.stack(out.frames))) > 2.0 * float(np.mean(np.stack(dark.frames)))
    for f in out.frames:
        assert np.all(f >= 0.0) and np.all(f <= 1.0)


def test_seed_changes_candidate_draws():
    _, dark = _clip(length=3, size=32, seed=165)
    profile = default_profile()
    model = default_model()
    out_a, _ = enhance_sequence(dark, FAST, profile, model)
    moved = PipelineConfig(solver=FAST.solver, intra=FAST.intra, seed=99)
    out_b, _ = enhance_sequence(dark, moved, profile, model)
    # different candidate draws are allowed to (and here do) change the output
    deltas = [float(np.max(np.abs(a - b))) for a, b in zip(out_a.frames, out_b.frames)]
    assert max(deltas) > 0.0


def test_frame_windows_are_independent():
    # enhancing frame t alone equals its value inside a full-sequence run
    _, dark = _clip(length=5, seed=166)
    profile = default_profile()
    model = default_model()
    out, selections = enhance_sequence(dark, FAST, profile, model)
    pinned = [choice for _, choice in selections]
    for t in (0, 2, 4):
        solo = enhance_frame(dark, t, FAST, profile, None, selections=pinned)
        np.testing.assert_array_equal(out.frames[t], solo)


def test_pipeline_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(threads=0)
