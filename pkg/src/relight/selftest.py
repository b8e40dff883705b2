"""Bundled acceptance checks, runnable offline on synthetic data.

Each check returns a CheckResult; the CLI prints one PASS/FAIL line per
check and exits nonzero when anything fails.  The pytest acceptance module
drives the same functions, so the shipped self-test and the test suite
cannot drift apart.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import intra, inter, metrics, quality, synth
from .degrade import DegradeParams, degrade_sequence
from .frameio import FrameWindow, Sequence, read_frame
from .pipeline import PipelineConfig, enhance_sequence
from .solver import StageConfig, init_state, run_stage, x_update

__all__ = ["CheckResult", "CHECKS", "run_selftest"]


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


def _result(name: str, ok: bool, detail: str) -> CheckResult:
    return CheckResult(name, bool(ok), detail)


# ---------------------------------------------------------------------------
# individual checks, in acceptance order
# ---------------------------------------------------------------------------


def check_data_update() -> CheckResult:
    """Closed-form data step is a stationary point of its objective."""
    rng = np.random.default_rng(11)
    n = 10_000
    start = time.perf_counter()
    y = rng.uniform(0.0, 1.0, n)
    a = rng.uniform(0.05, 1.0, n)
    xs = rng.uniform(-0.5, 1.5, n)
    xt = rng.uniform(-0.5, 1.5, n)
    mu = rng.uniform(0.1, 5.0, n)
    grads = np.empty(n)
    for i in range(n):
        x = x_update(y[i], a[i], xs[i], xt[i], mu[i])
        grads[i] = a[i] * (a[i] * x - y[i]) + mu[i] * (x - xs[i]) + mu[i] * (x - xt[i])
    elapsed = time.perf_counter() - start
    worst = float(np.max(np.abs(grads)))
    ok = worst < 1e-6 and elapsed < 1.0
    return _result("data-update-optimality", ok, f"max |grad| {worst:.2e}, {elapsed:.2f}s")


def check_consensus() -> CheckResult:
    """Split variables agree under identity priors; residuals shrink under a denoiser."""
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    y = synth.make_image(32, 32, seed=5, channels=1)
    state = init_state(y, 1.0)
    cfg = StageConfig(inner_iters=20, num_stages=1)
    log: list = []
    run_stage(state, cfg, lambda f: f, lambda f: f, log=log)
    gap = float(np.max(np.abs(state.x - state.u)))
    drift = float(np.max(np.abs(state.x - y)))
    # denoiser toy: noisy constant frame, NLM spatial prior, identity temporal
    noisy = np.clip(0.5 + 0.05 * rng.standard_normal((32, 32)), 0.0, 1.0)
    state2 = init_state(noisy, 1.0)
    log2: list = []
    run_stage(state2, cfg, lambda f: intra.denoise_prox(f, 0.05), lambda f: f, log=log2)
    first_rs = log2[0][2]
    last_rs = log2[-1][2]
    elapsed = time.perf_counter() - start
    ok = gap < 1e-6 and drift < 1e-6 and last_rs <= first_rs / 10.0 and elapsed < 5.0
    return _result(
        "consensus-feasibility",
        ok,
        f"identity gap {gap:.2e}, r_s {first_rs:.2e}->{last_rs:.2e}, {elapsed:.2f}s",
    )


def check_mask() -> CheckResult:
    """Noise-mask scalar anchors and monotonicity in the overshoot."""
    m1 = inter.noise_mask(np.full((4, 4), 0.1), np.zeros((4, 4)), omega=0.01).values[0, 0]
    m2 = inter.noise_mask(np.full((4, 4), 0.1), np.zeros((4, 4)), omega=0.001).values[0, 0]
    m3 = inter.noise_mask(np.full((4, 4), -0.2), np.zeros((4, 4)), omega=0.01).values[0, 0]
    anchors = (
        abs(m1 - np.exp(-1.0)) < 1e-9
        and abs(m2 - np.exp(-10.0)) < 1e-9
        and abs(m3 - 1.0) < 1e-9
    )
    rng = np.random.default_rng(7)
    d = rng.uniform(-1.0, 1.0, (100_000, 2))
    lo, hi = d.min(axis=1), d.max(axis=1)
    mask_lo = np.exp(-np.maximum(lo, 0.0) ** 2 / 0.01)
    mask_hi = np.exp(-np.maximum(hi, 0.0) ** 2 / 0.01)
    monotone = bool(np.all(mask_lo >= mask_hi - 1e-15))
    ok = anchors and monotone
    return _result("noise-mask", ok, f"anchors {anchors}, monotone over 1e5 pairs {monotone}")


def check_feedback() -> CheckResult:
    """Argmin selection on pinned scores; pristine model prefers clean frames."""
    frames = [np.full((16, 16), v) for v in (0.2, 0.5, 0.8)]
    pinned = {0.2: 27.52, 0.5: 26.67, 0.8: 33.90}
    idx, best = intra.select_by_feedback(frames, lambda f: pinned[round(float(f[0, 0]), 1)])
    model = quality.default_model()
    rng = np.random.default_rng(21)
    wins = 0
    for trial in range(20):
        clean = synth.make_image(96, 96, seed=1000 + trial)
        noisy = np.clip(clean + 0.1 * rng.standard_normal(clean.shape), 0.0, 1.0)
        if quality.score(clean, model) < quality.score(noisy, model):
            wins += 1
    ok = idx == 1 and abs(best - 26.67) < 1e-12 and wins >= 18
    return _result("feedback-selection", ok, f"picked index {idx}, clean wins {wins}/20")


def check_candidates() -> CheckResult:
    """Gamma-candidate scalar anchor, range bound and identity behaviour."""
    frame = np.full((8, 8), 0.25)
    got = float(intra.gamma_candidate(frame, intra.CandidateParams(1.05, 1.02, 1.1))[0, 0])
    want = 1.02 * (1.05 * 0.25) ** 1.1
    rng = np.random.default_rng(13)
    in_range = True
    identity_ok = True
    for _ in range(50):
        x = rng.uniform(0.0, 1.0, (12, 12))
        params = intra.sample_candidates(4, seed=int(rng.integers(1 << 30)))
        identity_ok &= params[0].is_identity and np.array_equal(
            intra.gamma_candidate(x, params[0]), x
        )
        for p in params:
            c = intra.gamma_candidate(x, p)
            in_range &= bool(np.all(c >= 0.0) and np.all(c <= 1.0))
    ok = abs(got - want) < 1e-5 and in_range and identity_ok
    return _result(
        "gamma-candidates", ok, f"scalar err {abs(got - want):.2e}, range {in_range}, identity {identity_ok}"
    )


def check_flow() -> CheckResult:
    """Translation recovery under 0.25 px EPE; photometric refinement never regresses."""
    start = time.perf_counter()
    big = synth.make_image(160, 160, seed=31, channels=1)
    src = big[16:144, 13:141]
    dst = big[16 + 2 : 144 + 2, 13 - 3 : 141 - 3]  # content moves (+3, -2): flow = (3, -2)
    flow = inter.estimate_flow(src, dst)
    flow = inter.refine_flow(flow, src, dst)
    crop = (slice(13, -13), slice(13, -13))
    epe = float(np.mean(np.hypot(flow.u[crop] - 3.0, flow.v[crop] - (-2.0))))
    elapsed = time.perf_counter() - start
    rng = np.random.default_rng(37)
    small = synth.make_image(64, 64, seed=41, channels=1)
    s_src = small
    s_dst = np.roll(small, (0, 1), axis=(0, 1))
    regress = 0
    for _ in range(100):
        u = 1.0 + 0.4 * rng.standard_normal((64, 64))
        v = 0.4 * rng.standard_normal((64, 64))
        noisy_flow = inter.FlowField(u, v, np.ones((64, 64), dtype=bool))
        before = float(np.mean(np.abs(inter.warp(s_dst, noisy_flow)[0] - s_src)))
        refined = inter.refine_flow(noisy_flow, s_src, s_dst, steps=5)
        after = float(np.mean(np.abs(inter.warp(s_dst, refined)[0] - s_src)))
        if after > before + 1e-12:
            regress += 1
    ok = epe < 0.25 and regress == 0 and elapsed < 10.0
    return _result("optical-flow", ok, f"EPE {epe:.3f}px in {elapsed:.2f}s, refine regressions {regress}/100")


def check_fusion() -> CheckResult:
    """Trimmed-mean variance bound plus whole-pipeline temporal stabilization."""
    start = time.perf_counter()
    rng = np.random.default_rng(43)
    sigma = 0.05
    clean = synth.make_image(64, 64, seed=47, channels=1)
    err_acc = []
    for _ in range(40):
        members = [np.clip(clean + sigma * rng.standard_normal(clean.shape), 0, 1) for _ in range(5)]
        win = FrameWindow(center_index=2, members=members)
        s = inter.structure_estimate(win)
        err_acc.append(s - clean)
    var = float(np.var(np.stack(err_acc)))
    var_ok = var <= 0.45 * sigma**2
    base = synth.make_image(64, 64, seed=53)
    noisy_seq = Sequence(
        [np.clip(base + sigma * rng.standard_normal(base.shape), 0.0, 1.0) for _ in range(16)]
    )
    profile = intra.build_profile([base])
    model = quality.default_model()
    out, _ = enhance_sequence(noisy_seq, PipelineConfig(), profile, model)
    warp_in = metrics.warp_error(noisy_seq)
    warp_out = metrics.warp_error(out)
    mabd_in = metrics.mabd(noisy_seq)
    mabd_out = metrics.mabd(out)
    elapsed = time.perf_counter() - start
    ok = var_ok and warp_out < 0.5 * warp_in and mabd_out < mabd_in and elapsed < 60.0
    return _result(
        "temporal-fusion",
        ok,
        f"trim var {var / sigma**2:.2f}sigma^2, warp {warp_in:.3f}->{warp_out:.3f}, "
        f"mabd {mabd_in:.3f}->{mabd_out:.3f}, {elapsed:.1f}s",
    )


def check_end_to_end() -> CheckResult:
    """Degrade-then-enhance recovers fidelity; the second stage does not hurt."""
    start = time.perf_counter()
    clean = synth.make_sequence(64, 64, length=16, seed=59, velocity=(0.5, 0.25))
    params = DegradeParams(gain=0.2, shot=0.005, read=0.02, seed=61)
    degraded = degrade_sequence(clean, params)
    profile = intra.build_profile(clean.frames)
    model = quality.default_model()
    out2, _ = enhance_sequence(degraded, PipelineConfig(), profile, model)
    cfg1 = PipelineConfig(solver=StageConfig(num_stages=1))
    out1, _ = enhance_sequence(degraded, cfg1, profile, model)
    psnr_in = float(np.mean([metrics.psnr(d, c) for d, c in zip(degraded.frames, clean.frames)]))
    psnr_out = float(np.mean([metrics.psnr(o, c) for o, c in zip(out2.frames, clean.frames)]))
    psnr_one = float(np.mean([metrics.psnr(o, c) for o, c in zip(out1.frames, clean.frames)]))
    ssim_in = float(np.mean([metrics.ssim(d, c) for d, c in zip(degraded.frames, clean.frames)]))
    ssim_out = float(np.mean([metrics.ssim(o, c) for o, c in zip(out2.frames, clean.frames)]))
    elapsed = time.perf_counter() - start
    ok = (
        psnr_out >= psnr_in + 4.0
        and ssim_out >= ssim_in + 0.05
        and psnr_out >= psnr_one
        and elapsed < 120.0
    )
    return _result(
        "end-to-end-recovery",
        ok,
        f"psnr {psnr_in:.2f}->{psnr_out:.2f} (1-stage {psnr_one:.2f}), "
        f"ssim {ssim_in:.3f}->{ssim_out:.3f}, {elapsed:.1f}s",
    )


def check_metrics() -> CheckResult:
    """Closed-form metric anchors."""
    rng = np.random.default_rng(67)
    a = rng.uniform(0.1, 0.8, (32, 32))
    ident = metrics.psnr(a, a) == 100.0
    offset = abs(metrics.psnr(a, a + 0.1) - 20.0) < 1e-9
    ssim_self = metrics.ssim(a, a) == 1.0
    frames = [np.full((16, 16), 0.4 if t % 2 == 0 else 0.5) for t in range(8)]
    mabd_val = metrics.mabd(Sequence(frames))
    mabd_ok = abs(mabd_val - 10.0) < 1e-9
    perm = rng.permutation(frames[0].size)
    shuffled = [f.ravel()[perm].reshape(f.shape) for f in frames]
    shuffle_ok = abs(metrics.mabd(Sequence(shuffled)) - mabd_val) < 1e-9
    static = Sequence([a.copy() for _ in range(4)])
    warp_ok = metrics.warp_error(static) < 1e-6
    static_mabd_ok = metrics.mabd(static) < 1e-6
    ok = ident and offset and ssim_self and mabd_ok and shuffle_ok and warp_ok and static_mabd_ok
    return _result(
        "metric-anchors",
        ok,
        f"psnr cap {ident}, 20dB {offset}, ssim(a,a) {ssim_self}, mabd {mabd_val:.4f}, "
        f"shuffle {shuffle_ok}, static warp {warp_ok}, static mabd {static_mabd_ok}",
    )


def check_features(model_path: str | None = None) -> CheckResult:
    """36-feature vectors match the committed reference values."""
    if model_path is not None:
        try:
            quality.load_model(model_path)
        except ValueError as exc:
            return _result("nss-features", False, f"quality model rejected: {exc}")
    data = resources.files("relight") / "data"
    reference = json.loads((data / "nss_reference.json").read_text())
    worst = 0.0
    for name, expected in reference.items():
        with resources.as_file(data / name) as p:
            frame = read_frame(p)
        feats = quality.extract_features(frame).values
        worst = max(worst, float(np.max(np.abs(feats - np.asarray(expected)))))
    ok = worst < 1e-3
    return _result(
        "nss-features", ok, f"max |feature delta| {worst:.2e} over {len(reference)} fixtures"
    )


def check_determinism() -> CheckResult:
    """Same seed, any thread count: bit-identical outputs."""
    start = time.perf_counter()
    seq = synth.make_sequence(48, 48, length=6, seed=71, velocity=(0.3, 0.0))
    noisy = degrade_sequence(seq, DegradeParams(gain=0.4, shot=0.002, read=0.01, seed=73))
    profile = intra.build_profile(seq.frames)
    model = quality.default_model()
    cfg1 = PipelineConfig(threads=1)
    cfg3 = PipelineConfig(threads=3)
    out_a, _ = enhance_sequence(noisy, cfg1, profile, model)
    out_b, _ = enhance_sequence(noisy, cfg1, profile, model)
    out_c, _ = enhance_sequence(noisy, cfg3, profile, model)
    same_rerun = all(np.array_equal(x, y) for x, y in zip(out_a.frames, out_b.frames))
    same_threads = all(np.array_equal(x, y) for x, y in zip(out_a.frames, out_c.frames))
    deg_a = degrade_sequence(seq, DegradeParams(gain=0.4, shot=0.002, read=0.01, seed=73))
    same_degrade = all(np.array_equal(x, y) for x, y in zip(noisy.frames, deg_a.frames))
    elapsed = time.perf_counter() - start
    ok = same_rerun and same_threads and same_degrade
    return _result(
        "determinism",
        ok,
        f"rerun {same_rerun}, threads {same_threads}, degrade {same_degrade}, {elapsed:.1f}s",
    )


CHECKS = [
    ("data-update-optimality", check_data_update),
    ("consensus-feasibility", check_consensus),
    ("noise-mask", check_mask),
    ("feedback-selection", check_feedback),
    ("gamma-candidates", check_candidates),
    ("optical-flow", check_flow),
    ("temporal-fusion", check_fusion),
    ("end-to-end-recovery", check_end_to_end),
    ("metric-anchors", check_metrics),
    ("nss-features", check_features),
    ("determinism", check_determinism),
]


def run_selftest(
    only: list[str] | None = None,
    model_path: str | None = None,
    profile_path: str | None = None,
) -> list[CheckResult]:
    """Run the acceptance checks, optionally a named subset."""
    if profile_path is not None:
        try:
            intra.load_profile(profile_path)
        except ValueError as exc:
            return [_result("profile-file", False, str(exc))]
    results = []
    for name, fn in CHECKS:
        if only is not None and name not in only:
            continue
        if fn is check_features:
            results.append(fn(model_path))
        else:
            results.append(fn())
    return results
